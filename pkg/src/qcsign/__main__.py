import sys

from qcsign.cli import main

sys.exit(main())
