"""Integer threshold rules shared by Trent's verdict and the fairness analysis.

A client proves a choice on the ``count`` qubits prepared in the basis of that
choice. Rejecting requires strictly fewer than ``(1 - alpha) * count`` wrong
results; accepting requires at least ``alpha * count`` correct ones.
Products within ``SNAP_TOL`` of an integer are treated as that integer so a
decimal ``alpha`` such as 0.7 behaves as written rather than as its binary
approximation.
"""

from __future__ import annotations

import contextlib
import math
from collections.abc import Iterator

import numpy as np

SNAP_TOL = 1e-9

# Test hook: shifts the reject allowance to emulate a wrong convention.
_reject_offset = 0


def snap(x: float) -> float:
    r = round(x)
    if abs(x - r) <= SNAP_TOL * max(1.0, abs(x)):
        return float(r)
    return x


def reject_limit(alpha: float, n_reject: int) -> int:
    """Smallest wrong-result count that makes rejection impossible.

    Equals ``ceil((1 - alpha) * n_reject)``; with no Reject-basis qubits the
    rejection is vacuous and one (impossible) wrong result is the limit.
    """
    if n_reject == 0:
        return 1 + _reject_offset
    return math.ceil(snap((1.0 - alpha) * n_reject)) + _reject_offset


def allowed_reject_wrong(alpha: float, n_reject: int) -> int:
    return reject_limit(alpha, n_reject) - 1


def required_accept_correct(alpha: float, n_accept: int) -> int:
    return math.ceil(snap(alpha * n_accept))


@contextlib.contextmanager
def perturbed_reject_threshold(offset: int = 1) -> Iterator[None]:
    """Temporarily shift the reject allowance (mutation-testing hook)."""
    global _reject_offset
    saved = _reject_offset
    _reject_offset = offset
    try:
        yield
    finally:
        _reject_offset = saved


def reject_limits(alphas, n_reject: int):
    """Vectorised :func:`reject_limit` over an array of ``alpha`` values."""
    alphas = np.asarray(alphas, dtype=float)
    if n_reject == 0:
        return np.full(alphas.shape, 1 + _reject_offset, dtype=np.int64)
    x = (1.0 - alphas) * n_reject
    r = np.round(x)
    x = np.where(np.abs(x - r) <= SNAP_TOL * np.maximum(1.0, np.abs(x)), r, x)
    return np.ceil(x).astype(np.int64) + _reject_offset
