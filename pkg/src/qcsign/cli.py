"""Command-line entry point: ``qcsign <command> [options]``.

Settings come from built-in defaults, then an optional YAML file
(``--config``), then command-line flags. A config file may hold top-level
keys shared by all commands and a section per command, for example::

    seed: 7
    alpha: {lo: 0.9, hi: 0.99}
    analyze:
      n: 600
      split: binomial
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from qcsign import __version__, thresholds
from qcsign.analysis import (
    AlphaDistribution,
    SplitModel,
    chebyshev_risk_check,
    fairness_curve,
    scaling_fit,
)
from qcsign.analysis.oracle import ORACLE_RTOL, oracle_suite
from qcsign.protocol import wire
from qcsign.protocol.binding import binding_verdict
from qcsign.protocol.session import Party
from qcsign.protocol.strategy import Strategy
from qcsign.protocol.transport import TrentServer, TrentService
from qcsign.quantum import NoiseModel
from qcsign.simulation import report_json, run_single, run_trials, validate_against_analysis

log = logging.getLogger("qcsign")

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    command: str = "analyze"
    n: int = 600
    ns: list[int] = field(default_factory=lambda: [100, 200, 400, 800, 1600])
    split: str = "binomial"
    alpha_lo: float = 0.9
    alpha_hi: float = 0.99
    alpha_point: float | None = None
    quad_tol: float = 1e-5
    noise: float = 0.0
    eta: float = 0.0
    trials: int = 1000
    seed: int = 0
    strategy_a: str = "honest"
    strategy_b: str = "honest"
    deadline: int | None = None
    out: str | None = None
    format: str = "json"
    points: list[list[float]] | None = None
    persist: str | None = None
    session: str | None = None
    claim_a: str | None = None
    claim_b: str | None = None
    host: str = "127.0.0.1"
    port: int = 0
    perturb_threshold: int = 0

    def embedded(self) -> dict:
        """Resolved settings written into every output (paths excluded)."""
        skip = {"out", "persist", "session", "claim_a", "claim_b", "host", "port"}
        return {k: v for k, v in asdict(self).items() if k not in skip}

    # Typed accessors, each validating its own field.
    def alpha_dist(self) -> AlphaDistribution:
        try:
            if self.alpha_point is not None:
                return AlphaDistribution.point(self.alpha_point)
            return AlphaDistribution.uniform(self.alpha_lo, self.alpha_hi)
        except ValueError as exc:
            name = "alpha_point" if self.alpha_point is not None else "alpha_lo/alpha_hi"
            raise ConfigError(name, str(exc)) from None

    def split_model(self) -> SplitModel:
        try:
            return SplitModel(self.split)
        except ValueError:
            raise ConfigError("split", f"expected 'binomial' or 'fixed', got {self.split!r}") from None

    def noise_model(self) -> NoiseModel:
        if not 0.0 <= self.noise < 1.0:
            raise ConfigError("noise", f"flip probability must lie in [0, 1), got {self.noise}")
        if not 0.0 <= self.eta < 1.0:
            raise ConfigError("eta", f"must lie in [0, 1), got {self.eta}")
        return NoiseModel(self.noise, self.eta)

    def strategies(self) -> tuple[Strategy, Strategy]:
        out = []
        for name in ("strategy_a", "strategy_b"):
            try:
                s = Strategy.parse(getattr(self, name))
                s.validate(self.n)
            except ValueError as exc:
                raise ConfigError(name, str(exc)) from None
            out.append(s)
        return out[0], out[1]

    def validate(self) -> None:
        if self.command in ("analyze", "simulate") and self.n < 1:
            raise ConfigError("n", f"must be at least 1, got {self.n}")
        if self.command == "analyze":
            split = self.split_model()
            if split is SplitModel.FIXED_EQUAL and self.n % 2:
                raise ConfigError("n", f"fixed split needs an even N, got {self.n}")
        if self.command in ("analyze", "scaling", "simulate", "verify"):
            self.alpha_dist()
        if self.command in ("analyze", "scaling") and not 0.0 < self.quad_tol < 1.0:
            raise ConfigError("quad_tol", f"must lie in (0, 1), got {self.quad_tol}")
        if self.command in ("simulate", "verify") and self.trials < 1:
            raise ConfigError("trials", f"must be at least 1, got {self.trials}")
        if self.command == "simulate":
            self.noise_model()
            self.strategies()
            if self.deadline is not None and self.deadline < 0:
                raise ConfigError("deadline", "must be non-negative")
        if self.command == "scaling":
            if self.points is None:
                split = self.split_model()
                if len(self.ns) < 3:
                    raise ConfigError("ns", f"need at least 3 values of N, got {len(self.ns)}")
                if len(set(self.ns)) != len(self.ns):
                    raise ConfigError("ns", f"duplicate values in {self.ns}")
                if any(n < 1 or (split is SplitModel.FIXED_EQUAL and n % 2) for n in self.ns):
                    raise ConfigError("ns", f"values must be positive (and even for fixed split): {self.ns}")
            else:
                ns = [p[0] for p in self.points]
                if len(self.points) < 3:
                    raise ConfigError("points", "need at least 3 points")
                if len(set(ns)) != len(ns):
                    raise ConfigError("points", f"duplicate N in {ns}")
        if self.command == "bind":
            for name in ("session", "claim_a", "claim_b"):
                if not getattr(self, name):
                    raise ConfigError(name, "required for bind")
            if self.alpha_point is None:
                self.alpha_dist()
            elif not 0.5 < self.alpha_point < 1.0:
                raise ConfigError("alpha_point", f"must lie in (1/2, 1), got {self.alpha_point}")
            if not 0.0 <= self.eta < 1.0:
                raise ConfigError("eta", f"must lie in [0, 1), got {self.eta}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format", f"expected 'json' or 'csv', got {self.format!r}")
        if self.command == "serve" and not 0 <= self.port < 65536:
            raise ConfigError("port", f"out of range: {self.port}")


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    try:
        if value is None:
            return None
        if kind.startswith("int"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind.startswith("float"):
            return float(value)
        if kind.startswith("str"):
            return str(value)
        if name == "ns":
            return [int(v) for v in value]
        if name == "points":
            return [[float(x) for x in p] for p in value]
    except (TypeError, ValueError):
        raise ConfigError(name, f"invalid value {value!r} (expected {kind})") from None
    return value


def _flatten_file(data: dict, command: str) -> dict:
    """Top-level keys, then the command's own section; nested ``alpha``/``noise`` maps flattened."""
    out: dict = {}

    def take(section: dict):
        for key, value in section.items():
            key = key.replace("-", "_")
            if key == "alpha" and isinstance(value, dict):
                for sub, v in value.items():
                    out[{"point": "alpha_point", "lo": "alpha_lo", "hi": "alpha_hi"}.get(sub, sub)] = v
            elif key == "noise" and isinstance(value, dict):
                if "flip_prob" in value:
                    out["noise"] = value["flip_prob"]
                if "eta" in value:
                    out["eta"] = value["eta"]
            elif key == "strategies" and isinstance(value, dict):
                out["strategy_a"] = value.get("a", value.get("alice"))
                out["strategy_b"] = value.get("b", value.get("bob"))
            elif isinstance(value, dict):
                continue
            else:
                out[key] = value

    take({k: v for k, v in data.items() if not isinstance(v, dict) or k in ("alpha", "noise", "strategies")})
    if isinstance(data.get(command), dict):
        take(data[command])
    return out


def load_config_file(path: str, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a mapping")
    return _flatten_file(data, command)


def resolve_config(command: str, file_values: dict, cli_values: dict) -> ExperimentConfig:
    values: dict = {}
    for source in (file_values, cli_values):
        for key, value in source.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(key, "unknown setting")
            values[key] = _coerce(key, value)
    defaults = {"simulate": {"n": 20}, "scaling": {"split": "fixed"}, "verify": {"trials": 100_000}}
    merged = {**defaults.get(command, {}), **values, "command": command}
    cfg = ExperimentConfig(**merged)
    cfg.validate()
    return cfg


# Output helpers ------------------------------------------------------------

def _header(cfg: ExperimentConfig) -> dict:
    return {"version": __version__, "config": cfg.embedded()}


def _csv_preamble(cfg: ExperimentConfig) -> str:
    return (f"# version: {__version__}\n"
            f"# config: {json.dumps(cfg.embedded(), sort_keys=True)}\n")


def _write(cfg: ExperimentConfig, name: str, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(cfg.out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return report_json(obj) + "\n"


def _write_timing(cfg: ExperimentConfig, seconds: float) -> None:
    # Kept apart from the result files so those stay byte-identical across runs.
    if cfg.out is not None:
        _write(cfg, "timing.json", _dump({"wall_time_s": round(seconds, 3)}))
    log.info("wall time %.3f s", seconds)


# Commands -----------------------------------------------------------------

def cmd_analyze(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    curve = fairness_curve(cfg.n, cfg.alpha_dist(), cfg.split_model(), cfg.quad_tol)
    elapsed = time.perf_counter() - t0
    m_star, sup = curve.sup
    summary = {**_header(cfg), **curve.settings(), "m_star": m_star, "sup": sup}
    if sup > 0.0:
        delta = sup ** (1.0 / 3.0)
        risk = chebyshev_risk_check(cfg.n, m_star, delta, cfg.alpha_dist(), cfg.split_model(),
                                    cfg.quad_tol)
        summary["risk_check"] = {"delta": delta, "threshold": risk.threshold,
                                 "probability": risk.probability, "bound": risk.bound,
                                 "precondition_met": risk.precondition_met, "passed": risk.passed}
    _write(cfg, "curve.csv", _csv_preamble(cfg) + curve.to_csv())
    _write(cfg, "summary.json", _dump(summary))
    _write_timing(cfg, elapsed)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    strat_a, strat_b = cfg.strategies()
    t0 = time.perf_counter()
    report = run_trials(cfg.n, strat_a, strat_b, cfg.noise_model(), cfg.alpha_dist(),
                        cfg.trials, cfg.seed, cfg.deadline)
    elapsed = time.perf_counter() - t0
    if cfg.format == "csv":
        _write(cfg, "report.csv", _csv_preamble(cfg) + report.to_csv())
    else:
        _write(cfg, "report.json", _dump({**report.to_json(), **_header(cfg)}))
    if cfg.persist:
        out = run_single(cfg.n, strat_a, strat_b, cfg.noise_model(), cfg.alpha_dist(),
                         cfg.seed, 0, cfg.deadline)
        base = Path(cfg.persist)
        base.mkdir(parents=True, exist_ok=True)
        wire.save_session(base / "session.bin", out.session)
        for claim, name in zip(out.claims, ("claim_a.bin", "claim_b.bin")):
            wire.save_message(base / name, wire.BindClaim(out.session.session_id, claim))
        wire.save_message(base / "verdict.bin", wire.VerdictNotice(out.session.session_id, out.verdict))
        (base / "alpha.json").write_text(_dump({"alpha": out.alpha}), encoding="utf-8")
    _write_timing(cfg, elapsed)
    return EXIT_OK


def cmd_scaling(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    rows = []
    if cfg.points is not None:
        rows = [{"N": int(n), "m_star": None, "sup": float(v)} for n, v in cfg.points]
    else:
        for n in cfg.ns:
            curve = fairness_curve(n, cfg.alpha_dist(), cfg.split_model(), cfg.quad_tol)
            m, v = curve.sup
            rows.append({"N": n, "m_star": m, "sup": v})
    try:
        fit = scaling_fit([(r["N"], r["sup"]) for r in rows])
    except ValueError as exc:
        raise ConfigError("points" if cfg.points is not None else "ns", str(exc)) from None
    elapsed = time.perf_counter() - t0
    if cfg.format == "csv":
        lines = ["N,log_N,m_star,sup,log_sup"]
        for r in rows:
            m = "" if r["m_star"] is None else r["m_star"]
            lines.append(f"{r['N']},{math.log(r['N'])!r},{m},{r['sup']!r},{math.log(r['sup'])!r}")
        _write(cfg, "scaling.csv", _csv_preamble(cfg) + "\n".join(lines) + "\n")
    _write(cfg, "scaling.json", _dump({**_header(cfg), "points": rows, "slope": fit.slope,
                                        "intercept": fit.intercept,
                                        "residual_norm": fit.residual_norm}))
    _write_timing(cfg, elapsed)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    with thresholds.perturbed_reject_threshold(cfg.perturb_threshold):
        checked, worst, failures = oracle_suite()
        table = validate_against_analysis(trials=cfg.trials, seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    ok = not failures and table.passed()
    summary = {**_header(cfg),
               "oracle": {"checked": checked, "worst_relative_error": worst,
                          "failures": failures[:20], "n_failures": len(failures),
                          "passed": not failures},
               "cross_validation": {"cells": len(table.cells), "pass_fraction": table.pass_fraction,
                                    "passed": table.passed(),
                                    "z_scores": [{"N": c.N, "m": c.m, "alpha": c.alpha, "z": c.z}
                                                 for c in table.cells]},
               "passed": ok}
    _write(cfg, "grid.csv", _csv_preamble(cfg) + table.to_csv())
    _write(cfg, "verify.json", _dump(summary))
    _write_timing(cfg, elapsed)
    print(f"oracle: {checked - len(failures)}/{checked} cases within {ORACLE_RTOL:g}; "
          f"cross-validation: {table.pass_fraction:.1%} of {len(table.cells)} cells within 4 sigma; "
          f"{'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_bind(cfg: ExperimentConfig) -> int:
    record = wire.load_session(cfg.session)
    claims = []
    for path, party in ((cfg.claim_a, Party.ALICE), (cfg.claim_b, Party.BOB)):
        msg = wire.load_message(path)
        if not isinstance(msg, wire.BindClaim) or msg.session_id != record.session_id:
            raise ConfigError("claim_a" if party is Party.ALICE else "claim_b",
                              f"{path} is not a claim for session {record.session_id}")
        claims.append(msg.claim)
    if cfg.alpha_point is not None:
        alpha = cfg.alpha_point
    else:
        alpha = cfg.alpha_dist().sample(np.random.default_rng(cfg.seed))
    try:
        verdict = binding_verdict(record, claims[0], claims[1], alpha, cfg.eta)
    except ValueError as exc:
        raise ConfigError("claims", str(exc)) from None
    notice = wire.VerdictNotice(record.session_id, verdict)
    doc = {**_header(cfg), "session_id": record.session_id, "alpha": alpha,
           "contract_valid": verdict.contract_valid, "cheater": verdict.cheater.name.lower(),
           "counts": list(verdict.counts), "frame_hex": wire.encode_message(notice).hex()}
    _write(cfg, "verdict.json", _dump(doc))
    if cfg.out is not None:
        wire.save_message(Path(cfg.out) / "verdict.bin", notice)
    return EXIT_OK


def cmd_serve(cfg: ExperimentConfig) -> int:
    service = TrentService(np.random.default_rng(cfg.seed), cfg.alpha_dist(), cfg.eta)
    with TrentServer((cfg.host, cfg.port), service) as server:
        host, port = server.server_address[:2]
        print(f"listening on {host}:{port}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "scaling": cmd_scaling,
            "verify": cmd_verify, "bind": cmd_bind, "serve": cmd_serve}


def _parse_points(text: str) -> list[list[float]]:
    out = []
    for item in text.split(","):
        n, _, v = item.partition(":")
        out.append([float(n), float(v)])
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcsign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qcsign {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", default=None, help="YAML settings file")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--out", default=S, help="output directory (stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv"), default=S)

    def alpha(p):
        p.add_argument("--alpha-lo", dest="alpha_lo", type=float, default=S)
        p.add_argument("--alpha-hi", dest="alpha_hi", type=float, default=S)
        p.add_argument("--alpha-point", dest="alpha_point", type=float, default=S)

    p = sub.add_parser("analyze", help="expected probability to cheat over m")
    common(p)
    alpha(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--split", choices=("binomial", "fixed"), default=S)
    p.add_argument("--quad-tol", dest="quad_tol", type=float, default=S)

    p = sub.add_parser("simulate", help="Monte Carlo protocol runs")
    common(p)
    alpha(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--noise", type=float, default=S, help="outcome flip probability")
    p.add_argument("--eta", type=float, default=S, help="tolerated wrong-result ratio")
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--strategy-a", dest="strategy_a", default=S)
    p.add_argument("--strategy-b", dest="strategy_b", default=S)
    p.add_argument("--deadline", type=int, default=S, help="round budget of the exchange")
    p.add_argument("--persist", default=S, help="directory for trial 0's session and claims")

    p = sub.add_parser("scaling", help="fit sup P_ch against N on a log-log scale")
    common(p)
    alpha(p)
    p.add_argument("--ns", type=lambda s: [int(x) for x in s.split(",")], default=S)
    p.add_argument("--split", choices=("binomial", "fixed"), default=S)
    p.add_argument("--quad-tol", dest="quad_tol", type=float, default=S)
    p.add_argument("--points", type=_parse_points, default=S, help="fit given N:value pairs")

    p = sub.add_parser("verify", help="oracle suite and Monte Carlo cross-validation")
    common(p)
    alpha(p)
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--perturb-threshold", dest="perturb_threshold", type=int, default=S,
                   help=S)

    p = sub.add_parser("serve", help="run Trent as a TCP service")
    common(p)
    alpha(p)
    p.add_argument("--eta", type=float, default=S)
    p.add_argument("--host", default=S)
    p.add_argument("--port", type=int, default=S)

    p = sub.add_parser("bind", help="Binding phase from persisted session and claims")
    common(p)
    alpha(p)
    p.add_argument("--session", default=S)
    p.add_argument("--claim-a", dest="claim_a", default=S)
    p.add_argument("--claim-b", dest="claim_b", default=S)
    p.add_argument("--eta", type=float, default=S)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    verbose = args.pop("verbose")
    config_path = args.pop("config", None)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = load_config_file(config_path, command) if config_path else {}
        cfg = resolve_config(command, file_values, args)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"qcsign: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, wire.DecodeError) as exc:
        print(f"qcsign: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"qcsign: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
