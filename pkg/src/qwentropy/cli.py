"""Command-line front end.

Every subcommand prints a report: a list of rows with a fixed column order,
as CSV (default) or as a JSON object that validates against
``schema/report.schema.json``. Rates are bits per readout unless
``--per-walk-step`` is given. Floats are printed with 9 digits after the
decimal point so equal inputs give byte-identical output.

Exit status: 0 success, 1 usage error, 2 computation error.

CSV columns
-----------
classical    w, estimator, rate_bits, err_bits
exact        w, mode, status, nodes, rate_bits
truncated    w, mode, budget, nodes, mu_unknown, lower_bits, upper_bits, rate_bits, err_bits
bound        w, estimator, rate_bits, err_bits
scan         w, estimator, rate_bits, err_bits[, error]
weak-limit   w, constant_bits, rate_bits
oracle       n, joint_entropy_bits, rate_bits
independent  w, k, entropy_bits
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from typing import Sequence

from . import __version__
from . import coin_graph, entropy, oracle, protocols, weak_limit
from .errors import ComputationError
from .walk_core import CoinOperator, CoinState, Cycle, Lattice, Line

log = logging.getLogger("qwentropy")

EXIT_OK, EXIT_USAGE, EXIT_COMPUTATION = 0, 1, 2
_NORM_TOL = 1e-9
_STOCHASTIC_ESTIMATORS = {"mc-bound", "cw-mc"}

COLUMNS = {
    "classical": ["w", "estimator", "rate_bits", "err_bits"],
    "exact": ["w", "mode", "status", "nodes", "rate_bits"],
    "truncated": ["w", "mode", "budget", "nodes", "mu_unknown", "lower_bits", "upper_bits", "rate_bits", "err_bits"],
    "bound": ["w", "estimator", "rate_bits", "err_bits"],
    "scan": ["w", "estimator", "rate_bits", "err_bits"],
    "weak-limit": ["w", "constant_bits", "rate_bits"],
    "oracle": ["n", "joint_entropy_bits", "rate_bits"],
    "independent": ["w", "k", "entropy_bits"],
}
# columns divided by w under --per-walk-step
_RATE_COLUMNS = {"rate_bits", "err_bits", "lower_bits", "upper_bits"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- parsing


def parse_complex(text: str) -> complex:
    """``re+imi`` syntax, e.g. ``0.6``, ``0.8i``, ``0.6-0.8i``."""
    t = text.strip().replace(" ", "")
    if not t:
        raise UsageError("empty complex number")
    try:
        return complex(t.replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


def format_complex(z: complex) -> str:
    z = complex(z.real + 0.0, z.imag + 0.0)  # drop signed zeros
    if z.imag == 0.0:
        return repr(z.real)
    return f"{z.real!r}{'+' if math.copysign(1.0, z.imag) > 0 else '-'}{abs(z.imag)!r}i"


def parse_coin(text: str) -> CoinOperator:
    """``hadamard``, ``E,F`` with complex entries, or ``angle:THETA[,PHI_E,PHI_F]``."""
    t = text.strip().lower()
    try:
        if t == "hadamard":
            return CoinOperator.hadamard()
        if t.startswith("angle:"):
            parts = [float(x) for x in t[6:].split(",")]
            if not 1 <= len(parts) <= 3:
                raise UsageError("angle form takes THETA[,PHI_E,PHI_F]")
            return CoinOperator.from_angle(*parts)
        parts = t.split(",")
        if len(parts) != 2:
            raise UsageError(f"cannot parse coin {text!r}")
        return CoinOperator(parse_complex(parts[0]), parse_complex(parts[1]))
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"invalid coin {text!r}: {exc}") from None


def format_coin(coin: CoinOperator) -> str:
    if coin == CoinOperator.hadamard():
        return "hadamard"
    return f"{format_complex(coin.e)},{format_complex(coin.f)}"


def parse_c0(text: str) -> CoinState:
    """``L``, ``R`` or a normalized pair ``l,r``."""
    t = text.strip()
    if t.upper() == "L":
        return CoinState.L()
    if t.upper() == "R":
        return CoinState.R()
    parts = t.split(",")
    if len(parts) != 2:
        raise UsageError(f"cannot parse initial coin {text!r}")
    l, r = parse_complex(parts[0]), parse_complex(parts[1])
    norm2 = abs(l) ** 2 + abs(r) ** 2
    if abs(norm2 - 1.0) > _NORM_TOL:
        raise UsageError(f"initial coin has |l|^2 + |r|^2 = {norm2!r}, expected 1")
    return CoinState.from_vector(l, r)


def format_c0(c: CoinState) -> str:
    if c == CoinState.L():
        return "L"
    if c == CoinState.R():
        return "R"
    return f"{format_complex(c.l)},{format_complex(c.r)}"


def parse_lattice(text: str) -> Lattice:
    """``line``, ``line:RADIUS`` or ``cycle:M``."""
    t = text.strip().lower()
    try:
        if t == "line":
            return Line()
        if t.startswith("line:"):
            return Line(int(t[5:]))
        if t.startswith("cycle:"):
            return Cycle(int(t[6:]))
    except ValueError as exc:
        raise UsageError(f"invalid lattice {text!r}: {exc}") from None
    raise UsageError(f"cannot parse lattice {text!r}")


def parse_range(text: str) -> list[int]:
    """``A:B`` (inclusive), ``A:B:STEP`` or a comma list."""
    t = text.strip()
    try:
        if ":" in t:
            parts = [int(x) for x in t.split(":")]
            if len(parts) not in (2, 3):
                raise UsageError(f"cannot parse range {text!r}")
            step = parts[2] if len(parts) == 3 else 1
            if step < 1:
                raise UsageError("range step must be >= 1")
            out = list(range(parts[0], parts[1] + 1, step))
        else:
            out = [int(x) for x in t.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}") from None
    if not out:
        raise UsageError(f"empty range {text!r}")
    return out


def format_range(ws: Sequence[int]) -> str:
    return ",".join(str(w) for w in ws)


@dataclass
class RunConfig:
    """Validated invocation; :meth:`to_argv` re-serializes it canonically."""

    subcommand: str
    coin: CoinOperator = field(default_factory=CoinOperator.hadamard)
    lattice: Lattice = field(default_factory=Line)
    c0: CoinState | None = None
    w: int | None = None
    ws: list[int] | None = None
    mode: str | None = None
    budget: int | None = None
    method: str | None = None
    estimators: list[str] | None = None
    iterations: int | None = None
    burn_in: int | None = None
    seed: int | None = None
    n: int | None = None
    k: int | None = None
    max_nodes: int | None = None
    jobs: int | None = None
    tree: bool = False
    per_walk_step: bool = False
    format: str = "csv"
    output: str | None = None

    def canonical(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "coin":
                v = format_coin(v)
            elif f.name == "lattice":
                v = v.describe()
            elif f.name == "c0":
                v = format_c0(v)
            out[f.name] = v
        return out

    def to_argv(self) -> list[str]:
        argv = [self.subcommand]
        flags = {
            "coin": "--coin", "lattice": "--lattice", "c0": "--c0", "w": "--w", "ws": "--w-range",
            "mode": "--mode", "budget": "--budget", "method": "--method", "estimators": "--estimators",
            "iterations": "--iterations", "burn_in": "--burn-in", "seed": "--seed", "n": "--n", "k": "--k",
            "max_nodes": "--max-nodes", "jobs": "--jobs", "format": "--format", "output": "--output",
        }
        for name, value in self.canonical().items():
            if name in ("subcommand", "tree", "per_walk_step"):
                continue
            if name == "ws":
                value = format_range(value)
            elif name == "estimators":
                value = ",".join(value)
            # the = form keeps values such as -0.6,0.8 from reading as flags
            argv.append(f"{flags[name]}={value}")
        if self.tree:
            argv.append("--tree")
        if self.per_walk_step:
            argv.append("--per-walk-step")
        return argv


def _common(p: argparse.ArgumentParser, coin=True, c0=False, lattice=False):
    if coin:
        p.add_argument("--coin", default="hadamard", help="hadamard | E,F (re+imi) | angle:THETA[,PHI_E,PHI_F]")
    if c0:
        p.add_argument("--c0", default="L", help="initial coin: L | R | l,r")
    if lattice:
        p.add_argument("--lattice", default="line", help="line | line:RADIUS | cycle:M")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", help="write the report here instead of standard output")
    p.add_argument("--per-walk-step", action="store_true", help="divide rates by w")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qwentropy", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"qwentropy {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("classical", help="classical walk rates (closed form, Gaussian, Monte Carlo)")
    _common(p, coin=False, lattice=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--w", type=int)
    g.add_argument("--w-range")
    p.add_argument("--method", choices=("exact", "gaussian", "mc"), default="exact")
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("exact", help="exact quantum rate of a closed coin transition system")
    _common(p, c0=True, lattice=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--mode", choices=(coin_graph.FULL, coin_graph.REDUCED), default=coin_graph.FULL)
    p.add_argument("--max-nodes", type=int, default=coin_graph.DEFAULT_MAX_NODES)

    p = sub.add_parser("truncated", help="rate interval from a budget-limited exploration")
    _common(p, c0=True, lattice=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--budget", type=int, required=True, help="deepest level that is expanded")
    p.add_argument("--max-nodes", type=int, default=coin_graph.DEFAULT_MAX_NODES)

    p = sub.add_parser("bound", help="coin-ignoring upper bound")
    _common(p, c0=True, lattice=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--method", choices=("exact", "mc"), default="exact")
    p.add_argument("--iterations", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int, default=protocols.DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("scan", help="estimators over a range of waiting times")
    _common(p, lattice=True)
    p.add_argument("--w-range", required=True)
    p.add_argument("--estimators", default="exact-bound", help=",".join(protocols.ESTIMATORS))
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=protocols.DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("weak-limit", help="large-w asymptote of the mixed-coin Hadamard bound")
    _common(p, coin=False)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--w", type=int)
    g.add_argument("--w-range")

    p = sub.add_parser("oracle", help="partial rates from exhaustive readout trees")
    _common(p, c0=True, lattice=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="tree depth")
    p.add_argument("--tree", action="store_true", help="emit the leaves of the depth-n tree (JSON only)")

    p = sub.add_parser("independent", help="readout entropy of fresh, never-measured walks")
    _common(p, c0=True, lattice=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="report k = 1 .. K")
    return parser


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Parse and validate ``argv``; raises :class:`UsageError`."""
    ns = build_parser().parse_args(list(argv))
    cfg = RunConfig(ns.subcommand, format=ns.format, output=ns.output, per_walk_step=ns.per_walk_step)
    if hasattr(ns, "coin"):
        cfg.coin = parse_coin(ns.coin)
    if hasattr(ns, "c0"):
        cfg.c0 = parse_c0(ns.c0)
    if hasattr(ns, "lattice"):
        cfg.lattice = parse_lattice(ns.lattice)
    for name in ("w", "mode", "budget", "method", "iterations", "burn_in", "seed", "n", "k", "max_nodes"):
        if getattr(ns, name, None) is not None:
            setattr(cfg, name, getattr(ns, name))
    if getattr(ns, "w_range", None):
        cfg.ws = parse_range(ns.w_range)
    if getattr(ns, "jobs", None) is not None:
        cfg.jobs = ns.jobs
    cfg.tree = bool(getattr(ns, "tree", False))
    if getattr(ns, "estimators", None):
        cfg.estimators = [e.strip() for e in ns.estimators.split(",") if e.strip()]
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    cmd = cfg.subcommand
    for name in ("w", "n", "k", "iterations", "jobs", "max_nodes"):
        v = getattr(cfg, name)
        if v is not None and v < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    if cfg.ws is not None and min(cfg.ws) < 1:
        raise UsageError("waiting times must be >= 1")
    if cfg.burn_in is not None and cfg.burn_in < 0:
        raise UsageError("--burn-in must be >= 0")
    if cfg.budget is not None and cfg.budget < 0:
        raise UsageError("--budget must be >= 0")
    if cmd == "classical":
        if cfg.method != "mc":
            cfg.iterations = None
        if cfg.method == "mc" and not isinstance(cfg.lattice, Cycle):
            raise UsageError("classical --method mc runs on a cycle; pass --lattice cycle:M")
    if cmd == "bound":
        if cfg.method != "mc":
            cfg.iterations = cfg.burn_in = None
    if cmd == "scan":
        unknown = set(cfg.estimators) - set(protocols.ESTIMATORS)
        if unknown:
            raise UsageError(f"unknown estimators: {', '.join(sorted(unknown))}")
        if not _STOCHASTIC_ESTIMATORS & set(cfg.estimators):
            cfg.iterations = cfg.burn_in = None
    stochastic = (
        (cmd in ("classical", "bound") and cfg.method == "mc")
        or (cmd == "scan" and _STOCHASTIC_ESTIMATORS & set(cfg.estimators))
    )
    if stochastic and cfg.seed is None:
        raise UsageError(f"{cmd}: stochastic estimators require --seed")
    if not stochastic:
        cfg.seed = None
    if cfg.tree and cfg.format != "json":
        raise UsageError("--tree requires --format json")
    if cmd == "weak-limit" and cfg.w is None and cfg.ws is None:
        cfg.w = 1


# ---------------------------------------------------------------- commands


def _classical(cfg: RunConfig):
    rows = []
    for w in cfg.ws or [cfg.w]:
        if cfg.method == "gaussian":
            rows.append({"w": w, "estimator": "cw-gaussian", "rate_bits": entropy.cw_entropy_rate_gaussian(w), "err_bits": None})
        elif cfg.method == "mc":
            est = entropy.cw_cycle_rate_mc(w, cfg.lattice.M, cfg.iterations, cfg.seed)
            rows.append({"w": w, "estimator": "cw-mc", "rate_bits": est.value, "err_bits": est.stderr})
        elif isinstance(cfg.lattice, Cycle):
            h = entropy.shannon_entropy(entropy.cw_shift_distribution(w, cfg.lattice.M))
            rows.append({"w": w, "estimator": "cw-exact", "rate_bits": h, "err_bits": None})
        else:
            rows.append({"w": w, "estimator": "cw-exact", "rate_bits": entropy.cw_entropy_rate(w), "err_bits": None})
    extra = {"limit_bits": entropy.cw_limit(cfg.lattice.M)} if isinstance(cfg.lattice, Cycle) else {}
    return rows, extra


def _exact(cfg: RunConfig):
    system = coin_graph.explore(cfg.coin, cfg.w, cfg.c0, cfg.mode, None, cfg.lattice, cfg.max_nodes)
    mu = coin_graph.stationary(system)
    rate = coin_graph.entropy_rate(system, mu)
    row = {"w": cfg.w, "mode": cfg.mode, "status": system.status, "nodes": system.size, "rate_bits": rate.value}
    extra = {
        "system": system.to_json(),
        "stationary": [float(x) for x in mu.weights],
        "stationary_residual": mu.residual,
    }
    return [row], extra


def _truncated(cfg: RunConfig):
    # truncation needs the merged LR node, which only exists in reduced mode
    mode = coin_graph.REDUCED
    system = coin_graph.explore(cfg.coin, cfg.w, cfg.c0, mode, cfg.budget, cfg.lattice, cfg.max_nodes)
    mu = coin_graph.stationary(system)
    h_min, h_max = coin_graph.extremal_entropies(cfg.coin, cfg.w, cfg.lattice)
    rate = coin_graph.entropy_rate(system, mu, (h_min, h_max))
    row = {
        "w": cfg.w, "mode": mode, "budget": cfg.budget, "nodes": system.size, "mu_unknown": rate.mu_unknown,
        "lower_bits": rate.lower, "upper_bits": rate.upper, "rate_bits": rate.value, "err_bits": rate.half_width,
    }
    return [row], {"status": system.status, "h_min_bits": h_min, "h_max_bits": h_max}


def _bound(cfg: RunConfig):
    if cfg.method == "mc":
        run = protocols.qw_bound_mc(cfg.coin, cfg.w, cfg.lattice, cfg.iterations, cfg.seed, cfg.c0, cfg.burn_in)
        row = {"w": cfg.w, "estimator": "mc-bound", "rate_bits": run.estimate, "err_bits": run.stderr}
        return [row], {"counts": {str(d): c for d, c in sorted(run.counts.items())}}
    value = protocols.qw_bound_exact(cfg.coin, cfg.w, cfg.lattice)
    return [{"w": cfg.w, "estimator": "exact-bound", "rate_bits": value, "err_bits": None}], {}


def _scan(cfg: RunConfig):
    rows = protocols.scan_w(
        cfg.coin, cfg.lattice, cfg.ws, cfg.estimators, cfg.seed or 0,
        cfg.iterations or 1, cfg.burn_in or 0, cfg.jobs or 1,
    )
    return [r.to_dict() for r in rows], {}


def _weak_limit(cfg: RunConfig):
    c = weak_limit.weak_limit_constant()
    return [{"w": w, "constant_bits": c, "rate_bits": weak_limit.closed_form(w)} for w in cfg.ws or [cfg.w]], {}


def _oracle(cfg: RunConfig):
    hs = oracle.tree_entropies(cfg.coin, cfg.w, cfg.c0, cfg.n, cfg.lattice)
    rows = [{"n": i + 1, "joint_entropy_bits": h, "rate_bits": h / (i + 1)} for i, h in enumerate(hs)]
    extra = {}
    if cfg.tree:
        extra["tree"] = oracle.joint_distribution(cfg.coin, cfg.w, cfg.c0, cfg.n, cfg.lattice).to_json()
    return rows, extra


def _independent(cfg: RunConfig):
    hs = protocols.independent_entropy_series(cfg.coin, cfg.w, cfg.k, cfg.lattice, cfg.c0)
    return [{"w": cfg.w, "k": k + 1, "entropy_bits": h} for k, h in enumerate(hs)], {}


COMMANDS = {
    "classical": _classical, "exact": _exact, "truncated": _truncated, "bound": _bound,
    "scan": _scan, "weak-limit": _weak_limit, "oracle": _oracle, "independent": _independent,
}


# ---------------------------------------------------------------- output


def fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return str(x)
    s = f"{x:.9f}"
    return "0.000000000" if s == "-0.000000000" else s


def _round(v):
    """Float with the printed precision, so JSON and CSV carry the same digits."""
    if isinstance(v, float):
        return float(fmt_float(v)) if math.isfinite(v) else None
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    return v


def _per_step(rows: list[dict]) -> list[dict]:
    out = []
    for row in rows:
        row = dict(row)
        w = row.get("w")
        for c in _RATE_COLUMNS & set(row):
            if row[c] is not None:
                row[c] = row[c] / w
        out.append(row)
    return out


def render_csv(cmd: str, rows: list[dict]) -> str:
    cols = list(COLUMNS[cmd])
    if any(r.get("error") for r in rows):
        cols.append("error")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow(["" if r.get(c) is None else fmt_float(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    return buf.getvalue()


def render_json(cfg: RunConfig, rows: list[dict], extra: dict) -> str:
    report = {
        "command": cfg.subcommand,
        "version": __version__,
        "config": cfg.canonical(),
        "units": "bits per walk step" if cfg.per_walk_step else "bits per readout",
        "columns": COLUMNS[cfg.subcommand],
        "rows": _round(rows),
    }
    report.update(_round(extra))
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _error_report(cmd: str | None, kind: str, message: str, details: dict | None = None) -> str:
    return json.dumps({"command": cmd, "error": {"type": kind, "message": message, "details": _round(details or {})}}, indent=2) + "\n"


def run(argv: Sequence[str] | None = None) -> int:
    """Execute one invocation and return its exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    want_json = "json" in argv and "--format" in argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        if want_json:
            sys.stdout.write(_error_report(None, "usage", str(exc)))
        print(f"qwentropy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("running %s", cfg.canonical())
    try:
        rows, extra = COMMANDS[cfg.subcommand](cfg)
    except ComputationError as exc:
        if cfg.format == "json":
            sys.stdout.write(json.dumps({"command": cfg.subcommand, "error": _round(exc.to_dict())}, indent=2) + "\n")
        print(f"qwentropy: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except ValueError as exc:
        # invalid inputs only detectable by the engine, e.g. a non-mixing coin
        if cfg.format == "json":
            sys.stdout.write(_error_report(cfg.subcommand, "usage", str(exc)))
        print(f"qwentropy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.per_walk_step:
        rows = _per_step(rows)
    text = render_json(cfg, rows, extra) if cfg.format == "json" else render_csv(cfg.subcommand, rows)
    _emit(text, cfg.output)
    if cfg.subcommand == "scan":
        failed = [r for r in rows if r.get("error")]
        for r in failed:
            log.warning("w=%s %s failed: %s", r["w"], r["estimator"], r["error"])
        if len(failed) == len(rows):
            return EXIT_COMPUTATION
    return EXIT_OK


def main() -> None:
    level = os.environ.get("QWENTROPY_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
