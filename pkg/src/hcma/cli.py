"""Command-line front end: ``hcma solve | sweep | lemma-tests | report``.

Exit codes: 0 success, 2 configuration or boundary-precondition error,
3 solver failure, 4 verification failure (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import BoundaryNotConvex, ConfigError, HcmaError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

log = logging.getLogger("hcma")

UNIT = "[dimensionless]"


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def atomic_write(path: Path, data: bytes | str):
    """Write to a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def solution_csv(state) -> str:
    dom = state.phi.domain
    coords = dom.coordinates()
    names = ["t"] + [f"x{k}" if k <= dom.n else f"y{k - dom.n}" for k in dom.spatial_axes]
    grids = np.meshgrid(*[np.ravel(coords[nm]) for nm in names], indexing="ij")
    cols = [g.ravel() for g in grids] + [state.phi.values.ravel()]
    header = [f"{nm} {UNIT}" for nm in names] + [f"phi {UNIT}"]
    return csv_text(header, zip(*cols))


def solution_binary(state) -> bytes:
    """Header line ``HCMA-GRID <ndim> <dims...>`` then little-endian float64 values, row-major."""
    v = state.phi.values
    head = ("HCMA-GRID %d %s\n" % (v.ndim, " ".join(str(s) for s in v.shape))).encode("ascii")
    return head + np.ascontiguousarray(v, dtype="<f8").tobytes()


def read_solution_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    head, body = raw.split(b"\n", 1)
    parts = head.decode("ascii").split()
    if parts[0] != "HCMA-GRID":
        raise ValueError("not an HCMA grid file")
    shape = tuple(int(s) for s in parts[2 : 2 + int(parts[1])])
    return np.frombuffer(body, dtype="<f8").reshape(shape)


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _say(args, msg):
    if not args.quiet:
        print(msg)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _load(args):
    from .config import load_config

    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else cfg.out_dir
    return cfg, out


def _extra_q_verdicts(report, state, cfg):
    """Interior versus boundary ``Q^[p]`` for every configured ``p`` beyond the first."""
    from .verify import slice_fields

    extra = {}
    for p in cfg.p_list[1:]:
        _, _, _, q = slice_fields(state.phi, cfg.S, p)
        axes = tuple(range(1, q.ndim))
        sq = q.max(axis=axes)
        inner, bnd = float(sq[1:-1].max()), float(max(sq[0], sq[-1]))
        extra[f"q{p}"] = {"interior_max_Q": inner, "boundary_max_Q": bnd, "passed": bool(inner <= bnd + report.q_tol)}
    return extra


def cmd_solve(args) -> int:
    from .solver import continuity_solve
    from .verify import convexity_preservation_check, metric_lower_bound_check, path_energy

    cfg, out = _load(args)
    bd = cfg.boundary()
    try:
        result = continuity_solve(cfg.domain, bd, cfg.solver, cfg.S, cfg.p_list[0])
    except BoundaryNotConvex as exc:
        print(f"error: boundary precondition failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HcmaError as exc:
        print(f"error: solver failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    state = result.state
    report = convexity_preservation_check(state, cfg.S, cfg.p_list[0], mu=cfg.mu)
    summary = report.summary()
    extra = _extra_q_verdicts(report, state, cfg)
    energy, speed = path_energy(state)
    summary.update(
        {
            "epsilon": state.epsilon,
            "residual_norm": state.residual_norm,
            "min_eig_A": state.min_eig_A,
            "newton_iters_last": state.newton_iters_used,
            "continuity_steps": len(result.trace) - 1,
            "sup_norm": float(np.max(np.abs(state.phi.values))),
            "energy": energy,
            "speed_oscillation": float(speed.max() - speed.min()),
            "other_p": extra,
            "grid": list(state.phi.domain.shape),
        }
    )
    passed = report.passed and all(e["passed"] for e in extra.values())
    if cfg.mu is not None:
        gap, ok = metric_lower_bound_check(state, cfg.mu, report.metric_tol)
        summary["metric_gap_at_mu"] = gap
        passed = passed and ok
    summary["passed"] = passed

    if "csv" in cfg.formats:
        atomic_write(out / "solution.csv", solution_csv(state))
    if "binary" in cfg.formats:
        atomic_write(out / "solution.bin", solution_binary(state))
    atomic_write(out / "report.json", _json(summary))
    atomic_write(
        out / "slices.csv",
        csv_text(
            [f"t {UNIT}", f"modulus {UNIT}", f"max_Q {UNIT}", f"min_metric_gap {UNIT}"],
            zip(report.t, report.slice_modulus, report.slice_max_Q, report.slice_min_gap),
        ),
    )
    atomic_write(
        out / "continuity.csv",
        csv_text(
            [f"sigma {UNIT}", f"residual {UNIT}", f"min_eig_A {UNIT}", f"boundary_max_Q {UNIT}", "newton_iters [count]"],
            [(s.sigma, s.residual_norm, s.min_eig_A, s.boundary_max_Q, s.newton_iters) for s in result.trace],
        ),
    )
    _say(args, _format_summary(summary))
    _say(args, f"outputs written to {out}")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_sweep(args) -> int:
    from .solver import epsilon_sweep
    from .verify import path_energy

    cfg, out = _load(args)
    bd = cfg.boundary()
    try:
        res = epsilon_sweep(cfg.domain, bd, cfg.epsilons, cfg.solver, cfg.S, cfg.p_list[0], reports=True)
    except BoundaryNotConvex as exc:
        print(f"error: boundary precondition failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HcmaError as exc:
        print(f"error: solver failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    rows = []
    for k, (eps, st, rep) in enumerate(zip(res.epsilons, res.states, res.reports)):
        energy, speed = path_energy(st)
        step = res.distances[k - 1] if k else float("nan")
        rows.append(
            (eps, float(np.max(np.abs(st.phi.values))), step, rep.interior_min_modulus, energy, float(speed.max() - speed.min()), rep.passed)
        )
    header = [
        f"epsilon {UNIT}",
        f"sup_norm {UNIT}",
        f"step_distance {UNIT}",
        f"min_modulus {UNIT}",
        f"energy {UNIT}",
        f"speed_oscillation {UNIT}",
        "verified [bool]",
    ]
    atomic_write(out / "sweep.csv", csv_text(header, rows))
    passed = all(r.passed for r in res.reports)
    if not args.quiet:
        print(" ".join(h.split()[0] for h in header))
        for r in rows:
            print(" ".join(_fmt(v) if not isinstance(v, float) else f"{v:.6g}" for v in r))
        print(f"outputs written to {out}")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_lemma_tests(args) -> int:
    from .suites import DEFAULT_COUNTS, run_all

    counts = None
    if args.count is not None:
        if args.count < 0:
            print("error: --count must be >= 0", file=sys.stderr)
            return EXIT_CONFIG
        counts = {k: args.count for k in DEFAULT_COUNTS}
    seed = args.seed if args.seed is not None else 0
    results = run_all(seed, counts)
    rows = [(r.name, r.cases, r.failures, r.worst, r.threshold, r.passed) for r in results]
    if args.out:
        atomic_write(
            Path(args.out) / "lemma_tests.csv",
            csv_text(["suite [name]", "cases [count]", "failures [count]", f"worst {UNIT}", f"threshold {UNIT}", "passed [bool]"], rows),
        )
    if not args.quiet:
        print(f"{'suite':32s} {'cases':>6s} {'fail':>5s} {'worst':>12s}  status")
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{r.name:32s} {r.cases:6d} {r.failures:5d} {r.worst:12.3e}  {status}")
    for r in results:
        if r.vacuous:
            print(f"warning: suite '{r.name}' ran 0 cases", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _format_summary(s: dict) -> str:
    lines = []
    for k in sorted(s):
        v = s[k]
        if isinstance(v, dict):
            continue
        lines.append(f"{k:24s} {v}")
    for k, v in sorted(s.get("verdicts", {}).items()):
        lines.append(f"{'verdict ' + k:40s} {'PASS' if v else 'FAIL'}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    out = Path(args.out) if args.out else None
    if out is None and args.config:
        from .config import load_config

        out = load_config(args.config).out_dir
    if out is None:
        print("error: --out or --config is required", file=sys.stderr)
        return EXIT_CONFIG
    path = out / "report.json"
    try:
        summary = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _say(args, _format_summary(summary))
    return EXIT_OK if summary.get("passed") else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (YAML)")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser = argparse.ArgumentParser(prog="hcma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="continuity solve plus all verification checks")
    sub.add_parser("sweep", parents=[common], help="epsilon sweep with convergence table")
    lt = sub.add_parser("lemma-tests", parents=[common], help="randomized matrix-identity suites")
    lt.add_argument("--count", type=int, default=None, help="instances per randomized suite")
    sub.add_parser("report", parents=[common], help="print a stored report")
    return parser


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "lemma-tests": cmd_lemma_tests, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
