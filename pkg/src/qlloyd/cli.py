"""Command-line front end.

Every subcommand reads a CSV data set (one vector per row), runs one
pipeline, and writes a JSON report that echoes the fully resolved
configuration. Identical configurations give byte-identical reports.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import adiabatic, classical, distance, qkmeans, stateprep
from .errors import QLloydError
from .statevector import HermitianOperator, Register, make_rng

OUTPUT_DIR_ENV = "QLLOYD_OUTPUT_DIR"
SUBCOMMANDS = ("distance", "classify", "seeds", "cluster-find", "qkmeans", "kmeans", "nonlinear", "queries")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    seed: int = 0
    mode: str = "exact"
    shots: int = 10_000
    k: int = 2
    r: int = 2
    q: int = 1
    kappa: float | None = None
    t: float | None = None
    tau: float | None = None
    steps: int | None = None
    interpolation: str | None = None
    d: int = 5
    delta: float = 1e-2
    max_iter: int = 20
    u_row: int = 0
    v_row: int = 1
    v_rows: str | None = None
    w_rows: str | None = None
    rows: str | None = None
    seeds: str | None = None
    operator: str = "swap"
    top: int = 10

    def validate(self) -> None:
        checks = [
            (self.subcommand in SUBCOMMANDS, f"unknown subcommand {self.subcommand!r}"),
            (self.mode in ("exact", "sampled"), "--mode must be 'exact' or 'sampled'"),
            (self.shots >= 1, "--shots must be >= 1"),
            (self.k >= 1, "--k must be >= 1"),
            (self.r >= 2, "--r must be >= 2"),
            (self.q >= 1, "--q must be >= 1"),
            (self.kappa is None or self.kappa >= 0, "--kappa must be >= 0"),
            (self.t is None or self.t > 0, "--t must be > 0"),
            (self.tau is None or self.tau > 0, "--tau must be > 0"),
            (self.steps is None or self.steps >= 1, "--steps must be >= 1"),
            (self.interpolation in (None, *adiabatic.INTERPOLATIONS), "--interpolation must be linear or smooth"),
            (self.d >= 1, "--d must be >= 1"),
            (self.delta > 0, "--delta must be > 0"),
            (self.max_iter >= 1, "--max-iter must be >= 1"),
            (self.top >= 1, "--top must be >= 1"),
            (0 <= self.seed < 2**64, "--seed must be a non-negative 64-bit integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise UsageError(msg)
        if self.input is None:
            raise UsageError("--input is required (a CSV file, one vector per row)")
        if not Path(self.input).is_file():
            raise UsageError(f"input file {self.input!r} does not exist")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_rows(spec: str | None, m: int, name: str) -> list[int]:
    """Parse '1-4' or '0,2,5' (inclusive ranges) into validated row indices."""
    if not spec:
        raise UsageError(f"{name} is required")
    rows: list[int] = []
    try:
        for part in spec.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                rows.extend(range(lo, hi + 1))
            else:
                rows.append(int(part))
    except ValueError:
        raise UsageError(f"{name}: cannot parse {spec!r}; use e.g. 1-4 or 0,2,5") from None
    bad = [r for r in rows if not 0 <= r < m]
    if bad or not rows:
        raise UsageError(f"{name}: rows {bad or spec} are outside 0..{m - 1}")
    return rows


def _check_row(row: int, m: int, name: str) -> int:
    if not 0 <= row < m:
        raise UsageError(f"{name}={row} is outside 0..{m - 1}")
    return row


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qlloyd", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    defaults = RunConfig("distance")

    def common(p):
        p.add_argument("--input", help="CSV file, one vector per row (optional header)")
        p.add_argument("--output", help=f"JSON report path (default: ${OUTPUT_DIR_ENV}/<subcommand>.json or stdout)")
        p.add_argument("--config", help="JSON file holding a RunConfig (e.g. the 'config' block of a report)")
        p.add_argument("--seed", type=int, help=f"rng seed (default {defaults.seed})")
        p.add_argument("--mode", choices=["exact", "sampled"], help="exact probabilities or finite shots")
        p.add_argument("--shots", type=int, help=f"measurement shots (default {defaults.shots})")

    def schedule(p):
        p.add_argument("--tau", type=float, help="total adiabatic time (default 200; qkmeans 300)")
        p.add_argument("--steps", type=int, help="piecewise-constant steps (default 2000; qkmeans 3000)")
        p.add_argument("--interpolation", choices=sorted(adiabatic.INTERPOLATIONS), help="s(t) ramp")

    p = sub.add_parser("distance", help="squared distance from one row to the mean of others")
    common(p)
    p.add_argument("--u-row", type=int)
    p.add_argument("--v-rows")
    p.add_argument("--t", type=float, help="evolution time for |phi> preparation (default 0.05/max norm)")

    p = sub.add_parser("classify", help="two-class nearest-mean assignment")
    common(p)
    p.add_argument("--u-row", type=int)
    p.add_argument("--v-rows")
    p.add_argument("--w-rows")

    p = sub.add_parser("seeds", help="adiabatic search for k well-spread seeds")
    common(p)
    schedule(p)
    p.add_argument("--k", type=int)
    p.add_argument("--top", type=int, help="number of ranked tuples to report")

    p = sub.add_parser("cluster-find", help="adiabatic search for r tightly clustered vectors")
    common(p)
    schedule(p)
    p.add_argument("--r", type=int)
    p.add_argument("--kappa", type=float, help="repeat-label penalty (default 10*max distance)")
    p.add_argument("--top", type=int)

    p = sub.add_parser("qkmeans", help="adiabatic quantum Lloyd's algorithm")
    common(p)
    schedule(p)
    p.add_argument("--k", type=int)
    p.add_argument("--seeds", help="seed rows, e.g. 0,4 (default: k-means++)")
    p.add_argument("--d", type=int, help="copies per iteration")
    p.add_argument("--delta", type=float, help="distance accuracy (noise size in sampled mode)")
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("kmeans", help="classical Lloyd's algorithm")
    common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--seeds")
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("nonlinear", help="q-copy expectation of a Hermitian operator")
    common(p)
    p.add_argument("--u-row", type=int)
    p.add_argument("--v-row", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--operator", help="'swap', 'identity', or a .npy file holding L")

    p = sub.add_parser("queries", help="memory reads charged by encoding rows")
    common(p)
    p.add_argument("--rows")
    return parser


def resolve_config(argv: list[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.subcommand is None:
        raise UsageError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --config: {exc}") from None
        base = base.get("config", base)
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(base) - fields
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    base["subcommand"] = args.subcommand
    for name, value in vars(args).items():
        if name in fields and value is not None and name != "subcommand":
            base[name] = value
    cfg = RunConfig(**base)
    cfg.validate()
    return cfg


SEARCH_SCHEDULE = adiabatic.Schedule(200.0, 2000, "linear")


def _schedule(cfg: RunConfig, default: adiabatic.Schedule) -> adiabatic.Schedule:
    """Fill unset schedule fields from the subcommand's default and record them."""
    cfg.tau = default.total_time if cfg.tau is None else cfg.tau
    cfg.steps = default.steps if cfg.steps is None else cfg.steps
    cfg.interpolation = default.interpolation if cfg.interpolation is None else cfg.interpolation
    return adiabatic.Schedule(cfg.tau, cfg.steps, cfg.interpolation)


def _run_distance(cfg, data, rng):
    u = _check_row(cfg.u_row, data.M, "--u-row")
    rows = parse_rows(cfg.v_rows, data.M, "--v-rows")
    ledger = stateprep.QueryLedger()
    vecs = data.vectors
    cluster = data.subset(rows)
    if cfg.mode == "sampled" and cfg.t is None:
        cfg.t = distance.default_time(float(np.linalg.norm(vecs[u])), cluster.norms)
    est = distance.distance_to_centroid(vecs[u], cluster, cfg.mode, cfg.shots, rng, ledger, cfg.t)
    return {
        "distance": est.to_dict(),
        "exact_distance": classical.exact_distance(vecs[u], vecs[rows].mean(axis=0)),
        "queries": stateprep.report_queries(ledger, data.M * data.N),
    }


def _run_classify(cfg, data, rng):
    u = _check_row(cfg.u_row, data.M, "--u-row")
    v_rows = parse_rows(cfg.v_rows, data.M, "--v-rows")
    w_rows = parse_rows(cfg.w_rows, data.M, "--w-rows")
    ledger = stateprep.QueryLedger()
    vecs = data.vectors
    res = distance.assign_two_class(vecs[u], data.subset(v_rows), data.subset(w_rows), cfg.mode, cfg.shots, rng, ledger)
    return {
        "class": res.label,
        "tie": res.tie,
        "distance_v": res.distance_v.to_dict(),
        "distance_w": res.distance_w.to_dict(),
        "queries": stateprep.report_queries(ledger, data.M * data.N),
    }


def _ranked(ranked, top):
    return [{"tuple": list(t), "count": c, "frequency": f} for t, c, f in ranked[:top]]


def _adiabatic_report(cfg, problem, rng, out_path, optimum):
    run = adiabatic.run_adiabatic(problem, _schedule(cfg, SEARCH_SCHEDULE))
    ranked = adiabatic.sample_solution(run.final, cfg.shots, rng)
    orbit, value = optimum
    report = {
        "solutions": _ranked(ranked, cfg.top),
        "ground_probability": adiabatic.ground_space_probability(run.final, problem.hf),
        "min_gap": run.trace.min_gap,
        "min_gap_s": run.trace.argmin_s,
        "brute_force": {"optimal_tuples": sorted(list(t) for t in orbit), "value": value},
        "top_is_optimal": bool(ranked and ranked[0][0] in orbit),
    }
    if out_path is not None:
        gap_path = out_path.with_suffix(".gap.csv")
        run.trace.to_csv(gap_path)
        report["gap_trace_csv"] = gap_path.name
    return report


def _run_seeds(cfg, data, rng, out_path):
    D = adiabatic.DistanceMatrix.from_vectors(data.vectors)
    problem = adiabatic.seed_problem(D, cfg.k)
    return _adiabatic_report(cfg, problem, rng, out_path, classical.brute_force_seed_set(D, cfg.k))


def _run_cluster_find(cfg, data, rng, out_path):
    D = adiabatic.DistanceMatrix.from_vectors(data.vectors)
    if cfg.kappa is None:
        cfg.kappa = adiabatic.default_kappa(D)
    problem = adiabatic.clusterfind_problem(D, cfg.r, cfg.kappa)
    return _adiabatic_report(cfg, problem, rng, out_path, classical.brute_force_cluster_set(D, cfg.r, cfg.kappa))


def _seed_rows(cfg, data):
    if cfg.seeds is None:
        return None
    rows = parse_rows(cfg.seeds, data.M, "--seeds")
    if len(rows) != cfg.k or len(set(rows)) != len(rows):
        raise UsageError(f"--seeds must list {cfg.k} distinct rows")
    return rows


def _run_qkmeans(cfg, data, rng, out_path):
    budget = qkmeans.CopyBudget(cfg.d, cfg.delta)
    res = qkmeans.run_qkmeans(
        data, cfg.k, _seed_rows(cfg, data), budget, _schedule(cfg, qkmeans.DEFAULT_SCHEDULE), cfg.max_iter, cfg.shots, rng,
        "noisy" if cfg.mode == "sampled" else "exact",
    )
    report = res.report()
    report.update({
        "seeds": res.seeds,
        "leakage": res.final.leakage,
        "copy_regime_ok": budget.usable,
        "history": [
            {"iteration": r.iteration, "assignments": [int(a) for a in r.assignments],
             "wcss": r.wcss, "fidelity_with_previous": r.fidelity, "leakage": r.leakage}
            for r in res.history
        ],
    })
    if out_path is not None:
        gap_path = out_path.with_suffix(".gap.csv")
        res.final.trace.to_csv(gap_path)
        report["gap_trace_csv"] = gap_path.name
    return report


def _run_kmeans(cfg, data, rng):
    seeds = _seed_rows(cfg, data) or classical.kmeanspp_seeds(data.vectors, cfg.k, rng)
    res = classical.kmeans_lloyd(data.vectors, cfg.k, seeds, cfg.max_iter)
    return {
        "seeds": [int(s) for s in seeds],
        "iterations": res.iterations,
        "assignments": [int(c) for c in res.assignment.clusters],
        "wcss": res.assignment.wcss,
        "wcss_history": res.wcss_history,
        "converged": res.converged,
    }


def _load_operator(spec: str, dim: int) -> HermitianOperator:
    reg = (Register("L", dim),)
    if spec == "identity":
        return HermitianOperator.from_diagonal(reg, np.ones(dim))
    if spec == "swap":
        raise AssertionError("handled by caller")
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"--operator must be 'swap', 'identity' or an existing .npy file, got {spec!r}")
    return HermitianOperator.from_matrix(reg, np.load(path))


def _run_nonlinear(cfg, data, rng):
    u = _check_row(cfg.u_row, data.M, "--u-row")
    v = _check_row(cfg.v_row, data.M, "--v-row")
    n = data.N
    dim = (n * n) ** cfg.q
    if cfg.operator == "swap":
        swap = distance.swap_operator(n)
        mat = np.ones((1, 1))
        for _ in range(cfg.q):
            mat = np.kron(mat, swap)
        op = HermitianOperator.from_matrix((Register("L", dim),), mat)
    else:
        op = _load_operator(cfg.operator, dim)
    spec = distance.NonlinearMetricSpec(cfg.q, op)
    vecs = data.vectors
    est = distance.nonlinear_expectation(vecs[u], vecs[v], spec, cfg.mode, cfg.shots, rng)
    return {"expectation": est.to_dict()}


def _run_queries(cfg, data, rng):
    rows = parse_rows(cfg.rows if cfg.rows is not None else f"0-{data.M - 1}", data.M, "--rows")
    ledger = stateprep.QueryLedger()
    for j in rows:
        stateprep.encode_vector(data, j, ledger)
    return {"encoded_rows": rows, "per_encode": stateprep.encode_charge(data.n_qubits),
            "queries": stateprep.report_queries(ledger, data.M * data.N)}


def _output_path(cfg: RunConfig) -> Path | None:
    if not cfg.output:
        out_dir = os.environ.get(OUTPUT_DIR_ENV)
        if not out_dir:
            return None
        cfg.output = str(Path(out_dir) / f"{cfg.subcommand}.json")
    path = Path(cfg.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run(cfg: RunConfig) -> dict:
    data = stateprep.load_csv(cfg.input)
    rng = make_rng(cfg.seed)
    out_path = _output_path(cfg)
    handlers = {
        "distance": lambda: _run_distance(cfg, data, rng),
        "classify": lambda: _run_classify(cfg, data, rng),
        "seeds": lambda: _run_seeds(cfg, data, rng, out_path),
        "cluster-find": lambda: _run_cluster_find(cfg, data, rng, out_path),
        "qkmeans": lambda: _run_qkmeans(cfg, data, rng, out_path),
        "kmeans": lambda: _run_kmeans(cfg, data, rng),
        "nonlinear": lambda: _run_nonlinear(cfg, data, rng),
        "queries": lambda: _run_queries(cfg, data, rng),
    }
    report = handlers[cfg.subcommand]()
    report["config"] = dataclasses.asdict(cfg)
    return _jsonable(report)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        report = run(cfg)
    except UsageError as exc:
        print(f"qlloyd: usage error: {exc}", file=sys.stderr)
        return 1
    except (QLloydError, ValueError, OSError) as exc:
        print(f"qlloyd: error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
