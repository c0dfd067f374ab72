"""``sing`` command line: generate data, learn graphs, score them, run trial sweeps."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import DatasetSpec, NumericalBlowup, generate, read_samples, write_samples
from .graph import DimensionMismatch, UndirectedGraph, edge_errors
from .metrics import CI_METHOD, ErrorSeries, aggregate_csv, mean_ci
from .numerics import NotPositiveDefinite
from .structure import SingConfig, sing
from .transport import NoConvergence

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (NotPositiveDefinite, NoConvergence, NumericalBlowup, FloatingPointError, np.linalg.LinAlgError)

log = logging.getLogger("sing")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    sing: SingConfig
    trials: int
    output_dir: Path
    n_values: list[int] = field(default_factory=list)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        ds = obj["dataset"]
        params = dict(ds.get("parameters", {}))
        sc = obj.get("sing", {})
        cfg = SingConfig(
            degree=int(sc.get("beta", 1)),
            c=float(sc.get("c", 1.0)),
            tau0=float(sc.get("tau0", 0.0)),
            max_iterations=int(sc.get("max_iterations", 10)),
            quadrature_order=int(sc.get("quadrature_order", 32)),
            seed=int(sc.get("seed", 0)),
        )
        trials = int(obj.get("trials", 1))
        if trials < 1:
            raise ValueError("trials must be >= 1")
        n_values = [int(v) for v in obj.get("n_values", [params.get("n", 1000)])]
        return cls(DatasetSpec(ds["family"], params), cfg, trials, Path(obj.get("output_dir", ".")), n_values)


def _sing_config(a) -> SingConfig:
    return SingConfig(degree=a.beta, c=a.c, tau0=a.tau0, max_iterations=a.max_iter,
                      quadrature_order=a.quad_order, seed=a.seed)


def _write_matrix(path: Path, M) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows([[repr(float(x)) for x in row] for row in np.asarray(M)])


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_graph(path: Path) -> UndirectedGraph:
    if path.suffix == ".csv":
        return UndirectedGraph.from_adjacency(np.loadtxt(path, delimiter=",", ndmin=2) != 0)
    obj = json.loads(path.read_text())
    if "final_edges" in obj:
        obj = obj["final_edges"]
    elif "truth" in obj:
        obj = obj["truth"]
    if obj is None:
        raise UsageError(f"{path} has no graph")
    return UndirectedGraph.from_json(obj)


def cmd_generate(a) -> int:
    params = {"pairs": a.pairs, "d": a.d, "chain": a.chain, "s": a.s, "printed_sign": a.printed_sign}
    params = {k: v for k, v in params.items() if v is not None}
    n = a.n if a.n is not None else (3000 if a.family == "lorenz96" else 1000)
    X, truth, spec = generate(a.family, n, a.seed, a.stream, **params)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_samples(out / "samples.csv", X)
    _dump_json(out / "truth.json", None if truth is None else truth.to_json())
    _dump_json(out / "spec.json", spec.to_json())
    print(f"wrote {X.shape[0]}x{X.shape[1]} samples to {out / 'samples.csv'}")
    return EXIT_OK


def _write_report(report, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "report.json", report.to_json())
    _write_matrix(out / "adjacency.csv", report.final_edges.adjacency())
    for t, it in enumerate(report.iterations, start=1):
        s = it.score_original()
        _write_matrix(out / f"iter{t}_omega.csv", s.omega)
        _write_matrix(out / f"iter{t}_upsilon.csv", s.upsilon)
        _write_matrix(out / f"iter{t}_tau.csv", it.tau_original())


def cmd_sing(a) -> int:
    X = read_samples(a.data)
    report = sing(X, _sing_config(a))
    _write_report(report, Path(a.out))
    counts = " -> ".join(str(it.n_edges) for it in report.iterations)
    print(f"edges per iteration: {counts}; final {len(report.final_edges)} edges "
          f"({report.stopped_reason})")
    return EXIT_OK


def cmd_eval(a) -> int:
    truth, est = _load_graph(Path(a.truth)), _load_graph(Path(a.estimate))
    t1, t2 = edge_errors(truth, est)
    print(f"type1={t1} type2={t2}")
    if a.out:
        _dump_json(Path(a.out), {"type1": t1, "type2": t2})
    return EXIT_OK


def run_trials(cfg: ExperimentConfig) -> dict:
    """Run ``cfg.trials`` seeded repetitions per sample size and write summaries.

    Trial ``t`` draws its samples from stream ``t + 1`` of the configured seed.
    Per-trial rows are appended and flushed as they finish; failed trials are
    counted and excluded from the aggregates.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    params = {k: v for k, v in cfg.dataset.parameters.items() if k != "n"}
    rows, summary = [], {"ci_method": CI_METHOD, "level": 0.95, "config": cfg.sing.to_json(),
                         "family": cfg.dataset.family, "sizes": []}
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "trial", "type1", "type2", "edges", "seconds", "status"])
        for n in cfg.n_values:
            t1s, t2s, times, failures = [], [], [], 0
            for t in range(cfg.trials):
                start = time.perf_counter()
                try:
                    X, truth, _ = generate(cfg.dataset.family, n, cfg.sing.seed, t + 1, **params)
                    if truth is None:
                        raise UsageError(f"family {cfg.dataset.family} has no truth graph")
                    report = sing(X, cfg.sing)
                    e1, e2 = edge_errors(truth, report.final_edges)
                    status, n_edges = "ok", len(report.final_edges)
                except NUMERICAL_ERRORS as exc:
                    log.warning("n=%d trial %d failed: %s", n, t, exc)
                    failures += 1
                    e1 = e2 = n_edges = ""
                    status = f"failed: {type(exc).__name__}"
                secs = time.perf_counter() - start
                w.writerow([n, t, e1, e2, n_edges, f"{secs:.3f}", status])
                fh.flush()
                if status == "ok":
                    t1s.append(e1)
                    t2s.append(e2)
                    times.append(secs)
            entry = {"n": n, "trials": cfg.trials, "failures": failures, "type1": t1s, "type2": t2s,
                     "runtimes": times}
            if len(t1s) >= 2:
                s1, s2 = ErrorSeries(tuple(t1s), n), ErrorSeries(tuple(t2s), n)
                rows.append((n, s1, s2))
                (entry["mean_type1"], entry["ci_type1"]) = mean_ci(s1)
                (entry["mean_type2"], entry["ci_type2"]) = mean_ci(s2)
            elif t1s:
                entry["mean_type1"], entry["mean_type2"] = float(t1s[0]), float(t2s[0])
            summary["sizes"].append(entry)
    (out / "summary.csv").write_text(aggregate_csv(rows))
    _dump_json(out / "summary.json", summary)
    return summary


def cmd_trials(a) -> int:
    cfg = ExperimentConfig.from_json(json.loads(Path(a.config).read_text()))
    if a.out:
        cfg.output_dir = Path(a.out)
    if a.trials:
        cfg.trials = a.trials
    summary = run_trials(cfg)
    for e in summary["sizes"]:
        print(f"n={e['n']}: type1 {e.get('mean_type1', float('nan')):.3f}, "
              f"type2 {e.get('mean_type2', float('nan')):.3f}, failures {e['failures']}")
    return EXIT_OK


def _add_sing_flags(p) -> None:
    p.add_argument("--beta", type=int, default=1, help="total polynomial degree of the map")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--tau0", type=float, default=0.0)
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--quad-order", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sing", description="Graph learning with triangular transport maps.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="draw a synthetic dataset")
    g.add_argument("--family", required=True, choices=DatasetSpec.FAMILIES)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--pairs", type=int, help="butterfly pair count")
    g.add_argument("--chain", action="store_true", default=None, help="gaussian: chain precision")
    g.add_argument("--s", type=float, help="nonparanormal edge length scale")
    g.add_argument("--printed-sign", action="store_true", default=None, help="lorenz96: '+' advection term")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--stream", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sing", help="learn a graph from a samples CSV")
    s.add_argument("data")
    _add_sing_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sing)

    e = sub.add_parser("eval", help="type 1/2 errors of an estimate against a truth graph")
    e.add_argument("truth")
    e.add_argument("estimate")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("trials", help="repeated seeded runs from an experiment JSON")
    t.add_argument("config")
    t.add_argument("--trials", type=int)
    t.add_argument("--out")
    t.set_defaults(func=cmd_trials)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"sing: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, DimensionMismatch, ValueError, KeyError, OSError) as exc:
        print(f"sing: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
