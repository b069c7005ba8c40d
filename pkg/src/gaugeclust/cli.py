"""Command-line front end.

Subcommands: ``gen`` (synthetic datasets), ``fit`` (one deletion-loop fit),
``path`` (warm-started parameter sweep), ``grid`` (independent cell sweep),
``verify`` (built-in correctness suites and trace audits), ``eval`` (metrics
from a stored fit).  Exit codes: 0 success, 1 verification or solve failure,
2 usage or I/O error.
"""

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import click
import numpy as np

from .data import GENERATORS, ari, generate, load_csv, save_csv, standardize
from .gauges import GaugeError, make_gauge
from .ldca import (
    PathSchedule,
    kmeanspp_init,
    ldca_k,
    modal_k,
    path_records_to_csv,
    run_path,
)
from .model import DataSet, center_spread, objective
from .solvers import SolverConfig, SolverError, SolverTrace, dca_solve
from .verify import (
    brute_force_global,
    check_center_optimality,
    descent_audit,
    value_stability_probe,
)

__all__ = ["main", "RunConfig", "SPREAD_BIN_EDGES"]

#: center-spread bin edges used by the eval report
SPREAD_BIN_EDGES = (0.01, 1.0, 2.0, 5.0, 10.0, 25.0)


@dataclass
class RunConfig:
    """Shared knobs of the fitting subcommands."""

    gauge: str = "l2"
    lam: float = 0.3
    mu: float = 0.05
    k0: int = 10
    algo: str = "dca"
    tol: float = 1e-6
    max_iter: int = 500
    seed: int = 0

    def solver_config(self):
        return SolverConfig(tol=self.tol, max_iter=self.max_iter)


def _fail_usage(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        _fail_usage(f"cannot write {path}: {exc}")


def _json_dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_dataset(path, has_labels, do_standardize):
    try:
        data = load_csv(path, has_labels=has_labels)
    except (OSError, ValueError) as exc:
        _fail_usage(str(exc))
    if do_standardize:
        data = standardize(data)
    return data


def _make_gauge_or_die(spec, dim):
    try:
        return make_gauge(spec, dim)
    except (GaugeError, ValueError, OSError) as exc:
        _fail_usage(f"bad gauge spec {spec!r}: {exc}")


def _trace_dict(trace):
    return {"f_init": trace.f_init, "records": trace.records()}


def _size_stats(labels):
    sizes = np.bincount(np.asarray(labels))
    sizes = sizes[sizes > 0]
    return {
        "size_min": int(sizes.min()),
        "size_max": int(sizes.max()),
        "size_mean": float(sizes.mean()),
        "size_std": float(sizes.std()),
    }


def _spread_bin(spread):
    """Label the half-open bin of the fixed edge sequence containing spread."""
    edges = SPREAD_BIN_EDGES
    if spread < edges[0]:
        return f"<{edges[0]:g}"
    for lo, hi in zip(edges, edges[1:]):
        if spread < hi:
            return f"[{lo:g},{hi:g})"
    return f">={edges[-1]:g}"


_run_config_options = [
    click.option("--gauge", default="l2", show_default=True, help="Gauge spec: l1 | l2 | linf | wl2:w1,w2,... | poly:<vertices.csv>."),
    click.option("--lam", default=0.3, show_default=True, type=float, help="Fusion weight."),
    click.option("--mu", default=0.05, show_default=True, type=float, help="Smoothing parameter."),
    click.option("--k0", default=10, show_default=True, type=int, help="Initial prototype count."),
    click.option("--algo", default="dca", show_default=True, type=click.Choice(["dca", "bdca", "midca"]), help="Inner solver."),
    click.option("--tol", default=1e-6, show_default=True, type=float, help="Inner step-norm tolerance."),
    click.option("--max-iter", default=500, show_default=True, type=int, help="Inner iteration cap."),
    click.option("--seed", default=0, show_default=True, type=int, help="Seed for prototype initialization."),
]


def _with_run_config(func):
    for option in reversed(_run_config_options):
        func = option(func)
    return func


@click.group()
def main():
    """Gauge-distance clustering with a fusion penalty."""


@main.command()
@click.argument("name", type=click.Choice(sorted(GENERATORS)))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def gen(name, seed, out):
    """Write a labeled synthetic dataset as CSV."""
    data = generate(name, seed)
    try:
        save_csv(data, out)
    except OSError as exc:
        _fail_usage(f"cannot write {out}: {exc}")
    click.echo(f"wrote {data.n} rows to {out}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--has-labels", is_flag=True, help="Treat the last input column as labels.")
@click.option("--standardize", "do_standardize", is_flag=True, help="Standardize columns before fitting.")
@click.option("--restarts", default=1, show_default=True, type=int, help="Independent seeded restarts; the best objective wins.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON result here instead of stdout.")
@_with_run_config
def fit(input_path, has_labels, do_standardize, restarts, out, **cfg_kwargs):
    """Run one deletion-loop fit and emit a JSON result."""
    cfg = RunConfig(**cfg_kwargs)
    data = _load_dataset(input_path, has_labels, do_standardize)
    gauge = _make_gauge_or_die(cfg.gauge, data.dim)
    if restarts < 1:
        _fail_usage("--restarts must be at least 1")
    best = None
    best_val = np.inf
    try:
        for r in range(restarts):
            res = ldca_k(
                data, cfg.k0, cfg.lam, cfg.mu, gauge,
                cfg.solver_config(), inner=cfg.algo, seed=cfg.seed + r,
            )
            val = objective(data, res.prototypes, cfg.lam, gauge)
            if val < best_val:
                best, best_val = res, val
    except SolverError as exc:
        click.echo(_json_dumps({"error": str(exc), "converged": False}), nl=False)
        sys.exit(1)
    audits = [descent_audit(t, data.n, cfg.mu) for t in best.traces] if cfg.algo == "dca" else []
    payload = {
        "k_eff": best.k_eff,
        "objective": best_val,
        "prototypes": best.prototypes.tolist(),
        "labels": best.labels.tolist(),
        "converged": best.converged,
        "deletion_rounds": best.deletion_rounds,
        "traces": [_trace_dict(t) for t in best.traces],
        "descent_audit": [json.loads(a.to_json()) for a in audits],
        "params": {
            "gauge": cfg.gauge, "lambda": cfg.lam, "mu": cfg.mu,
            "k0": cfg.k0, "algo": cfg.algo, "seed": cfg.seed,
            "restarts": restarts, "standardize": do_standardize,
        },
    }
    if data.labels is not None:
        payload["ari"] = ari(data.labels, best.labels)
    text = _json_dumps(payload)
    if out:
        _write_text(out, text)
    else:
        click.echo(text, nl=False)
    if any(not a.passed for a in audits):
        sys.exit(1)


def _schedule_options(func):
    for option in reversed(
        [
            click.option("--steps", default=100, show_default=True, type=int, help="Number of schedule steps."),
            click.option("--lam-lo", default=1e-2, show_default=True, type=float),
            click.option("--lam-hi", default=2.0, show_default=True, type=float),
            click.option("--mu-hi", default=2.0, show_default=True, type=float),
            click.option("--mu-lo", default=1e-4, show_default=True, type=float),
        ]
    ):
        func = option(func)
    return func


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--has-labels", is_flag=True)
@click.option("--standardize", "do_standardize", is_flag=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Path-record CSV output.")
@click.option("--plot-data", type=click.Path(dir_okay=False), help="Also write a step,k_eff CSV for plotting.")
@_schedule_options
@_with_run_config
def path(input_path, has_labels, do_standardize, out, plot_data, steps, lam_lo, lam_hi, mu_hi, mu_lo, **cfg_kwargs):
    """Sweep the warm-started (fusion, smoothing) schedule and write records."""
    cfg = RunConfig(**cfg_kwargs)
    data = _load_dataset(input_path, has_labels, do_standardize)
    gauge = _make_gauge_or_die(cfg.gauge, data.dim)
    try:
        schedule = PathSchedule(
            np.geomspace(lam_lo, lam_hi, steps), np.geomspace(mu_hi, mu_lo, steps)
        )
    except ValueError as exc:
        _fail_usage(str(exc))
    records = run_path(
        data, schedule, k0=cfg.k0, gauge=gauge, cfg=cfg.solver_config(),
        seed=cfg.seed, inner=cfg.algo,
    )
    _write_text(out, path_records_to_csv(records))
    if plot_data:
        lines = ["step,k_eff"] + [f"{r.step},{r.k_eff}" for r in records]
        _write_text(plot_data, "\n".join(lines) + "\n")
    ok = sum(not r.failed for r in records)
    click.echo(f"{ok}/{len(records)} steps succeeded; modal k_eff = {modal_k(r.k_eff for r in records)}")
    if ok < 0.9 * len(records):
        sys.exit(1)


def _grid_cell(args):
    """One independent (lambda, mu) cell; top level so it pickles."""
    points, labels, k0, lam, mu, gauge, cfg, inner, seed = args
    data = DataSet(points, labels)
    try:
        res = ldca_k(data, k0, lam, mu, gauge, cfg, inner=inner, seed=seed)
    except SolverError:
        return {"lambda": lam, "mu": mu, "k_eff": -1, "ari": "", "converged": False}
    cell_ari = "" if labels is None else ari(labels, res.labels)
    return {
        "lambda": lam, "mu": mu, "k_eff": res.k_eff,
        "ari": cell_ari, "converged": res.converged,
    }


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--has-labels", is_flag=True)
@click.option("--standardize", "do_standardize", is_flag=True)
@click.option("--grid-size", default=20, show_default=True, type=int, help="Cells per axis.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_schedule_options
@_with_run_config
def grid(input_path, has_labels, do_standardize, grid_size, out, steps, lam_lo, lam_hi, mu_hi, mu_lo, **cfg_kwargs):
    """Sweep an independent (no warm start) lambda-mu grid of fresh fits.

    The worker pool size is capped by the GAUGE_CLUSTER_THREADS environment
    variable; cells are deterministic and written in row-major order.
    """
    del steps  # the grid is square; --grid-size controls its resolution
    cfg = RunConfig(**cfg_kwargs)
    data = _load_dataset(input_path, has_labels, do_standardize)
    gauge = _make_gauge_or_die(cfg.gauge, data.dim)
    lams = np.geomspace(lam_lo, lam_hi, grid_size)
    mus = np.geomspace(mu_hi, mu_lo, grid_size)
    tasks = [
        (data.points, data.labels, cfg.k0, float(lam), float(mu), gauge,
         cfg.solver_config(), cfg.algo, cfg.seed)
        for lam in lams
        for mu in mus
    ]
    workers = os.cpu_count() or 1
    cap = os.environ.get("GAUGE_CLUSTER_THREADS")
    if cap is not None:
        try:
            workers = max(1, min(workers, int(cap)))
        except ValueError:
            _fail_usage(f"GAUGE_CLUSTER_THREADS must be an integer, got {cap!r}")
    if workers == 1:
        rows = [_grid_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_cell, tasks, chunksize=4))
    lines = ["lambda,mu,k_eff,ari,converged"]
    lines += [f"{r['lambda']!r},{r['mu']!r},{r['k_eff']},{r['ari']},{r['converged']}" for r in rows]
    _write_text(out, "\n".join(lines) + "\n")
    counts = np.bincount([r["k_eff"] for r in rows if r["k_eff"] > 0])
    summary = {int(k): int(c) for k, c in enumerate(counts) if c}
    click.echo(f"{len(rows)} cells; k_eff histogram {summary}")


def _suite_oracle(checks):
    a = DataSet(np.array([[0.0], [1.0]]))
    gauge = make_gauge("l1", 1)
    value, centers = brute_force_global(a, 3, 1.0, gauge)
    gaps = np.diff(np.sort(centers))
    checks.append(
        {
            "name": "three-center absolute-gauge oracle",
            "value": value,
            "centers": centers.tolist(),
            "passed": bool(abs(value - 5.0 / 6.0) <= 1e-4 and np.all(np.abs(gaps - 1.0 / 6.0) <= 1e-3)),
        }
    )


def _suite_optimality(checks):
    a = DataSet(np.array([[0.0], [2.0]]))
    gauge = make_gauge("l1", 1)
    report = check_center_optimality(a, np.array([[0.0], [2.0]]), 0.5, gauge)
    # both centers of this instance are improvable; the checker must say so
    detected = report.applicable and all(not c.passed for c in report.checks)
    checks.append(
        {
            "name": "non-optimal pair detected by the center check",
            "report": json.loads(report.to_json()),
            "passed": bool(detected),
        }
    )


def _suite_stability(checks):
    gauge = make_gauge("l1", 1)
    rng = np.random.default_rng(7)
    worst = 0.0
    ok = True
    for _ in range(5):
        pts = rng.normal(size=(4, 1))
        a = DataSet(pts)
        b = DataSet(pts + 0.05 * rng.normal(size=pts.shape))
        lhs, rhs, passed = value_stability_probe(a, b, 2, 0.5, gauge)
        ok = ok and passed
        worst = max(worst, lhs - rhs)
    checks.append(
        {"name": "optimal-value stability bound", "worst_excess": worst, "passed": bool(ok)}
    )


def _suite_descent(checks):
    rng = np.random.default_rng(11)
    data = DataSet(rng.normal(size=(30, 2)))
    gauge = make_gauge("l2", 2)
    x0 = kmeanspp_init(data, 4, gauge, seed=0)
    _, trace = dca_solve(data, x0, 0.2, 0.1, gauge)
    audit = descent_audit(trace, data.n, 0.1)
    checks.append(
        {
            "name": "per-iteration descent inequality",
            "audit": json.loads(audit.to_json()),
            "passed": bool(audit.passed),
        }
    )


_SUITES = {
    "oracle": _suite_oracle,
    "optimality": _suite_optimality,
    "stability": _suite_stability,
    "descent": _suite_descent,
}


@main.command()
@click.option("--suite", default="all", show_default=True, type=click.Choice(["all", *sorted(_SUITES)]))
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False), help="Audit a stored solver trace instead of running suites.")
@click.option("--n", "n_points", type=int, help="Dataset size the trace was produced with.")
@click.option("--mu", type=float, help="Smoothing parameter the trace was produced with.")
@click.option("--out", type=click.Path(dir_okay=False))
def verify(suite, trace_path, n_points, mu, out):
    """Run built-in correctness suites, or audit a stored trace."""
    checks = []
    if trace_path:
        if n_points is None or mu is None:
            _fail_usage("--trace requires --n and --mu")
        try:
            with open(trace_path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            _fail_usage(f"cannot read trace {trace_path}: {exc}")
        records = raw.get("records", raw) if isinstance(raw, dict) else raw
        trace = SolverTrace(f_init=raw.get("f_init") if isinstance(raw, dict) else None)
        try:
            for rec in records:
                trace.append(rec["f_mu"], rec["step_norm"], rec.get("descent_slack", 0.0))
        except (KeyError, TypeError) as exc:
            _fail_usage(f"malformed trace {trace_path}: {exc}")
        audit = descent_audit(trace, n_points, mu)
        checks.append(
            {"name": "stored-trace descent audit", "audit": json.loads(audit.to_json()), "passed": bool(audit.passed)}
        )
    else:
        for name in _SUITES if suite == "all" else [suite]:
            _SUITES[name](checks)
    passed = all(c["passed"] for c in checks)
    report = {"passed": passed, "checks": checks}
    text = _json_dumps(report)
    if out:
        _write_text(out, text)
    else:
        click.echo(text, nl=False)
    if not passed:
        failing = next(c["name"] for c in checks if not c["passed"])
        click.echo(f"failed: {failing}", err=True)
        sys.exit(1)


@main.command("eval")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON output of the fit subcommand.")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Labeled dataset CSV.")
@click.option("--out", type=click.Path(dir_okay=False))
def eval_cmd(fit_path, input_path, out):
    """Score a stored fit against a labeled dataset."""
    try:
        with open(fit_path) as fh:
            stored = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail_usage(f"cannot read fit output {fit_path}: {exc}")
    data = _load_dataset(input_path, has_labels=True, do_standardize=False)
    try:
        labels = np.asarray(stored["labels"], dtype=int)
        prototypes = np.asarray(stored["prototypes"], dtype=float)
        k_eff = int(stored["k_eff"])
    except (KeyError, TypeError, ValueError) as exc:
        _fail_usage(f"malformed fit output {fit_path}: {exc}")
    if labels.shape[0] != data.n:
        _fail_usage(
            f"fit output has {labels.shape[0]} labels but the dataset has {data.n} rows"
        )
    spread = center_spread(prototypes)
    payload = {
        "ari": ari(data.labels, labels),
        "k_eff": k_eff,
        "center_spread": spread,
        "spread_bin": _spread_bin(spread),
        **_size_stats(labels),
    }
    text = _json_dumps(payload)
    if out:
        _write_text(out, text)
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
