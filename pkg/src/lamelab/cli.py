"""Batch front-end: run configured experiments and emit manifest + artifacts.

Exit codes: 0 all enabled checks pass, 2 config error, 3 numerical failure.
Every run writes ``manifest.json`` (config echo, versions, wall time, one
pass/fail record with a numeric margin per enabled check) next to the
experiment's CSV/JSON/field artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import (
    SweepConfig,
    absorbing_radius,
    default_ensemble,
    epsilon_sweep,
    h0_norm_sq,
    sample_attractor,
)
from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import (
    IntegrationFailureError,
    Trajectory,
    bound_constants,
    cfl_limit,
    simulate,
    spectral_bound,
)
from .equilibria import NoConvergenceError, multistart_stationary
from .forcing import validate_assumptions
from .krylov import SolverFailureError
from .mesh import mode_wavevector, save_field
from .operators import (
    dispersion_speeds,
    equivalence_constant,
    first_eigenvalue,
    lame_mode_quadratic,
    measured_mode_rayleigh,
    symbol_eigenvalues,
)

_FULL = ".17e"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lamelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment named in the config")
    run_p.add_argument("--config", required=True, help="path to the experiment config")
    run_p.add_argument("--output", default="out", help="output directory (created if missing)")
    run_p.add_argument("--threads", type=int, default=1, help="worker threads for sub-runs")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    check = run_p.add_mutually_exclusive_group()
    check.add_argument("--check", dest="check", action="store_true", default=True)
    check.add_argument("--no-check", dest="check", action="store_false")

    desc_p = sub.add_parser("describe", help="print resolved config and derived constants")
    desc_p.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "describe":
        print(describe(cfg))
        return 0

    if args.seed is not None:
        cfg.seed = args.seed
    return run(cfg, Path(args.output), threads=args.threads, enforce_checks=args.check)


def describe(cfg: ExperimentConfig) -> str:
    """Resolved configuration and derived constants, without running."""
    grid = cfg.build_grid()
    params = cfg.build_params()
    spec = cfg.build_spec()
    b = cfg.build_b(grid)
    eig = first_eigenvalue(grid)
    lam_max = spectral_bound(params, grid)
    c_p, c_s = dispersion_speeds(params, mode_wavevector(grid, (1, 1, 1)))
    lines = [
        f"experiment        {cfg.experiment}",
        f"grid              n = {grid.n}, lengths = {grid.lengths}, h = {tuple(round(h, 12) for h in grid.h)}",
        f"material          mu = {params.mu}, lambda = {params.lam}, eps = {params.eps}, alpha = {params.alpha}, rho = {params.rho}",
        f"forcing           {spec.name} {spec.params}",
        f"lambda_1^h        {eig.discrete:.10g}   (continuum {eig.continuum:.10g})",
        f"lambda_max (E)    {lam_max:.10g}",
        f"explicit dt bound {cfl_limit(params, grid):.10g}",
        f"a0                {equivalence_constant(params):.10g}",
        f"wave speeds       c_P = {c_p:.10g}, c_S = {c_s:.10g}"
        + ("   (degenerate: c_P == c_S)" if params.eps == 0.0 else ""),
    ]
    try:
        consts = bound_constants(params, spec, b, grid, seed=cfg.seed)
        r1, _ = absorbing_radius(params, spec, b, grid, seed=cfg.seed)
        lines += [
            f"K1, K2, K3        {consts.k1:.10g}, {consts.k2:.10g}, {consts.k3:.10g}",
            f"absorbing R1      {r1:.10g}",
        ]
    except ValueError as exc:
        lines.append(f"energy bounds     unavailable: {exc}")
    return "\n".join(lines)


def run(cfg: ExperimentConfig, outdir: Path, threads: int = 1, enforce_checks: bool = True) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    started = _time.perf_counter()
    checks: list[dict] = []
    artifacts: list[str] = []
    status = "ok"
    failure = None
    runner = _RUNNERS[cfg.experiment]
    try:
        runner(cfg, outdir, checks, artifacts, threads)
    except (IntegrationFailureError, SolverFailureError, NoConvergenceError, ValueError) as exc:
        status = "failed"
        failure = f"{type(exc).__name__}: {exc}"

    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_text(),
        "versions": {
            "lamelab": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "wall_time_s": round(_time.perf_counter() - started, 3),
        "checks": checks,
        "artifacts": artifacts,
        "status": status,
        "failure": failure,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    if status == "failed":
        print(f"lamelab: numerical failure: {failure}", file=sys.stderr)
        return 3
    failed = [c for c in checks if not c["passed"]]
    for c in checks:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['id']}  margin={c['margin']:.3e}")
    if enforce_checks and failed:
        return 3
    return 0


def _check(checks: list, cid: str, passed: bool, margin: float):
    checks.append({"id": cid, "passed": bool(passed), "margin": float(margin)})


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(format(v, _FULL) if isinstance(v, float) else str(v) for v in row) + "\r\n")


def _write_energy_csv(path: Path, traj: Trajectory):
    rows = []
    for t, e, d in zip(traj.times, traj.energies, traj.dissipation):
        rows.append(
            (float(t), e.kinetic, e.elastic, e.potential, e.work, e.total, float(d), e.h_norm_sq)
        )
    _write_csv(
        path,
        ["t", "kinetic", "elastic", "potential", "work", "total", "dissipation", "h_norm_sq"],
        rows,
    )


def _run_simulate(cfg, outdir, checks, artifacts, threads):
    grid = cfg.build_grid()
    params = cfg.build_params()
    spec = cfg.build_spec()
    b = cfg.build_b(grid)
    initial = cfg.build_initial(grid)
    traj = simulate(initial, params, spec, b, cfg.T, cfg.dt, stride=cfg.stride, scheme=cfg.scheme)

    _write_energy_csv(outdir / "energy.csv", traj)
    artifacts.append("energy.csv")
    save_field(traj.final_state().u, outdir / "final_u.csv")
    save_field(traj.final_state().v, outdir / "final_v.csv")
    artifacts += ["final_u.csv", "final_v.csv"]

    totals = traj.totals
    tol = 1e-8 * (1.0 + abs(totals[0]))
    max_rise = float(np.max(np.diff(totals))) if len(totals) > 1 else 0.0
    _check(checks, "energy_monotone", max_rise <= tol, tol - max_rise)


def _run_stationary(cfg, outdir, checks, artifacts, threads):
    from .equilibria import bound_check
    from .dynamics import hnorm_sq, State
    from .mesh import VectorField

    grid = cfg.build_grid()
    params = cfg.build_params()
    spec = cfg.build_spec()
    b = cfg.build_b(grid)
    sset = multistart_stationary(params, spec, b, grid, n_starts=cfg.n_starts, seed=cfg.seed)

    members = []
    worst_margin = np.inf
    for i, m in enumerate(sset.members):
        rep = bound_check(m, params, spec, b)
        worst_margin = min(worst_margin, rep.margin)
        fname = f"equilibrium_{i}.csv"
        save_field(m.u, outdir / fname)
        artifacts.append(fname)
        members.append(
            {
                "file": fname,
                "residual_norm": m.residual_norm,
                "lyapunov_value": m.lyapunov_value,
                "h_norm": float(np.sqrt(hnorm_sq(params, State(m.u, VectorField.zeros(grid))))),
                "bound_margin": rep.margin,
            }
        )
    report = {
        "members": members,
        "n_starts": sset.n_starts,
        "n_failed": sset.n_failed,
    }
    (outdir / "stationary.json").write_text(json.dumps(report, indent=2) + "\n")
    artifacts.append("stationary.json")
    _check(checks, "stationary_bound", worst_margin >= -1e-9, float(worst_margin))
    worst_res = max((m.residual_norm for m in sset.members), default=0.0)
    _check(checks, "stationary_residual", worst_res <= 1e-10, 1e-10 - worst_res)


def _run_attractor(cfg, outdir, checks, artifacts, threads):
    grid = cfg.build_grid()
    params = cfg.build_params()
    spec = cfg.build_spec()
    b = cfg.build_b(grid)
    sset = multistart_stationary(params, spec, b, grid, n_starts=4, seed=cfg.seed)
    ensemble = default_ensemble(grid, params, spec, b, cfg.n_members, seed=cfg.seed, amp=cfg.ensemble_amp)
    r1, _ = absorbing_radius(params, spec, b, grid, seed=cfg.seed)
    cloud = sample_attractor(
        params, spec, b, ensemble, cfg.T_transient, cfg.T_sample, cfg.stride, cfg.dt,
        stationary_set=sset, r1=r1, seed=cfg.seed,
    )
    summary = {
        "eps": params.eps,
        "points": len(cloud.points),
        "max_h0_norm": cloud.max_h0_norm(),
        "absorbing_radius_r1": r1,
        "stationary_members": len(sset.members),
    }
    (outdir / "attractor.json").write_text(json.dumps(summary, indent=2) + "\n")
    artifacts.append("attractor.json")
    _check(checks, "absorbing_ball", cloud.max_h0_norm() <= r1 + 1.0, r1 + 1.0 - cloud.max_h0_norm())
    from .mesh import inner_l2

    worst_v = max(np.sqrt(inner_l2(s.v, s.v)) for s in cloud.points)
    _check(checks, "tail_velocity", worst_v <= 1e-2, 1e-2 - worst_v)


def _run_sweep(cfg, outdir, checks, artifacts, threads):
    grid = cfg.build_grid()
    spec = cfg.build_spec()
    b = cfg.build_b(grid)
    sweep_cfg = SweepConfig(
        grid=grid,
        mu=cfg.mu,
        alpha=cfg.alpha,
        spec=spec,
        b=b,
        eps_list=tuple(cfg.eps_list),
        n_members=cfg.n_members,
        T_transient=cfg.T_transient,
        T_sample=cfg.T_sample,
        stride=cfg.stride,
        dt=cfg.dt,
        probe_T=cfg.probe_T,
        seed=cfg.seed,
        rho=cfg.rho,
        ensemble_amp=cfg.ensemble_amp,
    )
    report = epsilon_sweep(sweep_cfg)

    probe_by_eps = {row.eps: row.sup_dist for row in report.probe_rows}
    rows = []
    for eps, d, size, mnorm in zip(
        report.eps_list, report.distances, report.cloud_sizes, report.max_h0_norms
    ):
        rows.append((float(eps), float(d), float(probe_by_eps.get(eps, np.nan)), size, float(mnorm)))
    _write_csv(outdir / "sweep.csv", ["eps", "d_H0", "sup_traj_dist", "cloud_size", "max_H0_norm"], rows)
    artifacts.append("sweep.csv")
    payload = {
        "eps_list": report.eps_list,
        "distances": report.distances,
        "cloud_sizes": report.cloud_sizes,
        "max_h0_norms": report.max_h0_norms,
        "probe": [{"eps": r.eps, "sup_dist": r.sup_dist} for r in report.probe_rows],
        "r1": report.r1,
        "lyapunov_cap": report.lyapunov_cap,
    }
    (outdir / "sweep.json").write_text(json.dumps(payload, indent=2) + "\n")
    artifacts.append("sweep.json")

    nz = [(e, d) for e, d in zip(report.eps_list, report.distances) if e > 0.0]
    nz.sort(reverse=True)
    dists = [d for _, d in nz]
    mono_margin = min(
        (dists[i] * 1.10 - dists[i + 1] for i in range(len(dists) - 1)), default=0.0
    )
    _check(checks, "sweep_distance_nonincreasing", mono_margin >= 0.0, mono_margin)
    if dists:
        _check(checks, "sweep_smallest_leq_largest", dists[-1] <= dists[0], dists[0] - dists[-1])


def _run_dispersion(cfg, outdir, checks, artifacts, threads):
    grid = cfg.build_grid()
    params = cfg.build_params()
    k = mode_wavevector(grid, (1, 1, 1))
    c_p, c_s = dispersion_speeds(params, k)

    rows = []
    worst_rq = 0.0
    for d, label in (((1, 0, 0), "x"), ((0, 1, 0), "y"), ((0, 0, 1), "z")):
        measured = measured_mode_rayleigh(params, grid, k, d)
        exact = lame_mode_quadratic(params, grid, k, d)
        err = abs(measured - exact) / max(abs(exact), 1e-300)
        worst_rq = max(worst_rq, err)
        rows.append((label, float(measured), float(exact), float(err)))
    _write_csv(outdir / "dispersion.csv", ["polarization", "measured_rq", "exact_rq", "rel_err"], rows)
    artifacts.append("dispersion.csv")

    from .mesh import build_grid as _bg

    errs_p, errs_s = [], []
    target_p = (params.lam + 2 * params.mu) * sum(ki**2 for ki in k)
    target_s = params.mu * sum(ki**2 for ki in k)
    for n in (7, 15, 31):
        g = _bg(grid.lengths, (n, n, n))
        eig_p, eig_s = symbol_eigenvalues(params, g, k)
        errs_p.append(abs(eig_p - target_p))
        errs_s.append(abs(eig_s - target_s))
    ratios = [errs_p[i] / errs_p[i + 1] for i in range(2)] + [
        errs_s[i] / errs_s[i + 1] for i in range(2)
    ]
    _check(checks, "dispersion_rayleigh_quotient", worst_rq <= 1e-10, 1e-10 - worst_rq)
    _check(
        checks,
        "dispersion_second_order",
        all(3.5 <= r <= 4.5 for r in ratios),
        min(min(r - 3.5 for r in ratios), min(4.5 - r for r in ratios)),
    )
    payload = {"c_P": c_p, "c_S": c_s, "refinement_ratios": ratios}
    (outdir / "speeds.json").write_text(json.dumps(payload, indent=2) + "\n")
    artifacts.append("speeds.json")


def _run_validate(cfg, outdir, checks, artifacts, threads):
    grid = cfg.build_grid()
    params = cfg.build_params()
    spec = cfg.build_spec()
    report = validate_assumptions(
        spec, params, grid, n_samples=cfg.n_samples, radius=cfg.radius, seed=cfg.seed
    )
    payload = [
        {
            "condition": c.condition,
            "samples": c.samples,
            "worst_margin": c.worst_margin,
            "passed": c.passed,
        }
        for c in report.checks
    ]
    (outdir / "validation.json").write_text(json.dumps(payload, indent=2) + "\n")
    artifacts.append("validation.json")
    for c in report.checks:
        _check(checks, f"assumption_{c.condition}", c.passed, c.worst_margin)


_RUNNERS = {
    "simulate": _run_simulate,
    "stationary": _run_stationary,
    "attractor": _run_attractor,
    "sweep": _run_sweep,
    "dispersion": _run_dispersion,
    "validate": _run_validate,
}


if __name__ == "__main__":
    sys.exit(main())
