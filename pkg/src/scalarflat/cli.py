"""Command-line driver: ``scalarflat <command> --config cfg.yaml --out DIR``.

Each command writes CSV tables, PNG figures and a ``result.json`` record
into the output directory.  The record echoes the configuration together
with its SHA-256 digest so that every number can be traced back to the
command and configuration that produced it.  Wall-clock timings are printed
but kept out of the files, which are byte-identical across reruns.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import report
from .balance import (DeformationProblem, SolverParams, find_balanced_scaling, lambda_of_scaling,
                      scaling_path, solve_deformation)
from .config import COMMANDS, ExperimentConfig, config_from_dict, load_config
from .curvature import scalar_curvature
from .errors import GluingError
from .fields import write_field_csv
from .geometry import ModelCap, build_glued_geometry
from .linsolve import iterate_linear_solve, make_projection_basis, write_iteration_csv
from .nonlinear import BallParams, YamabeOperator, ball_radius, solve_yamabe

fit_slope = ex.fit_slope


@dataclass
class ResultRecord:
    command: str
    config: dict
    config_hash: str
    outputs: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_json(self) -> str:
        """Serialized record without timing (timing is not reproducible)."""
        d = {"command": self.command, "config": self.config, "config_hash": self.config_hash,
             "outputs": self.outputs, "artifacts": sorted(self.artifacts)}
        return json.dumps(_plain(d), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# ----------------------------------------------------------------------------
# helpers


def _caps(cfg: ExperimentConfig):
    kw = dict(codim=cfg.n, ricci_pairing=cfg.ricci_pairing, quad_coeff=cfg.quad_coeff)
    return ModelCap(cfg.m, cfg.lump_volume_1, 1, **kw), ModelCap(cfg.m, cfg.lump_volume_2, 2, **kw)


def _geometry(cfg: ExperimentConfig, eps=None, R=None, Q=None):
    return build_glued_geometry(*_caps(cfg), cfg.eps if eps is None else eps, alpha=cfg.alpha,
                                R=cfg.R if R is None else R, Q=cfg.Q if Q is None else Q,
                                h_t=cfg.effective_h_t())


def _params(cfg: ExperimentConfig) -> SolverParams:
    return SolverParams(cfg.solver.gamma, cfg.solver.tol, cfg.solver.max_iter, cfg.effective_h_t(), cfg.alpha)


def _pmap(fn, items, jobs: int):
    """Order-preserving map over independent jobs, in a bounded process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


class _Out:
    def __init__(self, root: Path, record: ResultRecord):
        self.root = root
        self.record = record

    def path(self, name: str) -> Path:
        self.record.artifacts.append(name)
        return self.root / name


# ----------------------------------------------------------------------------
# commands


def cmd_build(cfg, out: _Out, rec: ResultRecord):
    g = _geometry(cfg)
    u = np.concatenate(([1.0], g.u_eps, [1.0]))
    rows = zip(range(g.size), g.chart, g.coordinate, u, g.vol_weight)
    report.write_rows(out.path("geometry.csv"), ["node_id", "chart", "coordinate", "u_eps", "vol_weight"], rows)
    c = g.cutoffs
    report.line_plot(out.path("geometry.png"), g.t,
                     {"u_eps": g.u_eps, "chi1": c.chi1[1:-1], "chiP": c.chiP[1:-1], "chi2": c.chi2[1:-1]},
                     "t", "value", "conformal factor and partition of unity")
    ids = ex.identity_errors(cfg.eps, n=cfg.codim, m=cfg.m, alpha=cfg.alpha, h_t=cfg.effective_h_t(),
                             lump_volume_1=cfg.lump_volume_1, lump_volume_2=cfg.lump_volume_2, seed=cfg.seed)
    ids.pop("eps")
    rec.outputs.update(nodes=g.size, h_t=g.neck.h_t, alpha=g.alpha, volume=g.volume, identities=ids)


def cmd_curvature(cfg, out: _Out, rec: ResultRecord):
    g = _geometry(cfg)
    S = scalar_curvature(g)
    n = g.n
    wS = np.abs(S) * np.concatenate(([1.0], g.eps * np.cosh(g.t) ** (n - 1), [1.0]))
    rows = zip(range(g.size), g.chart, g.coordinate, S, wS)
    report.write_rows(out.path("curvature.csv"), ["node_id", "chart", "coordinate", "S", "weighted_S"], rows)
    report.line_plot(out.path("curvature.png"), g.t, {"|S| eps cosh^(n-1) t": wS[1:-1]}, "t",
                     "weighted |S|", "scalar curvature of the glued metric", logy=True)
    pt = ex.curvature_point(cfg.eps, n=n, m=cfg.m, alpha=cfg.alpha, h_t=cfg.effective_h_t())
    pt.pop("eps")
    rec.outputs.update(pt)


def cmd_solve_linear(cfg, out: _Out, rec: ResultRecord):
    g = _geometry(cfg)
    basis = make_projection_basis(g)
    gamma = (g.n - 2) / 2.0
    f = ex.standard_source(g)
    res = iterate_linear_solve(f, g, basis, gamma, tol=1e-12)
    write_iteration_csv(out.path("linear_iterations.csv"), res)
    write_field_csv(out.path("linear_solution.csv"), res.u)
    report.line_plot(out.path("linear_residuals.png"), np.arange(1, res.iterations + 1),
                     {"||R_j|| / ||f||": np.asarray(res.residual_history) / res.source_norms[0]},
                     "pass j", "relative residual", "Neumann series", logy=True, marker="o")
    rec.outputs.update(lam=res.lam, iterations=res.iterations, first_ratio=res.first_ratio,
                       final_residual=res.final_residual / res.source_norms[0])


def cmd_solve_yamabe(cfg, out: _Out, rec: ResultRecord):
    g = _geometry(cfg)
    gamma = cfg.solver.gamma
    r_eps = ball_radius(g.n, g.eps, gamma, 1.0)
    op = YamabeOperator(g, gamma)
    st = solve_yamabe(g, BallParams(gamma, r_eps), tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, op=op)
    rows = [(h["j"], h["step_norm"], h["S"], h["lambda"], h["residual"]) for h in st.history]
    report.write_rows(out.path("picard.csv"), ["j", "step_norm", "S", "lambda", "residual"], rows)
    write_field_csv(out.path("yamabe_v.csv"), st.v)
    report.line_plot(out.path("picard.png"), [r[0] for r in rows], {"step norm": [r[1] for r in rows]},
                     "iteration j", "||v(j+1) - v(j)||", "Picard iteration", logy=True, marker="o")
    rec.outputs.update(S=st.S, lam=st.lam, iterations=st.iteration, residual=st.residual,
                       v_inf=float(np.max(np.abs(st.v))), r_eps=r_eps, in_ball=st.in_ball)


def _probe_row(args):
    R, Q, eps, caps, params = args
    p = lambda_of_scaling(R, Q, eps, caps, params)
    return (R, Q, p.lam, p.S)


def cmd_balance(cfg, out: _Out, rec: ResultRecord):
    caps = _caps(cfg)
    params = _params(cfg)
    if cfg.sweep.R and cfg.sweep.Q:
        pts = [(R, Q) for R in sorted(cfg.sweep.R) for Q in sorted(cfg.sweep.Q)]
    else:
        pts = [scaling_path(s, cfg.R_max) for s in np.linspace(0.0, 1.0, 9)]
    rows = _pmap(_probe_row, [(R, Q, cfg.eps, caps, params) for R, Q in pts], cfg.jobs)
    rows.sort()
    report.write_rows(out.path("balance_scan.csv"), ["R", "Q", "lambda", "S"], rows)
    report.write_rows(out.path("sign_map.csv"), ["R", "Q", "sign"], [(r[0], r[1], int(np.sign(r[2]))) for r in rows])
    report.sign_map(out.path("sign_map.png"), [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])
    res = find_balanced_scaling(cfg.eps, caps, params, R_max=min(2.0, cfg.R_max), R_cap=cfg.R_max)
    rec.outputs.update(R0=res.R0, Q0=res.Q0, lam=res.lam, lambda_11=res.lam_scale, R_max=res.R_max,
                       probes=len(res.probes))


def cmd_deform(cfg, out: _Out, rec: ResultRecord):
    g = _geometry(cfg)
    prob = DeformationProblem(g, cfg.solver.gamma)
    res = solve_deformation(prob)
    rows = [(st.r, st.s, st.G_value, st.lam) for st in res.scan]
    report.write_rows(out.path("deform_scan.csv"), ["r", "s", "G", "lambda"], rows)
    report.line_plot(out.path("deform_scan.png"), [r[0] for r in rows],
                     {"s = f(r)": [r[1] for r in rows], "lambda": [r[3] for r in rows]},
                     "r", "value", "implicit curve and lambda along the r-scan", marker="o")
    st = res.state
    rec.outputs.update(r=st.r, s=st.s, G=st.G_value, E1=st.E1, E2=st.E2, lam=st.lam, kappa=prob.kappa,
                       int_S=res.integral_S, volume=res.volume, sup_S=res.sup_S,
                       curve_lipschitz=res.lipschitz, lambda_scale=res.lam_scale)


# quantity -> (point function, x column, y column for the slope fit or None, spread columns)
_SWEEPS = {
    "exactness": (ex.exactness_point, "h", "sup_S", []),
    "curvature": (ex.curvature_point, "eps", "norm_S", ["sup_weighted_S"]),
    "dirichlet": (ex.dirichlet_point, "eps", None, ["ratio_max"]),
    "approx": (ex.approx_point, "eps", "ratio_r", ["ratio_u", "ratio_lam"]),
    "linear": (ex.linear_point, "eps", None, ["lambda"]),
    "yamabe": (ex.yamabe_point, "eps", "S", ["lipschitz_scaled", "v_ratio"]),
    "deform": (ex.deform_point, "eps", "E2", []),
}


def _sweep_kwargs(cfg: ExperimentConfig, quantity: str) -> dict:
    n = cfg.codim
    if quantity == "exactness":
        return {"n": n}
    kw = {"n": n, "m": cfg.m, "h_t": cfg.effective_h_t()}
    if quantity == "curvature":
        # curvature does not see alpha; 0.5 keeps eps = 2**-4 admissible
        kw.update(alpha=cfg.alpha if cfg.alpha is not None else 0.5)
    elif quantity == "dirichlet":
        kw.update(alpha=cfg.alpha if cfg.alpha is not None else 0.5, samples=cfg.sweep.samples, seed=cfg.seed)
    else:
        kw.update(alpha=cfg.alpha, lump_volume_1=cfg.lump_volume_1, lump_volume_2=cfg.lump_volume_2)
    if quantity == "linear":
        kw.update(seed=cfg.seed)
    if quantity == "yamabe":
        kw.update(gamma=cfg.solver.gamma, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, seed=cfg.seed,
                  samples=cfg.sweep.samples)
    if quantity == "deform":
        kw.update(gamma=cfg.solver.gamma, pairing=cfg.ricci_pairing, quad_coeff=cfg.quad_coeff)
    return kw


def cmd_sweep(cfg, out: _Out, rec: ResultRecord):
    q = cfg.sweep.quantity
    fn, xkey, ykey, spreads = _SWEEPS[q]
    xs = sorted(cfg.sweep.h_t if q == "exactness" else cfg.sweep.eps, reverse=True)
    rows = _pmap(partial(fn, **_sweep_kwargs(cfg, q)), xs, cfg.jobs)
    rows.sort(key=lambda r: -r[xkey])
    header = list(rows[0].keys())
    report.write_rows(out.path(f"sweep_{q}.csv"), header, [[r[k] for k in header] for r in rows])
    summary = {"quantity": q, "points": len(rows)}
    xv = [r[xkey] for r in rows]
    if ykey is not None:
        yv = [abs(r[ykey]) for r in rows]
        slope, icpt, resid = fit_slope(xv, yv)
        summary.update(slope=slope, intercept=icpt, fit_residual=resid, fitted=ykey)
        report.slope_plot(out.path(f"sweep_{q}.png"), xv, yv, slope, icpt, xkey, f"|{ykey}|")
    else:
        report.line_plot(out.path(f"sweep_{q}.png"), xv, {k: [r[k] for r in rows] for k in spreads},
                         xkey, "value", f"{q} sweep", logx=True, marker="o")
    for k in spreads:
        summary[f"spread_{k}"] = ex.spread([r[k] for r in rows])
    rec.outputs.update(summary)


_COMMANDS = {
    "build": cmd_build,
    "curvature": cmd_curvature,
    "solve-linear": cmd_solve_linear,
    "solve-yamabe": cmd_solve_yamabe,
    "balance": cmd_balance,
    "deform": cmd_deform,
    "sweep": cmd_sweep,
}


def run(cfg: ExperimentConfig) -> ResultRecord:
    """Execute ``cfg.command``; all files go under ``cfg.out``."""
    cfg.validate()
    root = Path(cfg.out)
    root.mkdir(parents=True, exist_ok=True)
    rec = ResultRecord(cfg.command, cfg.to_dict(), cfg.digest())
    t0 = time.perf_counter()
    _COMMANDS[cfg.command](cfg, _Out(root, rec), rec)
    rec.timing["seconds"] = time.perf_counter() - t0
    rec.artifacts.append("result.json")
    (root / "result.json").write_text(rec.to_json())
    return rec


# ----------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scalarflat", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="YAML configuration file")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--jobs", type=int, help="worker processes for scans and sweeps")
    p.add_argument("--seed", type=int, help="seed for random test fields")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        data = cfg.to_dict()
        data["command"] = args.command
        if args.out is not None:
            data["out"] = str(args.out)
        if args.jobs is not None:
            data["jobs"] = args.jobs
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = config_from_dict(data)
        rec = run(cfg)
    except GluingError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    summary = {k: v for k, v in _plain(rec.outputs).items() if not isinstance(v, (dict, list))}
    print(json.dumps(summary, indent=2, sort_keys=True))
    print(f"wrote {len(rec.artifacts)} files to {cfg.out} in {rec.timing['seconds']:.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
