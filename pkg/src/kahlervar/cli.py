"""Command line harness: identities | variations | flow.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad configuration, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import riemannian_core as rc
from .bakry_emery import KahlerState
from .config import ConfigError, ScenarioConfig, load_config
from .identity_suite import static_identity_suite
from .report import Record, ResidualReport
from .soliton_flow import (FlowAbort, check_evolution, export_trajectory, homothety_error, kahler_form_rate_fd,
                           run_flow)
from .spectral_fields import CO, CONTRA, ContractViolation, TensorField
from .variation_engine import (FORMULAS, PreconditionError, ProjectionError, VariationDatum, check_formula,
                               datum_from_potentials, kahler_defect_exponent, random_tensor, require, sample_D,
                               sample_F_flat, variation_rhs)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


class NumericalAbort(RuntimeError):
    def __init__(self, msg: str, partial=None):
        super().__init__(msg)
        self.partial = partial


def build_state(cfg: ScenarioConfig) -> KahlerState:
    grid = cfg.grid
    try:
        return KahlerState.from_potential(grid, cfg.phi.synthesize(grid), cfg.h.synthesize(grid))
    except ContractViolation as exc:
        raise NumericalAbort(f"initial state rejected: {exc}") from exc


# -- scenarios --------------------------------------------------------------------

def run_identities(cfg: ScenarioConfig) -> ResidualReport:
    state = build_state(cfg)
    tol = cfg.tolerances["identities"]
    report = static_identity_suite(state, cfg.rng(), tolerance=tol)
    for key, val in state.kahler_residuals().items():
        report.add(Record(f"structure_{key}", "Kahler structure invariant", float(val), tol))
    return report


def build_datum(cfg: ScenarioConfig, base: KahlerState, src, rng: np.random.Generator) -> VariationDatum:
    grid = base.grid
    if src.kind == "potentials":
        return datum_from_potentials(base, src.u.synthesize(grid), src.w.synthesize(grid), src.c)
    if src.kind == "flat_hessian":
        return sample_F_flat(grid, src.u.synthesize(grid), cfg.h.synthesize(grid), src.c)
    if src.kind == "projected":
        raw = random_tensor(grid, (CO, CO), rng, src.max_mode, src.amp, symmetric=True)
        return sample_D(base, raw)[0]
    return VariationDatum(base, TensorField(grid, (CO, CO), np.zeros((grid.dim, grid.dim) + grid.shape)))


def _admissible(datum: VariationDatum, space: str) -> bool:
    if space == "none":
        return True
    try:
        require(datum, space)
    except PreconditionError:
        return False
    return True


def run_variations(cfg: ScenarioConfig, formulas=None) -> ResidualReport:
    base = build_state(cfg)
    rng = cfg.rng()
    tol, min_order, cross_tol = cfg.tolerances["variations"], cfg.tolerances["min_order"], cfg.tolerances["cross"]
    report = ResidualReport()
    formulas = list(formulas or FORMULAS)
    for src in cfg.variations:
        try:
            datum = build_datum(cfg, base, src, rng)
        except ProjectionError as exc:
            raise NumericalAbort(f"variation source {src.name}: {exc}") from exc
        xi = random_tensor(base.grid, (CONTRA,), rng, 2, 0.3)
        for fid in formulas:
            F = FORMULAS[fid]
            if not _admissible(datum, F.requires):
                continue
            t0 = time.perf_counter()
            chk = check_formula(fid, datum, xi=xi if F.needs_vector else None, ladder=cfg.ladder, check=False)
            report.add(Record(f"{src.name}:{fid}", F.anchor, chk.residual, tol, runtime=time.perf_counter() - t0,
                              extra={"order": chk.order}, min_order=min_order))
        if _admissible(datum, "F"):
            t0 = time.perf_counter()
            pairs = (("THM_A", "PART_A"), ("THM_B", "PART_B"))
            for a, b in pairs:
                ra, rb = variation_rhs(a, datum, check=False), variation_rhs(b, datum, check=False)
                res = float(np.max(np.abs(ra.data - rb.data))) / max(1.0, rb.linf())
                report.add(Record(f"{src.name}:cross_{a}_{b}", "general and closed-class variation formulas agree",
                                  res, cross_tol, runtime=time.perf_counter() - t0))
            st = datum.base
            lap = rc.omega_laplacian(datum.v, st.m, st.f)
            r = variation_rhs("VAR_OM_RIC", datum, check=False)
            res = float(np.max(np.abs(r.data + lap.data))) / max(1.0, lap.linf())
            report.add(Record(f"{src.name}:cross_VAR_OM_RIC_laplacian",
                              "closed variations move the weighted Ricci tensor by minus half the weighted Laplacian",
                              res, cross_tol, runtime=time.perf_counter() - t0))
        # in real dimension two every path is Kahler, so the exponent would only measure noise
        if base.grid.n > 1 and _admissible(datum, "D") and datum.v.linf() > 0:
            t0 = time.perf_counter()
            p, _ = kahler_defect_exponent(datum)
            report.add(Record(f"{src.name}:kahler_defect_order", "paths with velocity in D stay Kahler to second order",
                              p, min_order, norm_type="exponent", runtime=time.perf_counter() - t0,
                              lower_bound=True))
    return report


def run_flow_scenario(cfg: ScenarioConfig, outdir=None) -> tuple:
    """Returns (report, trajectory)."""
    state = build_state(cfg)
    fc, tols = cfg.flow, cfg.tolerances
    t0 = time.perf_counter()
    try:
        traj = run_flow(state, fc.dt, fc.steps, sign=fc.sign, check_stability=fc.check_stability)
    except FlowAbort as exc:
        if outdir is not None and exc.trajectory:
            export_trajectory(exc.trajectory, Path(outdir) / "trajectory", cfg.raw, fc.export_every)
        raise NumericalAbort(str(exc), exc.trajectory) from exc
    elapsed = time.perf_counter() - t0
    report = ResidualReport()
    share = elapsed / 8

    def add(cid, anchor, res, tol, **kw):
        report.add(Record(cid, anchor, float(res), tol, runtime=kw.pop("runtime", share), **kw))

    if not cfg.phi.terms and not cfg.h.terms:
        add("homothety", "flat start with Omega = dV_g0 evolves by exp(-t) g0", homothety_error(traj),
            tols["homothety"])
    diags = [fs.diagnostics for fs in traj]
    add("j_invariants", "J^2 = -I and g-compatibility are preserved",
        max(max(d["j_square"], d["j_compat"]) for d in diags), tols["j_invariants"])
    add("kahler_residual", "nabla J stays zero along the flow", max(d["kahler"] for d in diags), tols["j_invariants"])
    c0 = diags[0]["constraint"]
    growth = max(d["constraint"] for d in diags) / c0 if c0 > 0 else max(d["constraint"] for d in diags)
    add("constraint_growth", "dbar B - del A stays within a bounded factor of its initial size", growth,
        tols["constraint_growth"], norm_type="ratio")
    add("constraint_start", "dbar B = del A at the start", diags[0]["constraint_rel"], tols["constraint_start"])
    add("constraint_start_opposite_sign", "dbar B = -del A at the start", diags[0]["constraint_alt_rel"],
        tols["constraint_start"], soft=True)
    picks = sorted({0, len(traj) // 2, len(traj) - 1})
    structure = max(max(traj[k].structure().values()) for k in picks)
    add("structure", "B is J-linear and A J-anti-linear, both g-symmetric", structure, tols["structure"])
    add("kahler_form_rate", "omega'* equals B", max(traj[k].kahler_form_rate() for k in picks),
        tols["kahler_form_rate"])
    if len(traj) > 2:
        add("kahler_form_rate_fd", "omega'* equals B, finite differences in time",
            kahler_form_rate_fd(traj, len(traj) // 2), 1e-5, soft=True)
    indices = [k for k in (fc.check_indices or (0, len(traj) // 2)) if k < len(traj)]
    report.merge(check_evolution(traj, sorted(set(indices)), tols["flow_start"], tols["flow_mid"]))
    if outdir is not None:
        export_trajectory(traj, Path(outdir) / "trajectory", cfg.raw, fc.export_every)
    return report, traj


# -- IO ---------------------------------------------------------------------------

def _write(report: ResidualReport, outdir: Path, csv_name: str, extra_columns=()) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / csv_name).write_text(report.to_csv(extra_columns))
    (outdir / "summary.json").write_text(report.summary_json())


def _resolve(args) -> tuple:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out or cfg.out or ".")
    return cfg, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kahlervar", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=("identities", "variations", "flow"))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--tolerance-scale", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    if not (args.tolerance_scale > 0 and math.isfinite(args.tolerance_scale)):
        print("error: --tolerance-scale must be a positive number", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg, out = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "identities":
            report = run_identities(cfg).rescale(args.tolerance_scale)
            _write(report, out, "identities.csv")
        elif args.command == "variations":
            report = run_variations(cfg).rescale(args.tolerance_scale)
            _write(report, out, "variations.csv", ("order",))
        else:
            report, _ = run_flow_scenario(cfg, out)
            report.rescale(args.tolerance_scale)
            _write(report, out, "flow.csv")
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        out.mkdir(parents=True, exist_ok=True)
        (out / "abort.json").write_text(json.dumps({"command": args.command, "reason": str(exc)}, indent=2))
        return EXIT_ABORT
    s = report.summary()
    print(f"{args.command}: {s['passed']}/{s['total']} passed" + (f"; failed: {', '.join(s['failed'])}"
                                                                   if s["failed"] else ""))
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
