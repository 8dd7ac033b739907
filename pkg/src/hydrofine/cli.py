"""Command-line front end.

    hydrofine <command> [--config PATH] [--set key=value ...] [--out DIR]

Commands: c0, gamma, spectrum, feshbach, sweep, check. Exit status 0 on
success, 1 for configuration (or output path) errors, 2 when a numerical
tolerance or size budget cannot be met, 3 when the check suite fails.
"""
import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgmod
from .bounds import loglog_slope
from .checks import CHECKS, cluster_gap, run_checks
from .feshbach import FeshbachConfig, FeshbachError, f0_norm_check, feshbach_direct, feshbach_series
from .fock import BudgetError, ConvergenceError, build_model, ground_spectrum, observables
from .gamma import (QuadratureError, c0_closed_form, c0_quadrature, gamma_continuum,
                    gamma_discrete, splitting_prediction)
from .grid import GridSpec, build_grid
from .model import derive_constants
from .records import write_record, write_table

COMMANDS = ("c0", "gamma", "spectrum", "feshbach", "sweep", "check")
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_CHECK = 0, 1, 2, 3
C0_RTOL = 1e-10

SPECTRUM_COLUMNS = ("g", "E0", "Eg", "gap12", "gap24", "gamma_gap", "nph")
SWEEP_COLUMNS = {
    "spectrum": SPECTRUM_COLUMNS,
    "gamma": ("g", "gamma32_re", "predicted_gap", "singlet_alignment", "c0_target"),
    "c0": ("closed_form", "quadrature", "rel_diff"),
    "feshbach": ("g", "rho", "residual_identity_max", "residual_kernel", "series_max_ratio"),
}


FIT_COLUMNS = {
    "spectrum": ("gap12", "gamma_gap", "nph"),
    "gamma": ("gamma32_re", "predicted_gap"),
    "c0": ("closed_form",),
    "feshbach": ("series_max_ratio",),
}


def _flatten(command, r):
    """One CSV row from a command result."""
    if command == "gamma":
        c = r["continuum"]
        return {"g": r["g"], "gamma32_re": float(np.real(c["gamma32"])),
                "predicted_gap": c["splitting"]["predicted_gap"],
                "singlet_alignment": c["splitting"]["singlet_alignment"], "c0_target": r["c0_target"]}
    return {c: r.get(c, float("nan")) for c in SWEEP_COLUMNS[command]}


class NumericalBudgetError(RuntimeError):
    pass


# ----------------------------------------------------------------- commands

def cmd_c0(values, params=None, grid_spec=None):
    p = params or cfgmod.physical_params(values)
    d = derive_constants(p)
    cf = c0_closed_form(p, d)
    out = {"closed_form": cf, "p_total": list(p.p_total)}
    if not np.any(d.p_total):
        cq = c0_quadrature(p, d)
        rel = abs(cf - cq) / abs(cq)
        out.update(quadrature=cq, rel_diff=rel, positive=bool(cf > 0 and cq > 0))
        if rel > C0_RTOL:
            raise NumericalBudgetError(f"C0 closed form and quadrature differ by {rel:.3e} "
                                       f"(tolerance {C0_RTOL:g})")
    else:
        out.update(quadrature=cf, rel_diff=0.0, positive=bool(cf > 0),
                   note="P != 0: C0 evaluated by quadrature only")
    return out


def _splitting(rep):
    return {"eigenvalues": rep.gamma_eigenvalues, "multiplicity_pattern": rep.multiplicity_pattern,
            "predicted_gap": rep.predicted_gap, "singlet_alignment": rep.singlet_alignment}


def cmd_gamma(values, params=None, grid_spec=None):
    p = params or cfgmod.physical_params(values)
    d = derive_constants(p)
    spec = grid_spec or cfgmod.grid_spec(values)
    cont = gamma_continuum(p, d, form_factors=values["gamma.form_factors"],
                           rtol=values["gamma.rtol"])
    disc = gamma_discrete(build_grid(spec, p.lambda_uv), p, d,
                          form_factors=values["gamma.form_factors"])
    target = -c0_closed_form(p, d) * p.g ** 2
    return {
        "g": p.g,
        "c0_target": target,
        "denominator_energy": cont.denominator_energy,
        "continuum": {"matrix": cont.matrix, "gamma32": cont.entry(3, 2),
                      "error_estimate": cont.error_estimate,
                      "splitting": _splitting(splitting_prediction(cont))},
        "discrete": {"grid": list(spec.as_tuple()), "matrix": disc.matrix,
                     "gamma32": disc.entry(3, 2),
                     "splitting": _splitting(splitting_prediction(disc))},
    }


def _model(values, p, spec):
    d = derive_constants(p)
    grid = build_grid(spec, p.lambda_uv)
    model = build_model(p, d, grid, n_max=values["fock.n_max"],
                        include_quadratic=values["fock.include_quadratic"],
                        spin=values["fock.spin"], form_factors=values["fock.form_factors"])
    return grid, model


def cmd_spectrum(values, params=None, grid_spec=None):
    p = params or cfgmod.physical_params(values)
    spec = grid_spec or cfgmod.grid_spec(values)
    grid, model = _model(values, p, spec)
    m = min(values["fock.n_eigs"], model.basis.dim)
    res = ground_spectrum(model.hg, m, dense_threshold=values["fock.dense_threshold"])
    obs = observables(res, model.basis)
    vals = res.eigenvalues
    gamma = gamma_discrete(grid, p, model.derived, form_factors=values["fock.form_factors"])
    gamma_gap = splitting_prediction(gamma).predicted_gap if p.g > 0 else 0.0
    return {
        "g": p.g,
        "grid": list(spec.as_tuple()),
        "dim": model.basis.dim,
        "method": res.method,
        "E0": model.derived.e0_fiber,
        "Eg": float(vals[0]),
        "eigenvalues": vals,
        "residuals": res.residuals,
        "clusters": res.clusters(),
        "gap12": float(vals[1] - vals[0]) if m >= 2 else float("nan"),
        "gap24": float(vals[3] - vals[1]) if m >= 4 else float("nan"),
        "cluster_gap": cluster_gap(vals) if m >= 4 else float("nan"),
        "gamma_gap": gamma_gap,
        "nph": float(obs["n_ph"][0]),
        "n_ph": obs["n_ph"],
        "singlet_vacuum_overlap2": obs["singlet_vacuum_overlap2"],
        "spin_density": obs["spin_density"],
    }


def _feshbach_config(values, g, rho=None):
    tau = values["feshbach.tau"]
    rho = rho if rho is not None else values["feshbach.rho"]
    if rho is None:
        if g == 0:
            raise cfgmod.ConfigError("feshbach.rho", "g = 0 leaves ρ = g^(2-2τ) = 0; set feshbach.rho")
        rho = g ** (2 - 2 * tau)
    return FeshbachConfig(rho=rho, tau=tau, series_cap=values["feshbach.series_cap"],
                          regime_factor=values["feshbach.regime_factor"])


def cmd_feshbach(values, params=None, grid_spec=None, rho=None):
    p = params or cfgmod.physical_params(values)
    spec = grid_spec or cfgmod.grid_spec(values)
    _, model = _model(values, p, spec)
    cfg = _feshbach_config(values, p.g, rho)
    try:
        cfg.validate(p.g, model.derived)
    except ValueError as exc:
        raise cfgmod.ConfigError("feshbach.rho", str(exc)) from None
    res = ground_spectrum(model.hg, min(values["fock.n_eigs"], model.basis.dim),
                          dense_threshold=values["fock.dense_threshold"])
    e_g = float(res.eigenvalues[0])
    ground = res.ground_cluster()
    out = {"g": p.g, "rho": cfg.rho, "tau": cfg.tau, "E_g": e_g, "dim": model.basis.dim,
           "epsilon": {}}
    ident, kern = [], None
    for eps in values["feshbach.epsilon"]:
        fr = feshbach_direct(model.hg, e_g, cfg.with_epsilon(eps), model.basis, ground=ground)
        ser = feshbach_series(model.hg, model.h0, e_g, cfg.with_epsilon(eps), model.basis, direct=fr)
        entry = {"residual_identity": fr.residual_identity, "residual_kernel": fr.residual_kernel,
                 "block_gap": fr.block_gap, "f_matrix": fr.f_matrix,
                 "series_ratios": ser.series_ratios, "series_errors": ser.series_errors,
                 "series_divergent": ser.divergent}
        out["epsilon"][repr(eps)] = entry
        if fr.residual_identity is not None:
            ident.append(fr.residual_identity)
        if fr.residual_kernel is not None:
            kern = fr.residual_kernel
        out.setdefault("series_max_ratio", 0.0)
        if ser.series_ratios.size:
            out["series_max_ratio"] = max(out["series_max_ratio"], float(ser.series_ratios.max()))
    if kern is None:
        fr = feshbach_direct(model.hg, e_g, cfg.with_epsilon(0.0), model.basis, ground=ground)
        kern = fr.residual_kernel
    out["residual_identity_max"] = max(ident) if ident else float("nan")
    out["residual_kernel"] = kern
    out["f0"] = f0_norm_check(model.hg, e_g, cfg, model.basis,
                              rho_values=(cfg.regime_factor * p.g * p.g, cfg.rho), ground=ground)
    return out


RUNNERS = {"c0": cmd_c0, "gamma": cmd_gamma, "spectrum": cmd_spectrum, "feshbach": cmd_feshbach}


def _sweep_point(values, value):
    var = values["sweep.variable"]
    base = cfgmod.physical_params(values)
    spec = cfgmod.grid_spec(values)
    runner = RUNNERS[values["sweep.command"]]
    if var == "g":
        return runner(values, params=base.replace(g=value), grid_spec=spec)
    if var == "p":
        return runner(values, params=cfgmod.physical_params(values, p_total=(0.0, 0.0, value)),
                      grid_spec=spec)
    if var == "grid":
        return runner(values, params=base, grid_spec=GridSpec(*value))
    # rho
    if values["sweep.command"] != "feshbach":
        raise cfgmod.ConfigError("sweep.variable", "a rho sweep requires sweep.command = feshbach")
    return cmd_feshbach(values, params=base, grid_spec=spec, rho=value)


def _fit_exponents(xs, rows, columns):
    xs = np.asarray(xs, dtype=float)
    out = {}
    if xs.size < 2 or np.any(xs <= 0):
        return out
    for c in columns:
        y = np.array([r.get(c, np.nan) for r in rows], dtype=float)
        y = np.abs(y)
        if np.all(np.isfinite(y)) and np.all(y > 0) and np.ptp(np.log(xs)) > 0:
            out[c] = loglog_slope(xs, y)
    return out


def cmd_sweep(values, workers=None):
    var = values["sweep.variable"]
    points = list(values["sweep.values"])
    command = values["sweep.command"]
    workers = workers or values["run.workers"]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda v: _sweep_point(values, v), points))
    columns = list(SWEEP_COLUMNS[command])
    rows = []
    for v, r in zip(points, results):
        row = _flatten(command, r)
        if var == "g" and "g" in columns:
            row["g"] = v
        rows.append((v, row))
    label = "grid" if var == "grid" else var
    if label not in columns:
        columns = [label] + columns
        rows = [(v, dict(row, **{label: ":".join(map(str, v)) if var == "grid" else v}))
                for v, row in rows]
    table = [row for _, row in rows]
    xs = [np.prod(v) if var == "grid" else v for v in points]
    exps = _fit_exponents(xs, table, FIT_COLUMNS[command])
    if command == "spectrum":
        dev = [abs(r["cluster_gap"] - r["gamma_gap"]) for r in results]
        shift = [r["E0"] - r["Eg"] for r in results]
        extra = _fit_exponents(xs, [{"gap_residual": a, "E0_minus_Eg": b} for a, b in zip(dev, shift)],
                               ["gap_residual", "E0_minus_Eg"])
        exps.update(extra)
    return {"variable": var, "command": command, "values": points, "columns": columns,
            "points": results, "exponents": exps, "exponent_axis": "grid points" if var == "grid" else var}, table, columns


def cmd_check(values):
    names = values["check.items"] or tuple(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise cfgmod.ConfigError("check.items", f"unknown check {unknown[0]!r}; "
                                 f"choose from {', '.join(CHECKS)}")
    params = cfgmod.physical_params(values, g=0.0, p_total=(0.0, 0.0, 0.0))
    results = run_checks(names, params=params)
    return {"checks": {r.name: {"title": r.title, "passed": r.passed, "elapsed": r.elapsed,
                                "budget": r.budget, "conditions": r.conditions, "metrics": r.metrics}
                       for r in results},
            "all_passed": all(r.passed for r in results)}, results


# ----------------------------------------------------------------- driver

def build_parser():
    ap = argparse.ArgumentParser(prog="hydrofine", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration key (repeatable)")
    ap.add_argument("--out", default="results", help="output directory (default: results)")
    return ap


def _err(msg):
    print(f"hydrofine: {msg}", file=sys.stderr)


def run(command, values, out_dir):
    """Execute ``command``; returns (exit status, record)."""
    t0 = time.perf_counter()
    record = {"command": command, "config": cfgmod.snapshot(values)}
    status = EXIT_OK
    if command == "sweep":
        result, table, columns = cmd_sweep(values)
        record["result"] = result
        record["wall_time"] = time.perf_counter() - t0
        write_table(out_dir, "sweep", columns, table)
        print(f"sweep over {values['sweep.variable']}: {len(table)} points; exponents {result['exponents']}")
    elif command == "check":
        result, results = cmd_check(values)
        for r in results:
            print(r.summary())
        record["result"] = result
        record["wall_time"] = time.perf_counter() - t0
        status = EXIT_OK if result["all_passed"] else EXIT_CHECK
    else:
        result = RUNNERS[command](values)
        record["result"] = result
        record["wall_time"] = time.perf_counter() - t0
        _print_summary(command, result)
    path = write_record(out_dir, command, record)
    print(f"record written to {path}")
    return status, record


def _print_summary(command, r):
    if command == "c0":
        print(f"C0 closed form {r['closed_form']:.16e}, quadrature {r['quadrature']:.16e}, "
              f"relative difference {r['rel_diff']:.2e}")
    elif command == "gamma":
        c = r["continuum"]
        print(f"Gamma_32 continuum {c['gamma32'].real:.10e} (target {r['c0_target']:.10e}); "
              f"pattern {c['splitting']['multiplicity_pattern']}, "
              f"singlet alignment {c['splitting']['singlet_alignment']:.6f}")
    elif command == "spectrum":
        print(f"dim {r['dim']} ({r['method']}): E0 {r['E0']:.12f}, lowest "
              + ", ".join(f"{v:.12f}" for v in r["eigenvalues"]))
    elif command == "feshbach":
        print(f"rho {r['rho']:.4g}: max identity residual {r['residual_identity_max']:.2e}, "
              f"kernel residual {r['residual_kernel']:.2e}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        values = cfgmod.load_config(args.config, args.set)
        status, _ = run(args.command, values, args.out)
        return status
    except cfgmod.ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except (NumericalBudgetError, BudgetError, ConvergenceError, QuadratureError,
            FeshbachError, OverflowError) as exc:
        extra = ""
        for attr in ("residual", "achieved", "min_eigenvalue"):
            if getattr(exc, attr, None) is not None:
                extra = f" [achieved {attr} = {getattr(exc, attr):.3e}]"
        _err(f"numerical budget failure: {exc}{extra}")
        return EXIT_BUDGET
    except OSError as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
