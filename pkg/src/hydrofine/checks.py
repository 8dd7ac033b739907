"""Acceptance and invariant checks.

Every check is a plain function returning a :class:`CheckResult` with the
measured numbers, the thresholds they were compared against and one boolean
per condition. Setups (grids, coupling sweeps, infrared scales) are pinned
module constants so the suite is reproducible run to run.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import hph_margin, ladder_bounds, loglog_slope, p_bar_margin, wg_relative_norms
from .feshbach import (FeshbachConfig, f0_norm_check, feshbach_direct, feshbach_series,
                       p_rho_mask)
from .fock import build_model, ground_spectrum, observables
from .gamma import (ALL_PARTS, c0_closed_form, c0_quadrature, gamma_continuum, gamma_discrete,
                    splitting_prediction)
from .grid import GridSpec, build_grid
from .kernels import h_A, h_B
from .model import PhysicalParams, derive_constants

# criterion 2 / 3
GAMMA_COUPLINGS = (0.01, 0.02)
SPLITTING_COUPLING = 0.02

# criterion 4
EQUIV_GRID = GridSpec(6, 8, 8)
EQUIV_COUPLINGS = (0.02, 0.04, 0.08)

# criterion 5: ρ = g^(2-2τ) must also respect ρ >= 10 g², i.e. g^(-2τ) >= 10
FESHBACH_GRID = GridSpec(4, 2, 2)
FESHBACH_COUPLING = 8e-6
FESHBACH_TAU = 0.1
FESHBACH_EPSILONS = (1e-2, 1e-3)
SERIES_FLOOR = 1e-12

# criterion 6
BOUND_GRID = GridSpec(16, 1, 2)
BOUND_COUPLINGS = (0.005, 0.01, 0.02)
BOUND_RHO_CEILING = 0.5
LADDER_GRID = GridSpec(4, 2, 2)
LADDER_RHOS = (0.01, 0.1, 1.0)
P_FRACTIONS = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.05), (0.0, 0.0, 0.1), (0.1, 0.0, 0.0),
               (0.1 / np.sqrt(3.0),) * 3)
WG_TARGETS = {"n1": (-0.5, 1.0), "n2": (0.0, 1.0), "n3": (0.5, 1.0)}

# criterion 7
CONTROL_GRID = GridSpec(4, 4, 4)
CONTROL_COUPLING = 0.08

# extra invariants
P_SWEEP_FRACTIONS = (0.01, 0.02, 0.04)


@dataclass
class CheckResult:
    name: str
    title: str
    conditions: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0
    budget: float | None = None

    @property
    def passed(self):
        return all(self.conditions.values())

    def failed_conditions(self):
        return [k for k, ok in self.conditions.items() if not ok]

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        line = f"[{status}] {self.name}: {self.title} ({self.elapsed:.2f} s"
        line += f" / budget {self.budget:g} s)" if self.budget else ")"
        if not self.passed:
            line += " failed: " + ", ".join(self.failed_conditions())
        return line


class _Timer:
    def __init__(self, result):
        self.result = result

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self.result

    def __exit__(self, *exc):
        r = self.result
        r.elapsed = time.perf_counter() - self.t0
        if r.budget is not None and exc[0] is None:
            r.conditions["runtime"] = r.elapsed < r.budget
        return False


def _rel(a, b):
    return abs(a - b) / abs(b)


def _base(params):
    return PhysicalParams() if params is None else params


# ----------------------------------------------------------------- 1

def check_c0(params=None):
    res = CheckResult("c0", "closed-form C0 against radial quadrature", budget=1.0)
    with _Timer(res):
        p = _base(params).replace(p_total=(0.0, 0.0, 0.0))
        d = derive_constants(p)
        cf = c0_closed_form(p, d)
        cq = c0_quadrature(p, d)
        rel = _rel(cf, cq)
        res.metrics.update(closed_form=cf, quadrature=cq, rel_diff=rel)
        res.conditions["rel_diff<=1e-10"] = rel <= 1e-10
        res.conditions["positive"] = cf > 0 and cq > 0
    return res


# ----------------------------------------------------------------- 2

def _isolated(p, d, part):
    """Γ contributions involving ``part`` at least once (F ≡ 1)."""
    rest = ALL_PARTS - {part}
    a = gamma_continuum(p, d, form_factors=False, left={part}, right=ALL_PARTS).matrix
    b = gamma_continuum(p, d, form_factors=False, left=rest, right={part}).matrix
    return a + b


def check_gamma32(params=None, couplings=GAMMA_COUPLINGS):
    res = CheckResult("gamma32", "continuum Γ(3,2) = -C0 g² and vanishing isolated terms",
                      budget=10.0)
    with _Timer(res):
        base = _base(params).replace(p_total=(0.0, 0.0, 0.0))
        for g in couplings:
            p = base.replace(g=g)
            d = derive_constants(p)
            target = -c0_closed_form(p, d) * g * g
            full = gamma_continuum(p, d, form_factors=False)
            val = full.entry(3, 2)
            rel = abs(val - target) / abs(target)
            iso = {
                "A": abs(_isolated(p, d, "A")[2, 1]),
                "B3": abs(_isolated(p, d, "B3")[2, 1]),
                "B1B2": abs((gamma_continuum(p, d, form_factors=False, left={"B1"}, right={"B2"}).matrix
                             + gamma_continuum(p, d, form_factors=False, left={"B2"}, right={"B1"}).matrix)[2, 1]),
            }
            iso = {k: v / abs(target) for k, v in iso.items()}
            res.metrics[f"g={g}"] = {"gamma32": val, "target": target, "rel_diff": rel,
                                     "isolated_rel": iso}
            res.conditions[f"g={g}:rel<=1e-6"] = rel <= 1e-6
            for k, v in iso.items():
                res.conditions[f"g={g}:{k}<=1e-12"] = v <= 1e-12
    return res


# ----------------------------------------------------------------- 3

def check_splitting(params=None, g=SPLITTING_COUPLING):
    res = CheckResult("splitting", "continuum Γ has pattern {1,3} with singlet on top", budget=10.0)
    with _Timer(res):
        p = _base(params).replace(g=g, p_total=(0.0, 0.0, 0.0))
        d = derive_constants(p)
        for ff in (True, False):
            rep = splitting_prediction(gamma_continuum(p, d, form_factors=ff))
            tag = "F" if ff else "F=1"
            res.metrics[tag] = {"eigenvalues": rep.gamma_eigenvalues,
                                "pattern": rep.multiplicity_pattern,
                                "alignment": rep.singlet_alignment,
                                "predicted_gap": rep.predicted_gap}
            res.conditions[f"{tag}:pattern=[1,3]"] = rep.multiplicity_pattern == [1, 3]
            res.conditions[f"{tag}:alignment>=0.999"] = rep.singlet_alignment >= 0.999
    return res


# ----------------------------------------------------------------- 4

def cluster_gap(vals):
    """Triplet mean minus ground value, the quantity Γ's predicted_gap describes."""
    return float(np.mean(vals[1:4]) - vals[0])


def check_equivalence(params=None, grid_spec=EQUIV_GRID, couplings=EQUIV_COUPLINGS):
    res = CheckResult("equivalence", "H_g splitting against Γ_discrete on the same grid",
                      budget=120.0)
    with _Timer(res):
        base = _base(params)
        grid = build_grid(grid_spec, base.lambda_uv)
        devs, rels, overlaps = [], [], []
        for g in couplings:
            p = base.replace(g=g)
            d = derive_constants(p)
            model = build_model(p, d, grid, n_max=1, include_quadratic=False)
            spec = ground_spectrum(model.hg, 4)
            obs = observables(spec, model.basis)
            gap_h = cluster_gap(spec.eigenvalues)
            gap_g = splitting_prediction(gamma_discrete(grid, p, d)).predicted_gap
            devs.append(abs(gap_h - gap_g))
            rels.append(devs[-1] / abs(gap_g))
            overlaps.append(float(obs["singlet_vacuum_overlap2"][0]))
            res.metrics[f"g={g}"] = {"gap_hg": gap_h, "gap_gamma": gap_g, "rel_dev": rels[-1],
                                     "overlap2": overlaps[-1], "method": spec.method}
        slope = loglog_slope(couplings, devs)
        res.metrics["residual_exponent"] = slope
        res.conditions[f"rel_dev(g={couplings[0]})<=0.1"] = rels[0] <= 0.1
        res.conditions["residual_exponent>=2.9"] = slope >= 2.9
        res.conditions["overlap2>=0.99"] = min(overlaps) >= 0.99
    return res


# ----------------------------------------------------------------- 5

def _geometric(errors, floor):
    """Two-step contraction of the truncation error down to the roundoff floor.

    One further W application flips photon-number parity, so consecutive partial
    sums can share the same error; every second partial sum must improve.
    """
    e = np.asarray(errors)
    idx = np.flatnonzero(e[:-2] > floor)
    contracting = bool(np.all(e[idx + 2] < e[idx]))
    return contracting, bool(e[-1] <= floor)


def check_feshbach(params=None, grid_spec=FESHBACH_GRID, g=FESHBACH_COUPLING, tau=FESHBACH_TAU,
                   epsilons=FESHBACH_EPSILONS):
    res = CheckResult("feshbach", "Feshbach identity, kernel annihilation and Neumann series",
                      budget=120.0)
    with _Timer(res):
        base = _base(params)
        grid = build_grid(grid_spec, base.lambda_uv)
        cfg = FeshbachConfig.from_coupling(g, tau)
        first_ratio = {}
        for gg in (g, g / 2):
            p = base.replace(g=gg)
            d = derive_constants(p)
            cfg.validate(gg, d)
            model = build_model(p, d, grid, n_max=2, include_quadratic=True)
            spec = ground_spectrum(model.hg, 4)
            e_g = float(spec.eigenvalues[0])
            ground = spec.ground_cluster()
            tag = f"g={gg:g}"
            out = {"rho": cfg.rho, "E_g": e_g, "dim": model.basis.dim}
            if gg == g:
                for eps in epsilons:
                    fr = feshbach_direct(model.hg, e_g, cfg.with_epsilon(eps), model.basis)
                    out[f"residual_identity(eps={eps:g})"] = fr.residual_identity
                    res.conditions[f"identity(eps={eps:g})<=1e-8"] = fr.residual_identity <= 1e-8
                fk = feshbach_direct(model.hg, e_g, cfg.with_epsilon(0.0), model.basis, ground=ground)
                out["residual_kernel"] = fk.residual_kernel
                out["block_gap"] = fk.block_gap
                res.conditions["kernel(eps=0)<=1e-8"] = fk.residual_kernel <= 1e-8
            # compared at ε = 0: F_ρ(0) is then O(g²), so truncation errors stay resolvable
            cfg0 = cfg.with_epsilon(0.0)
            direct = feshbach_direct(model.hg, e_g, cfg0, model.basis, kernel=False)
            series = feshbach_series(model.hg, model.h0, e_g, cfg0, model.basis, direct=direct)
            lo = np.flatnonzero(p_rho_mask(model.basis, cfg.rho))
            base_block = model.hg.matrix[lo][:, lo].toarray() - e_g * np.eye(lo.size)
            correction = float(np.linalg.norm(direct.f_matrix - base_block, 2))
            floor = SERIES_FLOOR * correction
            mono, reached = _geometric(series.series_errors, floor)
            out.update(series_ratios=series.series_ratios, series_errors=series.series_errors,
                       schur_correction=correction, divergent=series.divergent)
            res.conditions[f"{tag}:series_convergent"] = not series.divergent
            res.conditions[f"{tag}:series_geometric"] = mono
            res.conditions[f"{tag}:series_matches_direct"] = reached
            first_ratio[gg] = float(series.series_ratios[0]) if series.series_ratios.size else 0.0
            res.metrics[tag] = out
        drop = first_ratio[g] / first_ratio[g / 2] if first_ratio[g / 2] > 0 else np.inf
        res.metrics["ratio_drop_on_halving"] = drop
        res.conditions["ratio_drop in [1.8,2.2]"] = 1.8 <= drop <= 2.2
    return res


# ----------------------------------------------------------------- 6

def _rho_sweep(grid, ceiling=BOUND_RHO_CEILING):
    """ρ just below each radial shell: P̄_ρ then starts exactly at that shell."""
    shells = np.unique(np.round(grid.k_norm, 13))
    return [float(s * (1 - 1e-9)) for s in shells[1:] if s < ceiling]


def _test_functions(grid, params):
    """Discretized test functions (√w-weighted) for the a(f) bounds."""
    sw = np.sqrt(grid.weight)
    x0 = np.zeros(3)
    hb = h_B(x0, grid.k, grid.lam, params.lambda_uv)[:, 0]
    ha = h_A(x0, grid.k, grid.lam, params.lambda_uv)[:, 1]
    idx = np.arange(len(grid), dtype=float)
    wiggle = np.sin(1.3 * idx + 0.2) + 1j * np.cos(0.7 * idx)
    return {"hB1": sw * hb, "hA2": sw * ha, "wiggle": sw * wiggle}


def check_bounds(params=None, bound_grid=BOUND_GRID, couplings=BOUND_COUPLINGS,
                 ladder_grid=LADDER_GRID):
    res = CheckResult("bounds", "operator bounds on the truncated model", budget=300.0)
    with _Timer(res):
        base = _base(params)
        # (a)
        grid = build_grid(bound_grid, base.lambda_uv)
        margins = {}
        for frac in P_FRACTIONS:
            m_tot = base.m_el + base.m_n
            p = base.replace(p_total=tuple(m_tot * np.asarray(frac)))
            d = derive_constants(p)
            model = build_model(p, d, grid, n_max=2)
            margins[",".join(f"{f:.4g}" for f in frac)] = hph_margin(model.basis, model.h0, d)
        res.metrics["a:hph_margin"] = margins
        res.conditions["a:hph_margin>=-1e-10"] = min(margins.values()) >= -1e-10

        # (b)
        lgrid = build_grid(ladder_grid, base.lambda_uv)
        lbasis = build_model(base, derive_constants(base), lgrid, n_max=2).basis
        worst = -np.inf
        ladder = {}
        for name, f in _test_functions(lgrid, base).items():
            for rho in LADDER_RHOS:
                b = ladder_bounds(lbasis, f, rho)
                ladder[f"{name},rho={rho:g}"] = {k: (float(v[0]), float(v[1])) for k, v in b.items()}
                worst = max(worst, max(v[0] - v[1] for v in b.values()))
        res.metrics["b:ladder"] = ladder
        res.metrics["b:worst_excess"] = worst
        res.conditions["b:ladder_bounds+1e-10"] = worst <= 1e-10

        # (c), (d), (e)
        p0 = base.replace(p_total=(0.0, 0.0, 0.0))
        rhos = _rho_sweep(grid)
        energy, nph = [], []
        norms = np.zeros((len(couplings), len(rhos), 3))
        for i, g in enumerate(couplings):
            p = p0.replace(g=g)
            d = derive_constants(p)
            model = build_model(p, d, grid, n_max=2, include_quadratic=True)
            spec = ground_spectrum(model.hg, 4)
            obs = observables(spec, model.basis)
            e_g = float(spec.eigenvalues[0])
            energy.append(d.e0_fiber - e_g)
            nph.append(float(obs["n_ph"][0]))
            for j, rho in enumerate(rhos):
                norms[i, j] = wg_relative_norms(model.basis, model.h0, model.w, e_g, rho, 0.0)
        g2 = np.asarray(couplings) ** 2
        e_ratio = np.asarray(energy) / g2
        n_ratio = np.asarray(nph) / g2
        res.metrics["c:E0-Eg"] = energy
        res.metrics["c:(E0-Eg)/g2"] = e_ratio
        res.metrics["d:nph/g2"] = n_ratio
        res.conditions["c:Eg<=E0"] = min(energy) >= 0.0
        res.conditions["c:(E0-Eg)/g2 stable 20%"] = e_ratio.max() / e_ratio.min() - 1 <= 0.2
        res.conditions["d:nph/g2 stable 20%"] = n_ratio.max() / n_ratio.min() - 1 <= 0.2

        res.metrics["e:rho"] = rhos
        res.metrics["e:norms"] = norms
        for c, (name, (rho_exp, g_exp)) in enumerate(WG_TARGETS.items()):
            rho_slopes = [loglog_slope(rhos, norms[i, :, c]) for i in range(len(couplings))]
            g_slopes = [loglog_slope(couplings, norms[:, j, c]) for j in range(len(rhos))]
            res.metrics[f"e:{name}:rho_slopes"] = rho_slopes
            res.metrics[f"e:{name}:g_slopes"] = g_slopes
            res.conditions[f"e:{name} rho-exponent {rho_exp:+g}±0.15"] = \
                max(abs(s - rho_exp) for s in rho_slopes) <= 0.15
            res.conditions[f"e:{name} g-exponent {g_exp:g}±0.15"] = \
                max(abs(s - g_exp) for s in g_slopes) <= 0.15
    return res


# ----------------------------------------------------------------- 7

def check_controls(params=None, grid_spec=CONTROL_GRID, g=CONTROL_COUPLING):
    res = CheckResult("controls", "g=0 and spin-free runs stay exactly 4-fold degenerate",
                      budget=60.0)
    with _Timer(res):
        base = _base(params)
        grid = build_grid(grid_spec, base.lambda_uv)
        runs = {"g=0": (base.replace(g=0.0), True), "spin_off": (base.replace(g=g), False)}
        for tag, (p, spin) in runs.items():
            d = derive_constants(p)
            model = build_model(p, d, grid, n_max=1, include_quadratic=True, spin=spin)
            vals = ground_spectrum(model.hg, 5).eigenvalues
            spread = float(vals[3] - vals[0])
            res.metrics[tag] = {"eigenvalues": vals, "spread": spread,
                                "next_gap": float(vals[4] - vals[3])}
            res.conditions[f"{tag}:spread<=1e-10"] = spread <= 1e-10
            if tag == "g=0":
                res.metrics[tag]["E0"] = d.e0_fiber
                res.conditions["g=0:equals E0"] = abs(vals[0] - d.e0_fiber) <= 1e-12
        # the spin-coupled counterpart must actually split
        p = base.replace(g=g)
        d = derive_constants(p)
        vals = ground_spectrum(build_model(p, d, grid, n_max=1).hg, 4).eigenvalues
        res.metrics["spin_on:gap"] = cluster_gap(vals)
        res.conditions["spin_on:split>1e-10"] = cluster_gap(vals) > 1e-10
    return res


# ----------------------------------------------------------------- extra invariants

def check_invariants(params=None):
    res = CheckResult("invariants", "P̄ρ lower bound, O(P²) gap drift, ‖F_ρ(ε)-F_ρ(0)‖ → 0",
                      budget=120.0)
    with _Timer(res):
        base = _base(params)
        # P̄_ρ H0 P̄_ρ >= P²/2M + e0 + ρ/2
        grid = build_grid(LADDER_GRID, base.lambda_uv)
        m_tot = base.m_el + base.m_n
        worst = np.inf
        for frac in P_FRACTIONS:
            p = base.replace(p_total=tuple(m_tot * np.asarray(frac)))
            d = derive_constants(p)
            model = build_model(p, d, grid, n_max=2)
            for rho in (0.05, 0.2, 0.5, 1.0):
                worst = min(worst, p_bar_margin(model.basis, model.h0, d, rho))
        res.metrics["p_bar_margin"] = worst
        res.conditions["p_bar_margin>=-1e-10"] = worst >= -1e-10

        # predicted gap drifts like |P|²
        p = base.replace(g=SPLITTING_COUPLING, p_total=(0.0, 0.0, 0.0))
        gap0 = splitting_prediction(gamma_continuum(p, derive_constants(p))).predicted_gap
        drift = []
        mags = [f * m_tot for f in P_SWEEP_FRACTIONS]
        for mag in mags:
            q = p.replace(p_total=(0.0, 0.0, mag))
            gap = splitting_prediction(gamma_continuum(q, derive_constants(q))).predicted_gap
            drift.append(abs(gap - gap0))
        slope = loglog_slope(mags, drift)
        res.metrics["p_drift"] = drift
        res.metrics["p_drift_exponent"] = slope
        res.conditions["p_drift_exponent>=1.8"] = slope >= 1.8

        # F_ρ(ε) → F_ρ(0) monotonically
        g = FESHBACH_COUPLING
        p = base.replace(g=g)
        d = derive_constants(p)
        model = build_model(p, d, build_grid(FESHBACH_GRID, base.lambda_uv), n_max=2,
                            include_quadratic=True)
        spec = ground_spectrum(model.hg, 4)
        cfg = FeshbachConfig.from_coupling(g, FESHBACH_TAU)
        chk = f0_norm_check(model.hg, float(spec.eigenvalues[0]), cfg, model.basis,
                            rho_values=(cfg.regime_factor * g * g, cfg.rho),
                            ground=spec.ground_cluster())
        res.metrics["f0"] = chk
        res.conditions["eps_diffs_decreasing"] = bool(np.all(np.diff(chk["eps_diffs"]) < 0))
    return res


CHECKS = {
    "c0": check_c0,
    "gamma32": check_gamma32,
    "splitting": check_splitting,
    "equivalence": check_equivalence,
    "feshbach": check_feshbach,
    "bounds": check_bounds,
    "controls": check_controls,
    "invariants": check_invariants,
}


def run_checks(names=None, params=None):
    names = list(CHECKS) if not names else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(unknown)}")
    return [CHECKS[n](params) for n in names]
