"""Numerical checks of the Meyer-set diffraction inequalities on finite patches.

Every check returns a :class:`CheckReport`.  Each report is built from items, and
each item has a raw signed slack (positive means satisfied) and its own tolerance.
The report margin is ``min_i(raw_i + tol_i) - T``, where ``T = params["tolerance"]``.
That makes ``passed`` equivalent to ``margin >= -T``.  Exact items (counts,
geometric certificates) carry no tolerance and enter the minimum with their raw
slack; yes/no items score 0 when satisfied and -1 when not.

Intensities use the structure factor on the whole patch by default.  It is exactly
the lag average of the finite autocorrelation, so inequalities that hold for
positive combs (such as adding points only raising every peak together with the
origin) hold on the patch without any estimation error.  Slacks for the noisy
comparisons are 3 times the measured off-peak noise floor.

Checks flagged ``control`` run on inputs built to break a hypothesis.  They are
expected to fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import TOL, as_points, cluster_rows, match_rows, rng, unique_rows
from .autocorr import WeightedComb
from .cutproject import (CutProjectScheme, fibonacci_scheme, fourier_candidates, generate_fibonacci,
                         generate_lattice_patch, integer_scheme)
from .harmonic import (CharacterSet, character_deviations, epsilon_dual_set, extract_period_lattice,
                       period_threshold)
from .pointset import (Box, PointSet, build_pointset, covering_radius, deform, density_bounds,
                       difference_set, min_separation, symmetric_difference, thin)
from .spectrum import NOISE_CLEARANCE, IntensityEstimator, grid_candidates, noise_floor

#: Multiple of the noise floor used as slack in every noisy inequality.
NOISE_FACTOR = 3.0
DEFAULT_FREQ = Box((-10.0,), (10.0,))
DEFAULT_PSI = Box((-100.0,), (100.0,))


@dataclass
class CheckReport:
    name: str
    passed: bool
    margin: float
    params: dict = field(default_factory=dict)
    details: list = field(default_factory=list)
    control: bool = False

    @property
    def as_expected(self) -> bool:
        """Ordinary checks should pass; negative controls should fail."""
        return self.passed != self.control

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "control": self.control, "params": self.params, "details": self.details}


def _item(label: str, raw: float, tol: float | None = None, **info) -> dict:
    """Scored item; ``tol=None`` marks an exact condition (geometry, counts)."""
    raw = float(raw)
    return {"item": label, "raw_margin": raw,
            "tolerance": None if tol is None else float(tol),
            "ok": bool(raw >= -(tol or 0.0)), **info}


def _flag(label: str, ok: bool, **info) -> dict:
    return _item(label, 0.0 if ok else -1.0, None, **info)


def _normalised(it: dict, T: float) -> float:
    if it["tolerance"] is None:
        return it["raw_margin"]
    return it["raw_margin"] + it["tolerance"] - T


def _report(name: str, items: list, params: dict, T: float, control: bool = False,
            extra: list | None = None) -> CheckReport:
    params = dict(params, tolerance=float(T))
    scored = [it for it in items if "raw_margin" in it]
    if scored:
        margin = min(_normalised(it, T) for it in scored)
        passed = all(it["ok"] for it in scored)
    else:
        margin, passed = -1.0 - T, False
        params["inconclusive"] = True
    return CheckReport(name, bool(passed), float(margin), params, items + (extra or []), control)


def _scheme_candidates(scheme: CutProjectScheme | None, region: Box, cutoff: float):
    if scheme is None:
        return None
    if scheme.m == 0:
        return fourier_candidates(scheme, region, 1.0)
    return fourier_candidates(scheme, region, cutoff)


def sample_frequencies(scheme: CutProjectScheme | None, region: Box, n: int, seed: int,
                       cutoff: float = 2.0) -> np.ndarray:
    """``n`` seeded frequencies including 0: Bragg candidates if a scheme is known."""
    gen = rng(seed)
    cand = _scheme_candidates(scheme, region, cutoff)
    zero = np.zeros((1, region.dim))
    if cand is None:
        pts = region.lo_arr + gen.random((n - 1, region.dim)) * region.extent
    else:
        pool = cand[np.any(np.abs(cand) > TOL, axis=1)]
        pick = gen.choice(len(pool), size=min(n - 1, len(pool)), replace=False)
        pts = pool[np.sort(pick)]
    return unique_rows(np.vstack([zero, pts]))


def _noise(ests, scheme, region: Box, seed: int, avoid=None) -> float:
    """Largest noise floor over ``ests`` at shared off-candidate frequencies."""
    if avoid is None:
        avoid = _scheme_candidates(scheme, region, 2.0)
        if avoid is None:
            avoid = np.zeros((1, region.dim))
    res = max(e.resolution for e in ests)
    floors = [noise_floor(e, region, avoid, NOISE_CLEARANCE * res, seed=seed)[0] for e in ests]
    return float(max(floors))


def _dual_set(ps: PointSet, eps: float, region: Box, scheme, diff_radius: float) -> CharacterSet:
    dset = difference_set(ps, diff_radius)
    cand = _scheme_candidates(scheme, region, eps)
    return epsilon_dual_set(dset, eps, region, candidates=cand)


def _base_params(ps: PointSet, estimator: str, seed: int) -> dict:
    return {"n_points": len(ps), "patch": ps.region.to_dict(), "estimator": estimator,
            "seed": seed}


# ---------------------------------------------------------------------------
# Uniform bound on peak shifts by epsilon-dual characters


def check_s31(ps: PointSet, eps: float, chi_samples=None, *, scheme=None, psi=None,
              psi_region: Box = DEFAULT_PSI, diff_radius: float = 50.0,
              estimator: str = "structure_factor", seed: int = 0, n_samples: int = 50,
              control: bool = False, name: str = "S31") -> CheckReport:
    """``|I(psi + chi) - I(chi)| <= C eps`` for ``psi`` in the eps-dual set, ``C = I(0)``.

    Passing ``psi`` explicitly skips the dual-set computation (used by the negative
    control).  Without nonzero ``psi`` the report is inconclusive (not passed).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    est = IntensityEstimator(ps, ps.region, estimator)
    C = float(est(np.zeros((1, ps.dim)))[0])
    if chi_samples is None:
        freq = DEFAULT_FREQ if ps.dim == 1 else Box.centered(20.0, ps.dim)
        chi_samples = sample_frequencies(scheme, freq, n_samples, seed)
    chis = as_points(chi_samples, ps.dim)
    if psi is None:
        dual = _dual_set(ps, eps, psi_region if ps.dim == 1 else Box.centered(40.0, ps.dim),
                         scheme, diff_radius)
        psis, devs = dual.members, dual.max_deviation
    else:
        psis = as_points(psi, ps.dim)
        devs = character_deviations(psis, difference_set(ps, diff_radius))
    nz = np.any(np.abs(psis) > TOL, axis=1)
    psis, devs = psis[nz], devs[nz]
    region = Box(tuple(chis.min(axis=0) - 1), tuple(chis.max(axis=0) + 1))
    noise = _noise([est], scheme, region, seed)
    T = NOISE_FACTOR * noise
    base = est(chis)
    items = []
    for p, dv in zip(psis, devs):
        shifted = est(chis + p)
        worst = float(np.max(np.abs(shifted - base)))
        items.append(_item("shift", C * eps - worst, T, psi=p.tolist(), deviation=float(dv),
                           max_change=worst))
    params = _base_params(ps, estimator, seed)
    params.update(eps=eps, C=C, bound=C * eps, diff_radius=diff_radius, noise_floor=noise,
                  n_samples=int(len(chis)), n_psi=int(len(psis)))
    return _report(name, items, params, T, control)


def adversarial_psi(ps: PointSet, *, diff_radius: float = 50.0, estimator="structure_factor",
                    min_deviation: float = 1.9) -> np.ndarray:
    """A frequency with character deviation ``>= min_deviation`` and a weak peak there."""
    est = IntensityEstimator(ps, ps.region, estimator)
    dset = difference_set(ps, diff_radius)
    i0 = est(np.zeros((1, ps.dim)))[0]
    trial = np.arange(1, 257)[:, None] / 256.0 * np.ones((1, ps.dim))
    trial = trial + 0.5 / 256  # keep off the dyadic grid, which lattices like
    dev = character_deviations(trial, dset)
    vals = est(trial)
    ok = np.flatnonzero((dev >= min_deviation) & (vals <= 0.1 * i0))
    if len(ok) == 0:
        raise ValueError("no adversarial frequency found")
    return trial[ok[np.argmax(dev[ok])]]


def check_s31_control(ps: PointSet, eps: float, chi_samples=None, **kw) -> CheckReport:
    """S31 with a frequency far outside the eps-dual set; the bound should break."""
    psi = adversarial_psi(ps, diff_radius=kw.get("diff_radius", 50.0))
    return check_s31(ps, eps, chi_samples, psi=psi, control=True, name="S31.control", **kw)


def check_aperms_i(ps: PointSet, eps: float, *, scheme=None, region: Box = DEFAULT_FREQ,
                   diff_radius: float = 50.0, estimator="structure_factor",
                   seed: int = 0) -> CheckReport:
    """Every eps-dual member in ``region`` carries a peak ``>= (1 - eps) I(0)``."""
    est = IntensityEstimator(ps, ps.region, estimator)
    i0 = float(est(np.zeros((1, ps.dim)))[0])
    dual = _dual_set(ps, eps, region, scheme, diff_radius)
    noise = _noise([est], scheme, region, seed)
    T = NOISE_FACTOR * noise
    vals = est(dual.members)
    items = [_item("peak", v - (1 - eps) * i0, T, chi=c.tolist(), intensity=float(v))
             for c, v in zip(dual.members, vals)]
    params = _base_params(ps, estimator, seed)
    params.update(eps=eps, i_zero=i0, region=region.to_dict(), diff_radius=diff_radius,
                  noise_floor=noise, n_members=int(len(dual)))
    return _report("aperMS.i", items, params, T)


# ---------------------------------------------------------------------------
# Visible peaks form a Meyer set


def _covering_in(pts: np.ndarray, region: Box) -> float:
    if len(pts) >= 2:
        return covering_radius(PointSet(region.dim, pts, region))
    corners = np.array(np.meshgrid(*zip(region.lo, region.hi), indexing="ij")).reshape(region.dim, -1).T
    return float(np.linalg.norm(corners - pts[0], axis=1).max())


def check_visible_meyer(ps: PointSet, a: float, *, scheme=None, freq_region: Box = DEFAULT_FREQ,
                        dual_scale: float = 5.0, diff_radius: float = 50.0, cutoff: float = 2.0,
                        estimator: str = "structure_factor", sep_min: float = 1e-3,
                        cover_max: float | None = None, seed: int = 0, control: bool = False,
                        name: str = "visible") -> CheckReport:
    """Inclusion chain ``Delta^eps ⊆ I_a ⊆ Delta^eps + F`` on candidates, plus a certificate.

    ``eps = min(a, I0 - a) / (2C + 1)`` with ``C = I0``, ``b = a - C eps`` and
    ``F = {phi - psi in K : I(phi - psi) >= b}`` where ``K`` is the sup-norm box whose
    translates by the dual set cover the frequency region.  The dual set is computed
    on ``freq_region`` scaled by ``dual_scale`` so that these translates reach it.

    The certificate asks for ``min_sep(I_a) >= sep_min`` and a covering radius of
    ``I_a`` within ``cover_max``.  The default bound is the covering radius of
    ``Delta^eps``: the dual set lies inside ``I_a``, so ``I_a`` cannot be sparser.
    """
    est = IntensityEstimator(ps, ps.region, estimator)
    i0 = float(est(np.zeros((1, ps.dim)))[0])
    if not 0 < a < i0:
        raise ValueError(f"a={a} must lie in (0, I(0)={i0:.6g})")
    C = i0
    eps = min(a, i0 - a) / (2 * C + 1)
    b = a - C * eps
    wide = freq_region.scaled(dual_scale)
    dual = _dual_set(ps, eps, wide, scheme, diff_radius)
    psis = dual.members
    rho = _covering_in(psis, wide.shrink(wide.extent / 4))
    K = Box.centered(2 * rho + 2 * TOL, ps.dim)
    if cover_max is None:
        cover_max = rho

    cand = _scheme_candidates(scheme, freq_region, cutoff)
    if cand is None:
        cand = grid_candidates(freq_region, 1.0 / (4 * float(ps.region.extent.min())))
    noise = _noise([est], scheme, freq_region, seed, avoid=cand)
    T = NOISE_FACTOR * noise
    vals = est(cand)
    Ia, Ia_vals = cand[vals >= a], vals[vals >= a]

    items = []
    inside = psis[freq_region.contains(psis)]
    pv = est(inside)
    for p, v in zip(inside, pv):
        items.append(_item("dual.peak", v - (1 - eps) * i0, T, chi=p.tolist(), intensity=float(v)))
        items.append(_item("dual.in_Ia", v - a, T, chi=p.tolist()))
        items.append(_flag("dual.is_candidate", bool(match_rows(p[None, :], cand)[0] >= 0),
                           chi=p.tolist()))
    F_parts = []
    for phi in Ia:
        diffs = phi - psis
        diffs = diffs[K.contains(diffs)]
        if len(diffs) == 0:
            items.append(_flag("cover", False, chi=phi.tolist()))
            continue
        dv = est(diffs)
        keep = dv >= b - T
        F_parts.append(diffs[keep])
        items.append(_item("cover", float(dv.max() - b), T, chi=phi.tolist()))
    F = unique_rows(np.vstack(F_parts)) if F_parts else np.zeros((0, ps.dim))
    # Re-check the inclusion exhaustively with the finished F.
    if len(F) and len(Ia):
        sums = (psis[:, None, :] + F[None, :, :]).reshape(-1, ps.dim)
        missing = int(np.sum(match_rows(Ia, sums) < 0))
    else:
        missing = int(len(Ia))
    items.append(_item("Ia_subset_dual_plus_F", -missing, None, n_missing=missing))
    sep = min_separation(PointSet(ps.dim, Ia, freq_region)) if len(Ia) >= 2 else float("nan")
    if len(Ia) >= 2:
        items.append(_item("Ia.min_sep", sep - sep_min, None, min_sep=sep))
    cov = _covering_in(Ia, freq_region) if len(Ia) else float("nan")
    items.append(_item("Ia.covering_radius", cover_max - cov if len(Ia) else -cover_max, None,
                       covering_radius=cov))
    params = _base_params(ps, estimator, seed)
    params.update(a=float(a), i_zero=i0, C=C, eps=float(eps), b=float(b), K_half_width=rho, n_dual=int(len(psis)),
                  n_Ia=int(len(Ia)), n_F=int(len(F)), F=F.tolist(), freq_region=freq_region.to_dict(),
                  dual_region=wide.to_dict(), diff_radius=diff_radius, noise_floor=noise,
                  sep_min=sep_min, cover_max=cover_max)
    return _report(name, items, params, T, control)


def check_visible_control(ps: PointSet, a_frac: float = 0.5, *, seed: int = 0, **kw) -> CheckReport:
    """Same chain on uniformly random points of the same count: no relatively dense peaks."""
    gen = rng(seed)
    pts = ps.region.lo_arr + gen.random((len(ps), ps.dim)) * ps.region.extent
    rnd = build_pointset(ps.dim, pts, ps.region)
    i0 = IntensityEstimator(rnd, rnd.region, "structure_factor")(np.zeros((1, ps.dim)))[0]
    return check_visible_meyer(rnd, a_frac * i0, seed=seed, control=True, name="visible.control", **kw)


def check_band_meyer(ps: PointSet, b: float, a: float, *, scheme=None,
                     freq_region: Box = DEFAULT_FREQ, cutoff: float = 2.0,
                     diff_radius: float = 50.0, estimator="structure_factor", sep_min=1e-3,
                     seed: int = 0) -> CheckReport:
    """Peaks with ``b < I < a``: uniformly discrete and stable under ``Delta^eps`` shifts.

    ``eps = (a - b) / 4``.  For every band peak ``phi`` and nonzero ``psi`` in the
    dual set, ``|I(phi + psi) - I(phi)| <= C eps`` must hold; this is what keeps the
    band relatively dense along the dual set.
    """
    if not 0 < b < a:
        raise ValueError("need 0 < b < a")
    est = IntensityEstimator(ps, ps.region, estimator)
    C = float(est(np.zeros((1, ps.dim)))[0])
    eps = min((a - b) / 4, 0.99)
    cand = _scheme_candidates(scheme, freq_region, cutoff)
    if cand is None:
        cand = grid_candidates(freq_region, 1.0 / (4 * float(ps.region.extent.min())))
    vals = est(cand)
    band = cand[(vals > b) & (vals < a)]
    dual = _dual_set(ps, eps, DEFAULT_PSI if ps.dim == 1 else Box.centered(40.0, ps.dim),
                     scheme, diff_radius)
    psis = dual.members[np.any(np.abs(dual.members) > TOL, axis=1)]
    noise = _noise([est], scheme, freq_region, seed, avoid=cand)
    T = NOISE_FACTOR * noise
    items = []
    if len(band) and len(psis):
        base = est(band)
        for p in psis:
            worst = float(np.max(np.abs(est(band + p) - base)))
            items.append(_item("band.shift", C * eps - worst, T, psi=p.tolist()))
    if len(band) >= 2:
        sep = min_separation(PointSet(ps.dim, band, freq_region))
        items.append(_item("band.min_sep", sep - sep_min, None, min_sep=sep))
    params = _base_params(ps, estimator, seed)
    params.update(a=float(a), b=float(b), eps=float(eps), C=C, n_band=int(len(band)), n_psi=int(len(psis)),
                  noise_floor=noise)
    return _report("aperMS.v", items, params, T)


# ---------------------------------------------------------------------------
# Deformations


def _window_for(ps: PointSet) -> float:
    return float(ps.region.extent.min()) / 10


def _density(pts: np.ndarray, region: Box, window: float) -> tuple[float, float]:
    if len(pts) == 0:
        return 0.0, 0.0
    d = density_bounds(PointSet(region.dim, pts, region), window)
    return d.lower, d.upper


def check_l2112(sup: PointSet, sub: PointSet, chi_samples, *, scheme=None, seed: int = 0,
                estimator: str = "structure_factor", control: bool = False,
                name: str = "L2112") -> CheckReport:
    """``|I_sup(chi) - I_sub(chi)| <= I_sup(0) - I_sub(0)`` for a subset ``sub`` of ``sup``."""
    if sup.region != sub.region:
        raise ValueError("point sets live on different regions")
    chis = as_points(chi_samples, sup.dim)
    e1 = IntensityEstimator(sup, sup.region, estimator)
    e2 = IntensityEstimator(sub, sub.region, estimator)
    zero = np.zeros((1, sup.dim))
    gap0 = float(e1(zero)[0] - e2(zero)[0])
    region = Box(tuple(chis.min(axis=0) - 1), tuple(chis.max(axis=0) + 1))
    noise = _noise([e1, e2], scheme, region, seed)
    T = NOISE_FACTOR * noise
    diff = np.abs(e1(chis) - e2(chis))
    k = int(np.argmax(diff))
    items = [_item("L2112", gap0 - float(diff[k]), T, worst_chi=chis[k].tolist(),
                   max_change=float(diff[k]), origin_gap=gap0)]
    params = {"n_sup": len(sup), "n_sub": len(sub), "n_samples": int(len(chis)),
              "noise_floor": noise, "estimator": estimator, "seed": seed}
    return _report(name, items, params, T, control)


def check_l2112_control(ps: PointSet, chi_samples, *, sigma: float = 0.1, seed: int = 0,
                        **kw) -> CheckReport:
    """L2112 against a jittered copy, which is not a subset: the bound should break."""
    gen = rng(seed)
    pts = ps.points + sigma * gen.standard_normal(ps.points.shape)
    pts = np.clip(pts, ps.region.lo_arr, ps.region.hi_arr)
    jit = build_pointset(ps.dim, pts, ps.region)
    return check_l2112(ps, jit, chi_samples, seed=seed, control=True, name="L2112.control", **kw)


def check_deformation(lam: PointSet, gam: PointSet, *, scheme=None, eps: float = 0.05,
                      window: float | None = None, chi_samples=None, n_samples: int = 50,
                      persist_region: Box = DEFAULT_PSI, diff_radius: float = 50.0,
                      density_tol: float = 0.01, estimator: str = "structure_factor",
                      seed: int = 0, name: str = "deform") -> CheckReport:
    """Diffraction inequalities for a deformation ``gam`` of ``lam`` (same region).

    Items: the subset inequality for ``N = lam ∩ gam`` inside ``lam`` and ``gam``;
    ``dens_lower^2 <= I(0) <= dens_upper^2`` for ``lam``, ``gam`` and ``N``; when
    ``2 I_N(0) > I_gam(0)`` every eps-dual member of ``lam`` keeps a peak in ``gam``,
    where ``eps`` is capped below ``(2 I_N(0) - I_gam(0)) / I_N(0)``; and the density
    condition ``dens_upper(lam △ gam) < (sqrt2 dens_lower(lam) - dens_upper(lam)) / (sqrt2 + 1)``.
    That condition is sufficient only: when it fails, its conclusion is recorded as
    untested rather than asserted false.
    """
    if lam.region != gam.region:
        raise ValueError("deformation must live on the same region as the original")
    region = lam.region
    Npts = lam.points[match_rows(lam.points, gam.points) >= 0]
    if len(Npts) == 0:
        raise ValueError("lam and gam have no common points")
    N = PointSet(lam.dim, Npts, region)
    sym = symmetric_difference(lam, gam)
    window = window or _window_for(lam)
    if chi_samples is None:
        freq = DEFAULT_FREQ if lam.dim == 1 else Box.centered(20.0, lam.dim)
        chi_samples = sample_frequencies(scheme, freq, n_samples, seed)
    chis = as_points(chi_samples, lam.dim)
    zero = np.zeros((1, lam.dim))
    est = {k: IntensityEstimator(v, region, estimator) for k, v in (("lam", lam), ("gam", gam), ("N", N))}
    I0 = {k: float(e(zero)[0]) for k, e in est.items()}
    noise_region = Box(tuple(chis.min(axis=0) - 1), tuple(chis.max(axis=0) + 1))
    noise = _noise(list(est.values()), scheme, noise_region, seed)
    T = NOISE_FACTOR * noise
    items, info = [], []

    vals = {k: e(chis) for k, e in est.items()}
    for big in ("lam", "gam"):
        diff = np.abs(vals[big] - vals["N"])
        items.append(_item(f"L2112.{big}", I0[big] - I0["N"] - float(diff.max()), T,
                           max_change=float(diff.max())))

    dens = {k: _density(p.points, region, window) for k, p in (("lam", lam), ("gam", gam), ("N", N))}
    for k, (lo, hi) in dens.items():
        items.append(_item(f"density.lower.{k}", I0[k] - lo ** 2, density_tol, i_zero=I0[k], dens_lower=lo))
        items.append(_item(f"density.upper.{k}", hi ** 2 - I0[k], density_tol, i_zero=I0[k], dens_upper=hi))

    # Density form of the persistence hypothesis: sqrt2 dens_lower(N) > dens_upper(gam).
    finalj = bool(np.sqrt(2) * dens["N"][0] > dens["gam"][1])
    origin_cond = bool(2 * I0["N"] > I0["gam"])
    if finalj:
        items.append(_flag("finalj_implies_origin_condition", origin_cond))
    else:
        info.append({"item": "finalj", "holds": False})

    persisted = None
    eps_used = None
    if origin_cond:
        eps_max = (2 * I0["N"] - I0["gam"]) / I0["N"]
        eps_used = min(eps, 0.5 * eps_max)
        dual = _dual_set(lam, eps_used, persist_region if lam.dim == 1 else Box.centered(40.0, lam.dim),
                         scheme, diff_radius)
        pv = est["gam"](dual.members)
        predicted = 2 * I0["N"] - I0["gam"] - eps_used * I0["N"]
        for c, v in zip(dual.members, pv):
            items.append(_item("persist", float(v) - T, None, chi=c.tolist(), intensity=float(v),
                               predicted_lower=predicted))
        persisted = bool(np.all(pv > T))
    else:
        info.append({"item": "persist", "status": "untested", "reason": "2 I_N(0) <= I_gam(0)"})

    lo_l, hi_l = dens["lam"]
    sym_hi = _density(sym, region, window)[1]
    threshold = (np.sqrt(2) * lo_l - hi_l) / (np.sqrt(2) + 1)
    condition = bool(sym_hi < threshold)
    if condition:
        conclusion = "held" if persisted else "failed"
        items.append(_flag("dens.conclusion", bool(persisted), condition=True,
                           sym_dens_upper=sym_hi, threshold=float(threshold)))
    else:
        conclusion = "untested"
        info.append({"item": "dens", "condition": False, "conclusion": "untested",
                     "sym_dens_upper": sym_hi, "threshold": float(threshold)})

    params = _base_params(lam, estimator, seed)
    params.update(n_gam=len(gam), n_common=len(N), sym_diff=int(len(sym)),
                  sym_ratio=float(len(sym) / len(lam)), window=window, noise_floor=noise,
                  density_tol=density_tol, i_zero=I0, eps=eps_used, origin_condition=origin_cond,
                  finalj_condition=finalj, dens_condition=condition, dens_threshold=float(threshold),
                  dens_sym_upper=sym_hi, dens_conclusion=conclusion)
    return _report(name, items, params, T, extra=info)


# ---------------------------------------------------------------------------
# Finitely valued combs with a period lattice


def _level_sets(mu: WeightedComb) -> list[tuple[complex, np.ndarray]]:
    w = np.column_stack([mu.weights.real, mu.weights.imag])
    order, labels = cluster_rows(w, 1e-9)
    out = []
    for lab in range(labels[-1] + 1 if len(labels) else 0):
        idx = np.sort(order[labels == lab])
        out.append((complex(mu.weights[idx[0]]), mu.positions[idx]))
    return out


def _residues(pts: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Representatives of ``pts`` modulo the lattice in the cell ``basis @ [0, 1)^d``."""
    c = np.linalg.solve(basis, pts.T).T
    frac = c - np.floor(c + 1e-9)
    frac[np.abs(frac - 1) < 1e-9] = 0.0
    return unique_rows(frac @ basis.T, 1e-7)


def _translate_cover(F: np.ndarray, basis: np.ndarray, region: Box) -> np.ndarray:
    if len(F) == 0:
        return F
    parts = []
    for f in F:
        shifted = region.translated(-f)
        try:
            patch = generate_lattice_patch(basis, shifted)
        except ValueError:
            continue
        parts.append(patch.points + f)
    return np.vstack(parts) if parts else np.zeros((0, region.dim))


def _local_maxima_1d(v: np.ndarray) -> np.ndarray:
    inner = (v[1:-1] >= v[:-2]) & (v[1:-1] >= v[2:])
    return np.flatnonzero(inner) + 1


def check_lattice_case(mu: WeightedComb, *, expect: str | None = None,
                       candidate_radius: float | None = None, seed: int = 0,
                       control: bool = False, name: str = "lattice") -> CheckReport:
    """Period lattice of a finitely valued comb and its level-set decomposition.

    Candidate periods are the nonzero differences of the support up to
    ``candidate_radius`` (default a quarter of the shortest side, at most 32), since
    any period must be one.  When a lattice ``L`` is found, each level set is
    decomposed as ``F_i + L`` with ``F_i`` its residues in the cell ``[0, 1)^d``
    spanned by the basis, and this is re-checked point by point on the patch.  The
    diffraction is then scanned on a fine grid and every clear local maximum must
    sit on the dual lattice.  ``expect`` is ``"periodic"``, ``"aperiodic"`` or None.
    """
    if expect not in (None, "periodic", "aperiodic"):
        raise ValueError("expect must be 'periodic', 'aperiodic' or None")
    thr = period_threshold(mu)
    eps = thr / 2
    R = candidate_radius or min(float(mu.region.extent.min()) / 4, 32.0)
    sup = PointSet(mu.dim, mu.positions, mu.region)
    cands = difference_set(sup, R).points
    pos = cands[:, 0] > TOL
    if mu.dim == 2:
        pos |= (np.abs(cands[:, 0]) <= TOL) & (cands[:, 1] > TOL)
    cands = cands[pos]
    lat = extract_period_lattice(mu, eps, cands) if len(cands) else None
    items, info = [], []
    verdict = "periodic" if lat is not None else "aperiodic"
    if expect is not None:
        items.append(_flag("verdict", verdict == expect, verdict=verdict, expected=expect))
    else:
        info.append({"item": "verdict", "verdict": verdict})
    params = {"n_atoms": len(mu), "threshold": thr, "eps": eps, "candidate_radius": R,
              "n_candidates": int(len(cands)), "verdict": verdict, "seed": seed}
    if lat is not None:
        B = lat.basis
        params["basis"] = B.tolist()
        levels = []
        for value, pts in _level_sets(mu):
            F = _residues(pts, B)
            rebuilt = _translate_cover(F, B, mu.region)
            rebuilt = rebuilt[mu.region.contains(rebuilt)] if len(rebuilt) else rebuilt
            miss = int(np.sum(match_rows(pts, rebuilt) < 0)) if len(rebuilt) else len(pts)
            extra = int(np.sum(match_rows(rebuilt, pts) < 0)) if len(rebuilt) else 0
            items.append(_item("decomposition", -(miss + extra), None,
                               weight=[value.real, value.imag], F=F.tolist(), missing=miss, extra=extra))
            levels.append({"weight": [value.real, value.imag], "F": F.tolist()})
        params["levels"] = levels
        if mu.dim == 1:
            items.append(_spectrum_support_item(mu, B))
    return _report(name, items, params, 0.0, control, extra=info)


def _spectrum_support_item(mu: WeightedComb, B: np.ndarray) -> dict:
    """Clear diffraction maxima of a 1-d periodic comb lie on the dual lattice."""
    L = float(mu.region.extent[0])
    dual = float(np.linalg.inv(B).T[0, 0])
    span = 2.5 * abs(dual)
    step = 1.0 / (8 * L)
    grid = grid_candidates(Box((-span,), (span,)), step)
    est = IntensityEstimator(mu, mu.region, "structure_factor")
    vals = est(grid)
    peaks = _local_maxima_1d(vals)
    strong = peaks[vals[peaks] >= 0.02 * vals.max()]
    chi = grid[strong, 0]
    off = np.abs(chi / dual - np.round(chi / dual)) * abs(dual)
    stray = int(np.sum(off > 3.0 / L))
    return _item("spectrum_on_dual_lattice", -stray, None, dual_basis=dual,
                 n_maxima=int(len(chi)), stray=stray)


# ---------------------------------------------------------------------------
# Suites


def default_params() -> dict:
    return {"seed": 0, "fib_points": 10000, "z_points": 10000, "eps": 0.1, "eps_persist": 0.05,
            "thin_fraction": 0.1, "heavy_fraction": 0.5, "a_fraction": 0.5,
            "diff_radius": 50.0, "n_samples": 50, "lattice_size": 100}


SUITES = ("s31", "visible", "deform", "lattice", "all")


class _Inputs:
    """Lazily built preset inputs shared between the checks of a suite run."""

    def __init__(self, p: dict):
        self.p = p
        self._cache: dict = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def fib(self) -> PointSet:
        return self._get("fib", lambda: generate_fibonacci(int(self.p["fib_points"])))

    @property
    def zset(self) -> PointSet:
        n = int(self.p["z_points"])
        return self._get("z", lambda: build_pointset(1, np.arange(n, dtype=float), Box((0.0,), (float(n),))))

    def thinned(self, frac: float) -> PointSet:
        def make():
            remove = thin(self.fib, frac, int(self.p["seed"]))
            return deform(self.fib, remove, ())[0]
        return self._get(("thin", frac), make)


def run_suite(suite: str = "all", params: dict | None = None) -> list[CheckReport]:
    """Run a named group of checks on the preset inputs."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r} (choose from {SUITES})")
    p = dict(default_params(), **(params or {}))
    seed, eps, R = int(p["seed"]), float(p["eps"]), float(p["diff_radius"])
    n_s = int(p["n_samples"])
    inp = _Inputs(p)
    fib_s, z_s = fibonacci_scheme(), integer_scheme(1)
    groups = [suite] if suite != "all" else ["s31", "visible", "deform", "lattice"]
    out: list[CheckReport] = []
    for g in groups:
        if g == "s31":
            chis = sample_frequencies(fib_s, DEFAULT_FREQ, n_s, seed)
            out.append(check_s31(inp.fib, eps, chis, scheme=fib_s, diff_radius=R, seed=seed))
            out.append(check_s31(inp.zset, eps, sample_frequencies(z_s, DEFAULT_FREQ, n_s, seed),
                                 scheme=z_s, diff_radius=R, seed=seed, name="S31.zd"))
            out.append(check_aperms_i(inp.fib, eps, scheme=fib_s, diff_radius=R, seed=seed))
            out.append(check_s31_control(inp.fib, eps, chis, scheme=fib_s, diff_radius=R, seed=seed))
        elif g == "visible":
            i0 = IntensityEstimator(inp.fib, inp.fib.region, "structure_factor")(np.zeros((1, 1)))[0]
            a = float(p["a_fraction"]) * i0
            out.append(check_visible_meyer(inp.fib, a, scheme=fib_s, diff_radius=R, seed=seed,
                                           cover_max=5.0))
            out.append(check_visible_meyer(inp.fib, 0.999 * i0, scheme=fib_s, diff_radius=R,
                                           seed=seed, name="visible.high"))
            out.append(check_visible_meyer(inp.zset, 0.5, scheme=z_s, diff_radius=R, seed=seed,
                                           name="visible.zd"))
            out.append(check_band_meyer(inp.fib, 0.1 * i0, 0.9 * i0, scheme=fib_s,
                                        diff_radius=R, seed=seed))
            out.append(check_visible_control(inp.fib, float(p["a_fraction"]), scheme=fib_s,
                                             diff_radius=R, seed=seed, cover_max=5.0))
        elif g == "deform":
            kw = dict(scheme=fib_s, eps=float(p["eps_persist"]), diff_radius=R, seed=seed,
                      n_samples=n_s)
            out.append(check_deformation(inp.fib, inp.fib, name="deform.identity", **kw))
            out.append(check_deformation(inp.fib, inp.thinned(float(p["thin_fraction"])),
                                         name="deform.thin", **kw))
            out.append(check_deformation(inp.fib, inp.thinned(float(p["heavy_fraction"])),
                                         name="deform.heavy", **kw))
            chis = sample_frequencies(fib_s, DEFAULT_FREQ, n_s, seed)
            out.append(check_l2112_control(inp.fib, chis, scheme=fib_s, seed=seed))
        elif g == "lattice":
            n = int(p["lattice_size"])
            out.append(check_lattice_case(two_level_comb(n), expect="periodic", seed=seed,
                                          name="lattice.two_level"))
            out.append(check_lattice_case(two_level_comb(n, second=None), expect="periodic",
                                          seed=seed, name="lattice.zd"))
            out.append(check_lattice_case(WeightedComb.from_pointset(inp.fib), expect="aperiodic",
                                          seed=seed, name="lattice.fibonacci"))
            out.append(check_lattice_case(defect_comb(n), expect="periodic", seed=seed,
                                          control=True, name="lattice.control"))
    return out


def two_level_comb(n: int = 100, shift: float = 0.3, second: float | None = 2.0) -> WeightedComb:
    """``1 * delta_Z + second * delta_{Z + shift}`` on ``[-n/2, n/2]``."""
    h = n // 2
    z = np.arange(-h, h + 1, dtype=float)
    region = Box((-float(h),), (float(h),))
    if second is None:
        return WeightedComb(1, z, np.ones(len(z)), region)
    s = np.arange(-h, h, dtype=float) + shift
    return WeightedComb(1, np.concatenate([z, s]),
                        np.concatenate([np.ones(len(z)), second * np.ones(len(s))]), region)


def defect_comb(n: int = 100, missing: float = 7.0) -> WeightedComb:
    """``delta_Z`` on ``[-n/2, n/2]`` with the atom at ``missing`` removed."""
    h = n // 2
    z = np.arange(-h, h + 1, dtype=float)
    z = z[np.abs(z - missing) > 0.5]
    return WeightedComb(1, z, np.ones(len(z)), Box((-float(h),), (float(h),)))


def count_failures(reports) -> int:
    """Checks that did not behave as expected (failed checks, passing controls)."""
    return int(sum(not r.as_expected for r in reports))
