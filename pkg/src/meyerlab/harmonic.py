"""epsilon-dual character sets, sup-norm distances, almost periods, period lattices."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
from scipy.optimize import minimize_scalar

from ._util import TOL, as_points, chunked_map, cluster_rows, frac_phase, lexsort_rows, match_rows, unique_rows
from .autocorr import WeightedComb
from .cutproject import EmbeddingLattice
from .pointset import DISCRETE_THRESHOLD, Box, PointSet

#: Largest weight / position mismatch for a translation to count as an exact period.
PERIOD_TOL = 1e-9


def _dset_points(dset) -> np.ndarray:
    pts = dset.points if isinstance(dset, PointSet) else as_points(dset)
    if len(pts) == 0:
        raise ValueError("empty difference set")
    return pts


def character_deviations(chis, dset) -> np.ndarray:
    """``max_x |1 - e^{-2 pi i x.chi}|`` over ``x`` in ``dset`` for each row of ``chis``.

    Uses ``|1 - e^{-2 pi i t}| = 2 |sin(pi t)|`` with ``t`` reduced to ``[-1/2, 1/2]``,
    which makes the value exactly even in ``chi``.
    """
    pts = _dset_points(dset)
    chis = as_points(chis, pts.shape[1])
    block = max(1, (1 << 22) // len(pts))

    def one(ch):
        return 2 * np.sin(np.pi * np.abs(frac_phase(pts, ch))).max(axis=1)

    return chunked_map(one, chis, block)


def character_deviation(chi, dset) -> float:
    pts = _dset_points(dset)
    return float(character_deviations(as_points(chi, pts.shape[1])[:1], pts)[0])


@dataclass(frozen=True)
class CharacterSet:
    """Frequencies whose character stays within ``eps`` of 1 on a truncated difference set.

    Membership is certified only on the finite truncation, so the set over-approximates
    the true epsilon-dual set; it can only shrink as ``truncation_radius`` grows.
    """

    dim: int
    eps: float
    truncation_radius: float
    members: np.ndarray = field(repr=False)
    max_deviation: np.ndarray = field(repr=False)
    freq_region: Box
    method: str = "candidates"

    def __len__(self) -> int:
        return len(self.max_deviation)

    def contains(self, chi) -> np.ndarray:
        return match_rows(as_points(chi, self.dim), self.members) >= 0

    def as_pointset(self) -> PointSet:
        return PointSet(self.dim, self.members, self.freq_region)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "eps": self.eps, "truncation_radius": self.truncation_radius,
                "freq_region": self.freq_region.to_dict(), "method": self.method,
                "members": [{"chi": c.tolist(), "deviation": float(v)}
                            for c, v in zip(self.members, self.max_deviation)]}

    @classmethod
    def from_dict(cls, d: dict) -> "CharacterSet":
        dim = int(d.get("dim", 1))
        mem = d["members"]
        return cls(dim, float(d["eps"]), float(d["truncation_radius"]),
                   np.array([m["chi"] for m in mem], dtype=float).reshape(-1, dim),
                   np.array([m["deviation"] for m in mem], dtype=float),
                   Box.from_dict(d["freq_region"]), d.get("method", "candidates"))


def _symmetrise(chis: np.ndarray, region: Box) -> np.ndarray:
    both = np.vstack([chis, -chis])
    both = both[region.contains(both)]
    both[np.all(np.abs(both) <= TOL, axis=1)] = 0.0
    return unique_rows(both)


def _grid_members(pts: np.ndarray, eps: float, region: Box, step: float):
    """1-d grid scan for ``deviation <= eps``, one refined representative per run."""
    lo, hi = region.lo[0], region.hi[0]
    k = np.arange(np.ceil(lo / step), np.floor(hi / step) + 1)
    grid = k * step
    dev = character_deviations(grid, pts)
    ok = dev <= eps
    members = []
    if not ok.any():
        return np.zeros((0, 1))
    edges = np.flatnonzero(np.diff(np.concatenate([[0], ok.astype(int), [0]])))
    for a, b in zip(edges[::2], edges[1::2] - 1):
        if grid[b] < -TOL:
            continue  # the mirror image of a positive run
        if grid[a] <= TOL and grid[b] >= -TOL:
            members.append(0.0)  # the run around the origin
            continue
        res = minimize_scalar(lambda t: character_deviation(t, pts), method="bounded",
                              bounds=(grid[a] - step, grid[b] + step), options={"xatol": 1e-13})
        best = res.x if res.fun <= dev[a:b + 1].min() else grid[a + int(np.argmin(dev[a:b + 1]))]
        members.append(float(best))
    return np.array(members).reshape(-1, 1)


def epsilon_dual_set(dset, eps: float, freq_region: Box, candidates=None,
                     grid_step: float | None = None) -> CharacterSet:
    """Frequencies in ``freq_region`` with ``character_deviation <= eps`` on ``dset``.

    With ``candidates`` (e.g. projected dual-lattice points) the candidates are
    filtered.  Otherwise a uniform grid is scanned (1-d only; default step
    ``eps / (8 pi R)`` with ``R`` the largest ``|x|`` in ``dset``) and every run of
    passing grid points is reduced to the deviation minimiser inside it.  The output
    is closed under ``chi -> -chi`` and contains 0 whenever the region does.
    """
    if not 0 < eps < 2:
        raise ValueError("eps must lie in (0, 2)")
    pts = _dset_points(dset)
    dim = pts.shape[1]
    if freq_region.dim != dim:
        raise ValueError("freq_region dimension mismatch")
    radius = float(np.linalg.norm(pts, axis=1).max())
    if candidates is not None:
        cand = as_points(candidates, dim)
        if len(cand) == 0:
            raise ValueError("empty candidate list")
        cand = cand[freq_region.contains(cand)]
        keep = cand[character_deviations(cand, pts) <= eps] if len(cand) else cand
        method = "candidates"
    else:
        if dim != 1:
            raise ValueError("grid fallback is implemented for dim == 1; pass candidates")
        step = grid_step if grid_step is not None else eps / (2 * np.pi * max(radius, TOL) * 4)
        if step <= 0:
            raise ValueError("grid_step must be positive")
        keep = _grid_members(pts, eps, freq_region, step)
        method = f"grid:{step!r}"
    origin = np.zeros((1, dim))
    if freq_region.contains(origin)[0]:
        keep = np.vstack([keep, origin])
    members = _symmetrise(keep, freq_region) if len(keep) else keep
    dev = character_deviations(members, pts) if len(members) else np.zeros(0)
    return CharacterSet(dim, float(eps), radius, members, dev, freq_region, method)


def sup_distance(mu: WeightedComb, nu: WeightedComb) -> float:
    """``sup_x |mu({x}) - nu({x})|`` over the union of the supports."""
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    if len(mu) == 0 and len(nu) == 0:
        return 0.0
    idx = match_rows(mu.positions, nu.positions)
    hit = idx >= 0
    d_mu = np.abs(mu.weights - np.where(hit, nu.weights[np.maximum(idx, 0)], 0))
    matched = np.zeros(len(nu), dtype=bool)
    matched[idx[hit]] = True
    d_nu = np.abs(nu.weights[~matched])
    return float(max(d_mu.max(initial=0.0), d_nu.max(initial=0.0)))


def translation_distance(mu: WeightedComb, t, *, min_overlap: float = 0.25) -> float:
    """``sup |mu - T_t mu|`` on the overlap ``region ∩ (region + t)``.

    ``T_t mu`` has the atom ``mu({x})`` at ``x + t``.  Only the overlap is compared,
    since the patch says nothing outside its region; atoms within 1e-9 of the overlap
    boundary are left out on both sides.  Translations whose overlap is smaller than
    ``min_overlap`` times the region volume, or holds no atoms at all, return ``inf``.
    """
    t = as_points(t, mu.dim)[0]
    overlap = mu.region.intersect(mu.region.translated(t))
    if overlap is None or overlap.volume < min_overlap * mu.region.volume:
        return float("inf")
    inner = overlap.shrink(TOL) if np.all(overlap.extent > 4 * TOL) else overlap
    a = mu.positions[inner.contains(mu.positions, 0.0)]
    wa = mu.weights[inner.contains(mu.positions, 0.0)]
    shifted = mu.positions + t
    sel = inner.contains(shifted, 0.0)
    left = WeightedComb(mu.dim, a, wa, overlap) if len(a) else None
    right = WeightedComb(mu.dim, shifted[sel], mu.weights[sel], overlap) if sel.any() else None
    if left is None and right is None:
        return float("inf")  # nothing to compare: no evidence either way
    if left is None:
        return float(np.abs(right.weights).max())
    if right is None:
        return float(np.abs(left.weights).max())
    return sup_distance(left, right)


@dataclass(frozen=True)
class AlmostPeriodReport:
    eps: float
    tested: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)  # measured sup distance per translation
    passing_mask: np.ndarray = field(repr=False)

    @property
    def passing(self) -> np.ndarray:
        return self.tested[self.passing_mask]

    def to_dict(self) -> dict:
        return {"eps": self.eps, "tested": self.tested.tolist(),
                "margins": [m if np.isfinite(m) else None for m in self.margins.tolist()],
                "passing": self.passing.tolist()}


def almost_periods(mu: WeightedComb, eps: float, candidate_translations, *,
                   min_overlap: float = 0.25) -> AlmostPeriodReport:
    """Which candidate ``t`` satisfy ``sup |mu - T_t mu| < eps`` on the patch overlap."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    ts = as_points(candidate_translations, mu.dim)
    d = np.array([translation_distance(mu, t, min_overlap=min_overlap) for t in ts])
    return AlmostPeriodReport(float(eps), ts, d, d < eps)


def period_threshold(mu: WeightedComb) -> float:
    """``min(min_{i != j} |c_i - c_j|, min_i |c_i|)`` over the distinct nonzero weights."""
    w = mu.weights[np.abs(mu.weights) > PERIOD_TOL]
    if len(w) == 0:
        raise ValueError("comb has no nonzero weights")
    pts = np.column_stack([w.real, w.imag])
    vals = unique_rows(pts, PERIOD_TOL)
    c = vals[:, 0] + 1j * vals[:, 1]
    gaps = np.abs(c[:, None] - c[None, :])[~np.eye(len(c), dtype=bool)]
    return float(min(gaps.min(initial=np.inf), np.abs(c).min()))


def _gcd_1d(values: np.ndarray) -> float | None:
    """Generator of the group spanned by positive reals, or None if it is not discrete."""
    g = float(values[0])
    for v in values[1:]:
        a, b = max(g, float(v)), min(g, float(v))
        while b > 1e-7:
            a, b = b, abs(a - round(a / b) * b)
            if a < DISCRETE_THRESHOLD:
                return None
        g = a
        if g < DISCRETE_THRESHOLD:
            return None
    return g


def _gauss_reduce(b1: np.ndarray, b2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    for _ in range(100):
        if b1 @ b1 > b2 @ b2:
            b1, b2 = b2, b1
        mu = round(float(b1 @ b2) / float(b1 @ b1))
        if mu == 0:
            break
        b2 = b2 - mu * b1
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    return b1, b2


def _hnf_2x3(cols: np.ndarray) -> np.ndarray:
    """Basis (2x2, integer) of the lattice spanned by three integer columns."""
    m = [list(map(int, col)) for col in cols.T]
    basis: list[list[int]] = []
    # Column echelon form by repeated extended-gcd on the first coordinate.
    vecs = [v for v in m if v != [0, 0]]
    while True:
        nz = [v for v in vecs if v[0] != 0]
        if len(nz) <= 1:
            break
        nz.sort(key=lambda v: abs(v[0]))
        p = nz[0]
        rest = [v for v in vecs if v is not p]
        vecs = [p] + [[v[0] - (v[0] // p[0]) * p[0], v[1] - (v[0] // p[0]) * p[1]] for v in rest]
        vecs = [v for v in vecs if v != [0, 0]]
    firsts = [v for v in vecs if v[0] != 0]
    seconds = [v[1] for v in vecs if v[0] == 0]
    g = 0
    for s in seconds:
        g = gcd(g, abs(s))
    if firsts:
        basis.append(firsts[0])
    if g:
        basis.append([0, g])
    return np.array(basis, dtype=float).T


def _lattice_2d(periods: np.ndarray) -> np.ndarray | None:
    order = np.argsort(np.linalg.norm(periods, axis=1), kind="stable")
    p = periods[order]
    b1 = p[0]
    indep = [v for v in p[1:] if abs(b1[0] * v[1] - b1[1] * v[0]) > 1e-6 * np.linalg.norm(b1) * np.linalg.norm(v)]
    if not indep:
        return None
    B = np.column_stack(_gauss_reduce(b1, indep[0]))
    for v in p:
        c = np.linalg.solve(B, v)
        if np.allclose(c, np.round(c), atol=1e-6):
            continue
        fr = [Fraction(float(x)).limit_denominator(1000) for x in c]
        if max(abs(float(f) - x) for f, x in zip(fr, c)) > 1e-6:
            return None  # irrational relation: the generated group is not discrete
        den = int(np.lcm.reduce([f.denominator for f in fr]))
        cols = np.array([[den, 0, int(fr[0] * den)], [0, den, int(fr[1] * den)]])
        H = _hnf_2x3(cols)
        if H.shape != (2, 2):
            return None
        B = B @ H / den
        if abs(np.linalg.det(B)) < DISCRETE_THRESHOLD:
            return None
        B = np.column_stack(_gauss_reduce(B[:, 0], B[:, 1]))
    return B


def extract_period_lattice(mu: WeightedComb, eps: float, candidate_translations, *,
                           min_overlap: float = 0.25) -> EmbeddingLattice | None:
    """Lattice generated by the eps-almost periods of a finitely valued comb.

    For ``eps`` below :func:`period_threshold` every eps-almost period is an exact
    period (each atom must land on an atom of the same weight).  The group they
    generate is reduced to a basis (Euclid with tolerance in 1-d, Gauss reduction
    plus a rational Hermite step in 2-d).  ``None`` means no nonzero period among
    the candidates, a generated group that is not discrete (gaps below 1e-6) or not
    of full rank, or a reduced basis vector failing the exact-period re-check.
    """
    thr = period_threshold(mu)
    if not 0 < eps < thr:
        raise ValueError(f"eps={eps} must lie in (0, {thr:.6g}): below the smallest gap between "
                         "distinct weight values and the smallest nonzero |weight|, "
                         "almost periods are exact periods")
    rep = almost_periods(mu, eps, candidate_translations, min_overlap=min_overlap)
    per = rep.passing
    per = per[np.linalg.norm(per, axis=1) > TOL]
    if len(per) == 0:
        return None
    if mu.dim == 1:
        vals = np.sort(np.abs(per[:, 0]))
        g = _gcd_1d(vals)
        if g is None:
            return None
        n = np.round(vals / g)
        if np.max(np.abs(vals - n * g)) > 1e-6:
            return None
        # Least-squares generator from all periods removes the drift of the Euclid steps.
        basis = np.array([[float(n @ vals / (n @ n))]])
    else:
        B = _lattice_2d(per)
        if B is None:
            return None
        basis = B
    for col in basis.T:
        if translation_distance(mu, col, min_overlap=0.0) > PERIOD_TOL:
            return None
    return EmbeddingLattice(basis)
