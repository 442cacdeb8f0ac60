"""Finite patches of point sets in R^d (d = 1, 2) and their geometric certificates.

A :class:`PointSet` is a sorted, deduplicated finite patch together with the box it
was generated in.  Every "for all x in the difference set" statement is evaluated on
a truncation ``(L - L) ∩ B_R(0)`` whose radius is carried along explicitly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._util import TOL, as_points, contains_rows, lexsort_rows, match_rows, rng, unique_rows

#: Gaps below this are treated as "not uniformly discrete".
DISCRETE_THRESHOLD = 1e-6


class TruncationWarning(UserWarning):
    """A finite patch is too small for the requested truncation radius."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]`` in R^dim."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise ValueError("box corners have different dimensions")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def centered(cls, side, dim: int = 1) -> "Box":
        """The van Hove box ``[-side/2, side/2]^dim``."""
        half = np.broadcast_to(np.asarray(side, dtype=float) / 2, (dim,))
        return cls(tuple(-half), tuple(half))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_arr(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_arr(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def extent(self) -> np.ndarray:
        return self.hi_arr - self.lo_arr

    @property
    def center(self) -> np.ndarray:
        return (self.hi_arr + self.lo_arr) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def contains(self, pts, tol: float = TOL) -> np.ndarray:
        pts = as_points(pts, self.dim)
        return np.all((pts >= self.lo_arr - tol) & (pts <= self.hi_arr + tol), axis=1)

    def shrink(self, margin) -> "Box":
        m = np.broadcast_to(np.asarray(margin, dtype=float), (self.dim,))
        return Box(tuple(self.lo_arr + m), tuple(self.hi_arr - m))

    def scaled(self, factor: float) -> "Box":
        """Same center, every side multiplied by ``factor``."""
        c, h = self.center, self.extent / 2 * factor
        return Box(tuple(c - h), tuple(c + h))

    def translated(self, t) -> "Box":
        t = np.broadcast_to(np.asarray(t, dtype=float), (self.dim,))
        return Box(tuple(self.lo_arr + t), tuple(self.hi_arr + t))

    def intersect(self, other: "Box") -> "Box | None":
        lo = np.maximum(self.lo_arr, other.lo_arr)
        hi = np.minimum(self.hi_arr, other.hi_arr)
        if np.any(lo >= hi):
            return None
        return Box(tuple(lo), tuple(hi))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(tuple(d["lo"]), tuple(d["hi"]))


@dataclass(frozen=True)
class PointSet:
    """Sorted, pairwise distinct points inside ``region``.  Build with :func:`build_pointset`."""

    dim: int
    points: np.ndarray = field(repr=False)
    region: Box

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def coords(self) -> np.ndarray:
        """1-d view of the coordinates when ``dim == 1``."""
        return self.points[:, 0] if self.dim == 1 else self.points

    def restrict(self, box: Box) -> np.ndarray:
        return self.points[box.contains(self.points)]

    def translated(self, t) -> "PointSet":
        t = np.broadcast_to(np.asarray(t, dtype=float), (self.dim,))
        shifted = self.points + t
        return PointSet(self.dim, shifted[lexsort_rows(shifted)], self.region.translated(t))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "region": self.region.to_dict(),
                "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PointSet":
        return build_pointset(int(d["dim"]), d["points"], Box.from_dict(d["region"]))


@dataclass(frozen=True)
class DensityEstimate:
    lower: float
    upper: float
    window_size: float
    n_windows: int


@dataclass(frozen=True)
class MeyerCertificate:
    is_delone: bool
    min_sep: float
    covering_radius: float
    delta_min_sep: float
    cover_F: np.ndarray = field(repr=False)
    verdict: bool
    diff_radius: float
    uncovered: np.ndarray = field(repr=False)
    offset: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"is_delone": self.is_delone, "min_sep": self.min_sep,
                "covering_radius": self.covering_radius, "delta_min_sep": self.delta_min_sep,
                "cover_F": self.cover_F.tolist(), "verdict": self.verdict,
                "diff_radius": self.diff_radius, "n_uncovered": int(len(self.uncovered)),
                "offset": self.offset.tolist()}


def build_pointset(dim: int, raw_points, region: Box) -> PointSet:
    """Validate, sort and deduplicate ``raw_points`` (tolerance 1e-9)."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if region.dim != dim:
        raise ValueError(f"region has dimension {region.dim}, expected {dim}")
    pts = as_points(raw_points, dim)
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates")
    inside = region.contains(pts)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise ValueError(f"point {bad} {pts[bad].tolist()} lies outside region")
    return PointSet(dim, unique_rows(pts), region)


def pairs_within(points: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``i < j`` of lexicographically sorted ``points`` with ``|p_j - p_i| <= radius``."""
    n, d = points.shape
    if d == 1:
        x = points[:, 0]
        ii, jj = [], []
        base = np.arange(n)
        for off in range(1, n):
            gap = x[off:] - x[:-off]
            ok = gap <= radius + TOL
            if not ok.any():
                break  # sorted: larger offsets only get wider
            ii.append(base[:-off][ok])
            jj.append(base[off:][ok])
        if not ii:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        return np.concatenate(ii), np.concatenate(jj)
    pairs = cKDTree(points).query_pairs(radius + TOL, output_type="ndarray")
    if pairs.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    return pairs[:, 0], pairs[:, 1]


def min_separation(ps: PointSet) -> float:
    """Smallest distance between two distinct points of the patch."""
    if len(ps) < 2:
        raise ValueError("min_separation needs at least 2 points")
    if ps.dim == 1:
        return float(np.diff(ps.coords).min())
    dist, _ = cKDTree(ps.points).query(ps.points, k=2)
    return float(dist[:, 1].min())


def covering_radius(ps: PointSet, margin: float = 0.0, *, return_error: bool = False):
    """Largest distance from a point of ``region.shrink(margin)`` to the patch.

    In d = 1 this is exact (gap scan).  In d = 2 the supremum is taken over a grid
    of spacing ``min_sep / 4``; the result is then accurate to within
    ``spacing / sqrt(2)``, which is returned as the second value if
    ``return_error`` is set.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if len(ps) < 2:
        raise ValueError("covering_radius needs at least 2 points")
    try:
        inner = ps.region.shrink(margin)
    except ValueError:
        raise ValueError("region shrunk by margin is empty") from None
    if ps.dim == 1:
        x = ps.coords
        a, b = inner.lo[0], inner.hi[0]
        probes = [a, b]
        mids = (x[1:] + x[:-1]) / 2
        probes.extend(mids[(mids >= a) & (mids <= b)])
        probes = np.asarray(probes)
        idx = np.clip(np.searchsorted(x, probes), 1, len(x) - 1)
        d = np.minimum(np.abs(probes - x[idx - 1]), np.abs(probes - x[idx]))
        value, err = float(d.max()), 0.0
    else:
        step = min_separation(ps) / 4
        axes = [np.linspace(lo, hi, max(2, int(np.ceil((hi - lo) / step)) + 1))
                for lo, hi in zip(inner.lo, inner.hi)]
        gx, gy = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        spacing = max(ax[1] - ax[0] for ax in axes)
        d, _ = cKDTree(ps.points).query(grid, k=1)
        value, err = float(d.max()), float(spacing / np.sqrt(2))
    return (value, err) if return_error else value


def difference_set(ps: PointSet, radius: float) -> PointSet:
    """``(L - L) ∩ B_R(0)`` realised on the patch; symmetric and containing 0."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    diam = float(np.linalg.norm(ps.region.extent))
    if radius > diam:
        warnings.warn(f"radius {radius} exceeds patch diameter {diam:.6g}; "
                      "difference set is truncated by the patch", TruncationWarning, stacklevel=2)
    i, j = pairs_within(ps.points, radius)
    z = ps.points[j] - ps.points[i]
    z = z[np.linalg.norm(z, axis=1) <= radius + TOL]
    allz = np.vstack([np.zeros((1, ps.dim)), z, -z])
    return PointSet(ps.dim, unique_rows(allz), Box(tuple([-radius] * ps.dim), tuple([radius] * ps.dim)))


def _window_counts(ps: PointSet, window: float) -> tuple[np.ndarray, int]:
    stride = window / 8
    lo, ext = ps.region.lo_arr, ps.region.extent
    nbins = np.floor(ext / stride + TOL).astype(int)
    idx = np.floor((ps.points - lo) / stride + TOL).astype(int)
    keep = np.all((idx >= 0) & (idx < nbins), axis=1)
    hist = np.zeros(tuple(nbins), dtype=np.int64)
    np.add.at(hist, tuple(idx[keep].T), 1)
    # Windows are 8 consecutive (half-open) stride bins in every axis.
    csum = hist
    for ax in range(ps.dim):
        c = np.cumsum(csum, axis=ax)
        zero = np.zeros_like(np.take(c, [0], axis=ax))
        c = np.concatenate([zero, c], axis=ax)
        n = c.shape[ax]
        csum = np.take(c, np.arange(8, n), axis=ax) - np.take(c, np.arange(0, n - 8), axis=ax)
    return csum.ravel(), csum.size


def density_bounds(ps: PointSet, window: float) -> DensityEstimate:
    """Min / max of ``#(L ∩ (x + W)) / Vol(W)`` over cubes ``W`` of side ``window``.

    Window origins step by ``window / 8`` from ``region.lo``; only windows lying
    entirely inside the region are counted.  Windows are half-open.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    if np.any(window > ps.region.extent / 2 + TOL):
        raise ValueError(f"window {window} exceeds half the region extent {ps.region.extent.tolist()}")
    counts, n = _window_counts(ps, window)
    vol = window ** ps.dim
    return DensityEstimate(float(counts.min() / vol), float(counts.max() / vol), float(window), int(n))


def meyer_certificate(ps: PointSet, diff_radius: float, cover_box: Box, *,
                      recenter: bool = True) -> MeyerCertificate:
    """Delone parameters, discreteness of ``L - L`` and a finite ``F`` with ``L - L ⊂ L + F``.

    ``F`` is built constructively: for each ``z`` in the truncated difference set a
    patch point ``y`` with ``z - y`` in ``cover_box`` is chosen (the one nearest to the
    box centre) and the residues ``z - y`` are collected.  With ``recenter`` the patch
    is first translated so its region is centred at the origin (``offset`` records the
    shift); the property is translation invariant up to shifting ``F`` by the offset.
    """
    if len(ps) < 2:
        raise ValueError("meyer_certificate needs at least 2 points")
    if cover_box.dim != ps.dim:
        raise ValueError("cover_box dimension mismatch")
    offset = -ps.region.center if recenter else np.zeros(ps.dim)
    lam = ps.translated(offset) if recenter else ps
    r = min_separation(lam)
    rho = covering_radius(lam)
    is_delone = bool(r > DISCRETE_THRESHOLD and np.isfinite(rho))
    dset = difference_set(lam, diff_radius)
    dmin = min_separation(dset) if len(dset) > 1 else np.inf

    # Scale so the cover box becomes the unit sup-norm ball around its centre.
    half = cover_box.extent / 2
    tree = cKDTree(lam.points / half)
    target = (dset.points - cover_box.center) / half
    dist, idx = tree.query(target, k=1, p=np.inf)
    covered = dist <= 1 + TOL
    resid = dset.points[covered] - lam.points[idx[covered]]
    verdict = bool(is_delone and covered.all() and dmin > DISCRETE_THRESHOLD)
    F = unique_rows(resid) if verdict else np.zeros((0, ps.dim))
    return MeyerCertificate(is_delone, r, rho, float(dmin), F, verdict, float(diff_radius),
                            dset.points[~covered], offset)


def intersect(a: PointSet, b: PointSet) -> np.ndarray:
    """Points of ``a`` that are also in ``b``."""
    return a.points[contains_rows(a.points, b.points)]


def symmetric_difference(a: PointSet, b: PointSet) -> np.ndarray:
    only_a = a.points[~contains_rows(a.points, b.points)]
    only_b = b.points[~contains_rows(b.points, a.points)]
    out = np.vstack([only_a, only_b])
    return out[lexsort_rows(out)]


def deform(ps: PointSet, remove=(), add=()) -> tuple[PointSet, int]:
    """``(L \\ remove) ∪ add`` and the size of the symmetric difference with ``L``."""
    rem = as_points(remove, ps.dim) if len(remove) else np.zeros((0, ps.dim))
    new = as_points(add, ps.dim) if len(add) else np.zeros((0, ps.dim))
    hit = match_rows(rem, ps.points)
    if np.any(hit < 0):
        bad = int(np.flatnonzero(hit < 0)[0])
        raise ValueError(f"cannot remove absent point {rem[bad].tolist()}")
    if len(np.unique(hit)) != len(hit):
        raise ValueError("remove list contains duplicates")
    if len(new):
        if np.any(contains_rows(new, ps.points)):
            raise ValueError("cannot add a point already present")
        if len(unique_rows(new)) != len(new):
            raise ValueError("add list contains duplicates")
        if not ps.region.contains(new).all():
            raise ValueError("added point outside region")
    keep = np.ones(len(ps), dtype=bool)
    keep[hit] = False
    pts = np.vstack([ps.points[keep], new])
    if pts.shape[0] == 0:
        raise ValueError("deformation removes every point")
    pts = pts[lexsort_rows(pts)]
    return PointSet(ps.dim, pts, ps.region), int(len(rem) + len(new))


def thin(ps: PointSet, fraction: float, seed: int) -> np.ndarray:
    """Seeded Bernoulli selection: each point independently with probability ``fraction``."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    mask = rng(seed).random(len(ps)) < fraction
    return ps.points[mask]
