"""Generators of Meyer sets: lattices, cut-and-project model sets, the Fibonacci chain.

Conventions
-----------
An embedding lattice in R^(d+m) is given by a square ``basis`` whose *columns*
generate it.  The first ``d`` coordinates are physical, the last ``m`` internal.

The Fibonacci scheme uses the lattice spanned by ``(1, 1)`` and ``(tau, tau')`` with
``tau = (1 + sqrt 5) / 2`` and ``tau' = 1 - tau``: the point ``m + n tau`` has internal
coordinate ``m + n tau'``.  With the half-open window ``[-1, tau - 1)`` the part of the
model set in ``[0, inf)`` is exactly the chain of left endpoints produced by the
substitution ``a -> ab, b -> a`` (tile lengths ``tau`` and ``1``).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from ._util import TOL, lexsort_rows, unique_rows
from .pointset import Box, PointSet, build_pointset

TAU = (1 + 5 ** 0.5) / 2
TAU_CONJ = 1 - TAU
FIBONACCI_WINDOW = (-1.0, TAU - 1)

#: Upper bound on enumerated outer coefficient tuples for one generator call.
MAX_ENUMERATION = 20_000_000


class CollisionWarning(UserWarning):
    """Distinct lattice points projected onto the same physical point."""


@dataclass(frozen=True)
class EmbeddingLattice:
    basis: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"basis must be square, got shape {b.shape}")
        if abs(np.linalg.det(b)) <= 1e-12:
            raise ValueError("singular lattice basis")
        object.__setattr__(self, "basis", b)

    @property
    def total_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))


@dataclass(frozen=True)
class CutProjectScheme:
    lattice: EmbeddingLattice
    d: int
    m: int
    window: Box | None  # half-open [lo, hi); None when m == 0

    def __post_init__(self):
        if self.d + self.m != self.lattice.total_dim:
            raise ValueError("d + m must equal the lattice dimension")
        if self.m == 0 and self.window is not None:
            raise ValueError("a scheme without internal space takes no window")
        if self.m > 0 and (self.window is None or self.window.dim != self.m):
            raise ValueError("window must be a box in the internal space")

    @property
    def density(self) -> float:
        """Point density of the generated model set (window volume / covolume)."""
        w = 1.0 if self.window is None else self.window.volume
        return w / self.lattice.covolume

    def to_dict(self) -> dict:
        return {"basis": self.lattice.basis.tolist(), "d": self.d, "m": self.m,
                "window": None if self.window is None else self.window.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "CutProjectScheme":
        win = data.get("window")
        return cls(EmbeddingLattice(np.array(data["basis"])), int(data["d"]), int(data["m"]),
                   None if win is None else Box.from_dict(win))


def fibonacci_scheme() -> CutProjectScheme:
    basis = np.array([[1.0, TAU], [1.0, TAU_CONJ]])
    return CutProjectScheme(EmbeddingLattice(basis), 1, 1, Box((FIBONACCI_WINDOW[0],),
                                                               (FIBONACCI_WINDOW[1],)))


def integer_scheme(d: int = 1) -> CutProjectScheme:
    """The trivial scheme for Z^d: no internal space."""
    return CutProjectScheme(EmbeddingLattice(np.eye(d)), d, 0, None)


def preset_scheme(name: str, d: int = 1) -> CutProjectScheme:
    if name == "fibonacci":
        return fibonacci_scheme()
    if name == "zd":
        return integer_scheme(d)
    raise ValueError(f"unknown scheme preset {name!r} (known: fibonacci, zd)")


def _enumerate(basis: np.ndarray, lo: np.ndarray, hi: np.ndarray,
               half_open: np.ndarray) -> np.ndarray:
    """All lattice points ``basis @ c`` (``c`` integer) in the box ``[lo, hi]``.

    Coordinates flagged in ``half_open`` use ``lo <= y < hi`` (both ends shifted by
    -TOL), the others a closed test with TOL slack.  Coefficient bounds come from
    mapping the box corners through ``basis^-1``; every coefficient but the last is
    enumerated and the last is solved for as an interval.
    """
    D = basis.shape[0]
    inv = np.linalg.inv(basis)
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    coeff = corners @ inv.T
    cmin = np.floor(coeff.min(axis=0) - 1e-7).astype(np.int64)
    cmax = np.ceil(coeff.max(axis=0) + 1e-7).astype(np.int64)
    spans = cmax - cmin + 1
    outer = int(np.prod(spans[:-1])) if D > 1 else 1
    if outer > MAX_ENUMERATION:
        shrink = (MAX_ENUMERATION / outer) ** (1 / max(D - 1, 1))
        raise ValueError(f"enumeration needs {outer} coefficient tuples (limit {MAX_ENUMERATION}); "
                         f"shrink the region by a factor of about {shrink:.3g}")
    grids = [np.arange(a, b + 1) for a, b in zip(cmin[:-1], cmax[:-1])]
    if D > 1:
        mesh = np.meshgrid(*grids, indexing="ij")
        head = np.column_stack([g.ravel() for g in mesh]).astype(float)
    else:
        head = np.zeros((1, 0))
    base = head @ basis[:, :-1].T  # (K, D)
    last = basis[:, -1]
    tmin = np.full(len(base), -np.inf)
    tmax = np.full(len(base), np.inf)
    for i in range(D):
        if abs(last[i]) < 1e-15:
            ok = (base[:, i] >= lo[i] - TOL) & (base[:, i] <= hi[i] + TOL)
            tmin[~ok], tmax[~ok] = np.inf, -np.inf
            continue
        t1 = (lo[i] - base[:, i]) / last[i]
        t2 = (hi[i] - base[:, i]) / last[i]
        tmin = np.maximum(tmin, np.minimum(t1, t2))
        tmax = np.minimum(tmax, np.maximum(t1, t2))
    kmin = np.ceil(np.clip(tmin, cmin[-1] - 1, cmax[-1] + 1) - 1e-7).astype(np.int64)
    kmax = np.floor(np.clip(tmax, cmin[-1] - 1, cmax[-1] + 1) + 1e-7).astype(np.int64)
    counts = np.maximum(kmax - kmin + 1, 0)
    rows = np.repeat(np.arange(len(base)), counts)
    starts = np.repeat(kmin, counts)
    within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    k = (starts + within).astype(float)
    pts = base[rows] + np.outer(k, last)
    closed_ok = (pts >= lo - TOL) & (pts <= hi + TOL)
    half_ok = (pts >= lo - TOL) & (pts < hi - TOL)
    keep = np.all(np.where(half_open, half_ok, closed_ok), axis=1)
    return pts[keep]


def generate_lattice_patch(basis, region: Box) -> PointSet:
    """All points of the lattice spanned by the columns of ``basis`` inside ``region``."""
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    if b.shape != (region.dim, region.dim):
        raise ValueError("basis shape must match the region dimension")
    if abs(np.linalg.det(b)) <= 1e-12:
        raise ValueError("singular lattice basis")
    pts = _enumerate(b, region.lo_arr, region.hi_arr, np.zeros(region.dim, dtype=bool))
    return build_pointset(region.dim, pts, region)


def generate_model_set(scheme: CutProjectScheme, region: Box) -> PointSet:
    """Physical projections of lattice points with internal part in the (half-open) window."""
    if region.dim != scheme.d:
        raise ValueError("region dimension must equal the physical dimension")
    if scheme.m == 0:
        return generate_lattice_patch(scheme.lattice.basis, region)
    lo = np.concatenate([region.lo_arr, scheme.window.lo_arr])
    hi = np.concatenate([region.hi_arr, scheme.window.hi_arr])
    half_open = np.array([False] * scheme.d + [True] * scheme.m)
    pts = _enumerate(scheme.lattice.basis, lo, hi, half_open)[:, :scheme.d]
    if len(pts) == 0:
        raise ValueError("model set patch is empty")
    n_unique = len(unique_rows(pts))
    if n_unique != len(pts):
        warnings.warn(f"{len(pts) - n_unique} lattice points collide under the physical "
                      "projection; duplicates collapsed", CollisionWarning, stacklevel=2)
    return build_pointset(scheme.d, pts, region)


def fibonacci_word(n: int) -> str:
    """First ``n`` letters of the fixed point of ``a -> ab, b -> a``."""
    word = "a"
    table = str.maketrans({"a": "ab", "b": "a"})
    while len(word) < n:
        word = word.translate(table)
    return word[:n]


def generate_fibonacci(n_points: int) -> PointSet:
    """Left endpoints of the first ``n_points`` Fibonacci tiles, starting at 0.

    Each endpoint is evaluated as ``(#b) + (#a) * tau`` from tile counts rather than
    by a running sum.  The region is ``[0, right end of the last tile]``.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    word = np.frombuffer(fibonacci_word(n_points).encode(), dtype=np.uint8) == ord("a")
    n_a = np.concatenate([[0], np.cumsum(word)])
    n_b = np.arange(n_points + 1) - n_a
    ends = n_b + n_a * TAU
    return build_pointset(1, ends[:-1], Box((0.0,), (float(ends[-1]),)))


def dual_lattice(lat: EmbeddingLattice) -> EmbeddingLattice:
    """Basis ``(B^-1)^T``: pairings with the original generators are integers."""
    dual = np.linalg.inv(lat.basis).T
    pair = lat.basis.T @ dual
    if not np.allclose(pair, np.round(pair), atol=1e-9, rtol=0):
        raise ValueError("dual basis failed the integrality check")
    return EmbeddingLattice(dual)


def fourier_candidates(scheme: CutProjectScheme, freq_region: Box, internal_cutoff: float, *,
                       return_internal: bool = False):
    """Physical parts of dual-lattice points whose internal part has norm <= cutoff.

    These are the Bragg-peak candidates of the model set.  Sorted, symmetric under
    ``chi -> -chi`` when ``freq_region`` is, and contains 0 when ``freq_region`` does.
    With ``return_internal`` the matching internal parts are returned as well.
    """
    if internal_cutoff <= 0:
        raise ValueError("internal_cutoff must be positive")
    if freq_region.dim != scheme.d:
        raise ValueError("freq_region dimension must equal the physical dimension")
    dual = dual_lattice(scheme.lattice).basis
    if scheme.m == 0:
        pts = _enumerate(dual, freq_region.lo_arr, freq_region.hi_arr,
                         np.zeros(scheme.d, dtype=bool))
        phys, internal = pts, np.zeros((len(pts), 0))
    else:
        lo = np.concatenate([freq_region.lo_arr, -np.full(scheme.m, internal_cutoff)])
        hi = np.concatenate([freq_region.hi_arr, np.full(scheme.m, internal_cutoff)])
        pts = _enumerate(dual, lo, hi, np.zeros(scheme.d + scheme.m, dtype=bool))
        internal = pts[:, scheme.d:]
        ok = np.linalg.norm(internal, axis=1) <= internal_cutoff + TOL
        phys, internal = pts[ok, :scheme.d], internal[ok]
    if len(phys) == 0:
        warnings.warn("no Fourier candidates (cutoff too small or region empty)", stacklevel=2)
    order = lexsort_rows(phys)
    phys, internal = phys[order], internal[order]
    # Exact zero for the origin so downstream lookups of chi = 0 are clean.
    phys[np.all(np.abs(phys) <= TOL, axis=1)] = 0.0
    return (phys, internal) if return_internal else phys
