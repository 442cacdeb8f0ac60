"""Weighted Dirac combs and their finite-volume autocorrelations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._util import TOL, as_points, cluster_rows, lexsort_rows, match_rows, parallel_map, unique_rows
from .pointset import Box, PointSet


@dataclass(frozen=True)
class WeightedComb:
    """Finitely supported ``sum_x w(x) delta_x`` with atoms sorted by position."""

    dim: int
    positions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    region: Box

    def __post_init__(self):
        pos = as_points(self.positions, self.dim)
        w = np.asarray(self.weights, dtype=complex).reshape(-1)
        if len(w) != len(pos):
            raise ValueError("positions and weights differ in length")
        if not np.all(np.isfinite(w)):
            raise ValueError("non-finite weights")
        order = lexsort_rows(pos)
        pos, w = pos[order], w[order]
        if len(pos) > 1 and len(unique_rows(pos)) != len(pos):
            raise ValueError("atom positions must be distinct")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def from_pointset(cls, ps: PointSet, weights=None) -> "WeightedComb":
        w = np.ones(len(ps), dtype=complex) if weights is None else weights
        return cls(ps.dim, ps.points, w, ps.region)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.weights.imag == 0))

    def support(self, box: Box | None = None) -> tuple[np.ndarray, np.ndarray]:
        if box is None:
            return self.positions, self.weights
        keep = box.contains(self.positions)
        return self.positions[keep], self.weights[keep]

    def weight_at(self, x) -> np.ndarray:
        """Atom weight at each query position (0 where there is no atom)."""
        q = as_points(x, self.dim)
        idx = match_rows(q, self.positions)
        return np.where(idx >= 0, self.weights[np.maximum(idx, 0)], 0)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "region": self.region.to_dict(),
                "atoms": [{"x": p.tolist(), "re": float(w.real), "im": float(w.imag)}
                          for p, w in zip(self.positions, self.weights)]}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightedComb":
        dim = int(d["dim"])
        atoms = d["atoms"]
        pos = np.array([a["x"] for a in atoms], dtype=float).reshape(-1, dim)
        w = np.array([complex(a["re"], a["im"]) for a in atoms])
        return cls(dim, pos, w, Box.from_dict(d["region"]))


def _lex_positive(z: np.ndarray) -> np.ndarray:
    """Mask of lags in the "positive" half space (tolerance aware lexicographic sign)."""
    pos = np.zeros(len(z), dtype=bool)
    undecided = np.ones(len(z), dtype=bool)
    for k in range(z.shape[1]):
        col = z[:, k]
        pos |= undecided & (col > TOL)
        undecided &= np.abs(col) <= TOL
    return pos


#: Source atoms per chunk when enumerating ordered pairs.
PAIR_CHUNK = 512


def _fold(z: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Move every contribution onto the positive half (``-z``, conjugated) and sum clusters."""
    if len(z) == 0:
        return np.zeros((0, z.shape[1])), np.zeros(0, dtype=complex)
    pos = _lex_positive(z)
    u = np.where(pos[:, None], z, -z)
    cu = np.where(pos, c, np.conj(c))
    order, labels = cluster_rows(u)
    sums = np.zeros(labels[-1] + 1, dtype=complex)
    np.add.at(sums, labels, cu[order])
    first = np.ones(len(labels), dtype=bool)
    first[1:] = labels[1:] != labels[:-1]
    return u[order[first]], sums


def _hermitian_comb(dim: int, reps: np.ndarray, sums: np.ndarray, zero: float,
                    vol: float, radius: float) -> WeightedComb:
    """Positive-half lag map mirrored with conjugate weights, so ``weight(-z) == conj weight(z)``."""
    positions = np.vstack([-reps, np.zeros((1, dim)), reps])
    weights = np.concatenate([np.conj(sums), [complex(zero, 0.0)], sums]) / vol
    region = Box(tuple([-radius] * dim), tuple([radius] * dim))
    return WeightedComb(dim, positions, weights, region)


def _ordered_pairs(src: np.ndarray, dst: np.ndarray, radius: float):
    """All ``(i, j)`` with ``0 < |src_i - dst_j| <= radius`` (``dst`` sorted)."""
    if src.shape[1] == 1:
        x, y = src[:, 0], dst[:, 0]
        lo = np.searchsorted(y, x - radius - TOL, side="left")
        hi = np.searchsorted(y, x + radius + TOL, side="right")
        counts = hi - lo
        i = np.repeat(np.arange(len(x)), counts)
        j = np.repeat(lo, counts) + (np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts))
    else:
        sdm = cKDTree(src).sparse_distance_matrix(cKDTree(dst), radius + TOL, output_type="ndarray")
        i, j = sdm["i"].astype(int), sdm["j"].astype(int)
    z = src[i] - dst[j]
    size = np.abs(z[:, 0]) if z.shape[1] == 1 else np.linalg.norm(z, axis=1)
    keep = np.any(np.abs(z) > TOL, axis=1) & (size <= radius + TOL)
    return i[keep], j[keep]


def finite_autocorrelation(omega: WeightedComb, A: Box, lag_radius: float, *,
                           one_sided: bool = False) -> WeightedComb:
    """Finite-volume autocorrelation on lags ``|z| <= lag_radius``.

    Default: ``(omega|_A * tilde(omega|_A)) / Vol(A)``, i.e.
    ``weight(z) = (1/Vol A) sum_{x, y in A, x - y = z} w(x) conj(w(y))``.
    No edge correction is applied; lags near ``diam A`` are biased low by the
    ``O(|z| / |A|)`` loss of pairs.

    With ``one_sided`` the partner ``y`` ranges over the whole support of ``omega``
    (``(omega|_A * tilde(omega)) / Vol(A)``).  If ``A`` sits at least ``lag_radius``
    inside ``omega.region`` this is free of the boundary bias; the result is
    symmetrised to ``(g(z) + conj g(-z)) / 2`` to keep it Hermitian.

    Pairs are enumerated in chunks of source atoms; each chunk is reduced to a lag
    map and the maps are merged, so memory stays proportional to the chunk size.
    """
    if lag_radius <= 0:
        raise ValueError("lag_radius must be positive")
    if A.dim != omega.dim:
        raise ValueError("box dimension mismatch")
    P, w = omega.support(A)
    if len(P) == 0:
        raise ValueError("omega has no atoms in A")
    zero = float(np.sum(np.abs(w) ** 2))
    Y, wy = (omega.positions, omega.weights) if one_sided else (P, w)
    # Folding an ordered pair at -u onto u gives conj(g(-u)), so the folded sum is
    # g(u) + conj g(-u).  Halving it is exact in restricted mode (already Hermitian)
    # and is the symmetrisation in the one-sided form.

    def chunk_map(start: int):
        src = P[start:start + PAIR_CHUNK]
        i, j = _ordered_pairs(src, Y, lag_radius)
        return _fold(src[i] - Y[j], 0.5 * w[start + i] * np.conj(wy[j]))

    pieces = parallel_map(chunk_map, range(0, len(P), PAIR_CHUNK))
    reps, sums = _fold(np.vstack([p[0] for p in pieces]), np.concatenate([p[1] for p in pieces]))
    return _hermitian_comb(omega.dim, reps, sums, zero, A.volume, lag_radius)


def autocorr_coefficient(omega: WeightedComb, A: Box, z) -> complex:
    """Single lag of :func:`finite_autocorrelation` by direct lookup of ``x - z``."""
    z = as_points(z, omega.dim)[0]
    P, w = omega.support(A)
    if len(P) == 0:
        raise ValueError("omega has no atoms in A")
    idx = match_rows(P - z, P)
    hit = idx >= 0
    return complex(np.sum(w[hit] * np.conj(w[idx[hit]])) / A.volume)
