"""Bragg intensity estimators, spectrum scans and visible-peak sets.

Two estimators of the pure-point intensity at a frequency ``chi`` are provided.

``structure_factor``
    ``|sum_x w(x) e^{2 pi i x.chi}|^2 / Vol(A)^2`` over the atoms in ``A``.  This is
    exactly the lag-window average of the finite autocorrelation over *all* its lags,
    so it is nonnegative and every inequality between positive combs survives.
``eqhof``
    ``(1/Vol(W)) Re sum_z gamma(z) k(z) e^{2 pi i z.chi}`` for an autocorrelation
    ``gamma`` on a lag window ``W = [-R, R]^d``.  ``k`` is a Fejer (triangle) taper of
    unit mean on ``W``; ``taper="none"`` gives the plain window average.

Characters are ``chi(x) = e^{-2 pi i x.chi}``, so averages integrate against the
conjugate ``e^{+2 pi i x.chi}``.  For real weights the two signs agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import cKDTree

from ._util import TOL, as_points, chunked_map, frac_phase, lexsort_rows, match_rows, rng
from .autocorr import WeightedComb, finite_autocorrelation
from .pointset import Box, PointSet

ESTIMATORS = ("eqhof", "structure_factor")
#: Number of random off-candidate frequencies used for the noise floor.
NOISE_SAMPLES = 16
#: Off-candidate samples keep this many resolution lengths away from every candidate.
NOISE_CLEARANCE = 32.0
_PHASE_BUDGET = 1 << 22  # complex entries per exponential-sum block


def _as_comb(source) -> WeightedComb:
    if isinstance(source, WeightedComb):
        return source
    if isinstance(source, PointSet):
        return WeightedComb.from_pointset(source)
    raise TypeError(f"expected PointSet or WeightedComb, got {type(source).__name__}")


def exp_sum(positions: np.ndarray, weights: np.ndarray, chis: np.ndarray) -> np.ndarray:
    """``sum_x w(x) e^{2 pi i x.chi}`` for each row of ``chis`` (phases reduced first)."""
    if len(positions) == 0:
        return np.zeros(len(chis), dtype=complex)
    block = max(1, _PHASE_BUDGET // len(positions))

    def one(ch):
        return np.exp(2j * np.pi * frac_phase(positions, ch)) @ weights

    return chunked_map(one, chis, block).astype(complex)


def _scalar_or_array(values: np.ndarray, chi, dim: int):
    """A float for a single frequency (scalar in 1-d, length-``dim`` vector in 2-d)."""
    single = np.ndim(chi) == 0 or (dim > 1 and np.ndim(chi) == 1)
    return float(values[0]) if single else values


def intensity_structure_factor(source, A: Box, chi):
    """Normalised squared exponential sum of the atoms of ``source`` inside ``A``."""
    comb = _as_comb(source)
    P, w = comb.support(A)
    if len(P) == 0:
        raise ValueError("no atoms inside A")
    chis = as_points(chi, comb.dim)
    vals = np.abs(exp_sum(P, w, chis)) ** 2 / A.volume ** 2
    return _scalar_or_array(vals, chi, comb.dim)


def fejer_taper(z: np.ndarray, window: Box) -> np.ndarray:
    """Product triangle kernel on ``window`` with mean 1 (peak ``2^d`` at the centre)."""
    half = window.extent / 2
    t = np.clip(1 - np.abs(z - window.center) / half, 0, None)
    return np.prod(2 * t, axis=1)


def intensity_eqhof(gamma: WeightedComb, A: Box, chi, *, taper: str = "fejer",
                    return_imag: bool = False):
    """Lag-window average of ``gamma`` against the conjugate character.

    ``A`` is the lag window.  With ``taper="none"`` a lattice comb gives exactly
    ``#lags / Vol(A)`` at integer frequencies; the Fejer taper removes the ``1/R``
    edge term and keeps the estimate of a positive-definite ``gamma`` near
    nonnegative.  ``return_imag`` also returns the imaginary parts, which vanish for
    Hermitian ``gamma`` up to rounding.
    """
    if taper not in ("fejer", "none"):
        raise ValueError(f"unknown taper {taper!r}")
    Z, g = gamma.support(A)
    if len(Z) == 0:
        raise ValueError("gamma has no support inside A")
    if taper == "fejer":
        g = g * fejer_taper(Z, A)
    chis = as_points(chi, gamma.dim)
    vals = exp_sum(Z, g, chis) / A.volume
    re = _scalar_or_array(vals.real, chi, gamma.dim)
    if return_imag:
        return re, _scalar_or_array(vals.imag, chi, gamma.dim)
    return re


def fejer_pair_sum_1d(src: np.ndarray, ws: np.ndarray, dst: np.ndarray, wd: np.ndarray,
                      R: float, chis: np.ndarray) -> np.ndarray:
    """``sum_{x, y: |x - y| <= R} w(x) conj w(y) (1 - |x - y|/R) e^{2 pi i (x - y) chi}``.

    ``dst`` must be sorted.  The triangle weight is affine in ``y`` on either side of
    ``x``, so the inner sum over partners is a difference of two prefix sums (of
    ``conj w(y) e^{-2 pi i y chi}`` and of ``y`` times it).  The cost is linear in the
    number of atoms per frequency instead of linear in the number of pairs.
    """
    x, y = src[:, 0], dst[:, 0]
    c = float(y.mean())
    xc, yc = x - c, y - c
    lo = np.searchsorted(y, x - R - TOL, side="left")
    mid = np.searchsorted(y, x - TOL, side="left")
    hi = np.searchsorted(y, x + R + TOL, side="right")
    block = max(1, _PHASE_BUDGET // (len(y) + len(x)))

    def one(ch):
        E = np.exp(-2j * np.pi * frac_phase(dst, ch)) * np.conj(wd)
        zero = np.zeros((len(ch), 1), dtype=complex)
        C0 = np.concatenate([zero, np.cumsum(E, axis=1)], axis=1)
        C1 = np.concatenate([zero, np.cumsum(E * yc, axis=1)], axis=1)
        left0, left1 = C0[:, mid] - C0[:, lo], C1[:, mid] - C1[:, lo]
        right0, right1 = C0[:, hi] - C0[:, mid], C1[:, hi] - C1[:, mid]
        inner = (1 - xc / R) * left0 + left1 / R + (1 + xc / R) * right0 - right1 / R
        outer = np.exp(2j * np.pi * frac_phase(src, ch)) * ws
        return np.sum(outer * inner, axis=1)

    return chunked_map(one, as_points(chis, 1), block).astype(complex)


@dataclass(frozen=True)
class SpectrumEstimate:
    """Estimated intensities at a list of frequencies."""

    dim: int
    chis: np.ndarray = field(repr=False)
    intensities: np.ndarray = field(repr=False)
    stderr_proxy: np.ndarray = field(repr=False)
    estimator: str
    patch_volume: float
    i_zero: float
    noise_floor: float
    imag_residual: float
    freq_region: Box
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.intensities)

    @property
    def entries(self) -> list[tuple[np.ndarray, float, float]]:
        return list(zip(self.chis, self.intensities.tolist(), self.stderr_proxy.tolist()))

    @property
    def i_sup(self) -> float:
        return float(max(self.i_zero, self.intensities.max(initial=-np.inf)))

    def intensity_at(self, chi) -> np.ndarray:
        """Stored intensity at each query frequency (NaN where it was not scanned)."""
        q = as_points(chi, self.dim)
        idx = match_rows(q, self.chis)
        return np.where(idx >= 0, self.intensities[np.maximum(idx, 0)], np.nan)

    def as_comb(self) -> WeightedComb:
        """The estimated pure-point part as a comb on the scanned frequencies."""
        return WeightedComb(self.dim, self.chis, self.intensities, self.freq_region)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "estimator": self.estimator,
                "patch_volume": self.patch_volume, "i_zero": self.i_zero,
                "noise_floor": self.noise_floor, "imag_residual": self.imag_residual,
                "freq_region": self.freq_region.to_dict(), "params": self.params,
                "entries": [{"chi": c.tolist(), "intensity": float(i), "stderr_proxy": float(s)}
                            for c, i, s in zip(self.chis, self.intensities, self.stderr_proxy)]}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumEstimate":
        dim = int(d["dim"])
        ent = d["entries"]
        return cls(dim, np.array([e["chi"] for e in ent], dtype=float).reshape(-1, dim),
                   np.array([e["intensity"] for e in ent], dtype=float),
                   np.array([e["stderr_proxy"] for e in ent], dtype=float),
                   d["estimator"], float(d["patch_volume"]), float(d["i_zero"]),
                   float(d["noise_floor"]), float(d["imag_residual"]),
                   Box.from_dict(d["freq_region"]), dict(d.get("params", {})))

    def to_csv(self, columns=("chi", "intensity", "stderr_proxy")) -> str:
        heads = []
        for col in columns:
            heads += [f"chi{k + 1}" for k in range(self.dim)] if col == "chi" and self.dim > 1 else [col]
        lines = [",".join(heads)]
        for c, i, s in zip(self.chis, self.intensities, self.stderr_proxy):
            row = []
            for col in columns:
                row += [repr(float(v)) for v in c] if col == "chi" else \
                    [repr(float(i if col == "intensity" else s))]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


class IntensityEstimator:
    """Intensity evaluator bound to one source, patch and estimator choice."""

    def __init__(self, source, A: Box, estimator: str, lag_radius=None, taper="fejer",
                 one_sided=True):
        if estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        self.comb = _as_comb(source)
        if A.dim != self.comb.dim:
            raise ValueError("box dimension mismatch")
        P, _ = self.comb.support(A)
        if len(P) == 0:
            raise ValueError("no atoms inside A")
        self.A, self.estimator, self.taper = A, estimator, taper
        L = float(A.extent.min())
        if estimator == "structure_factor":
            self.resolution = 1.0 / L
            self.lag_radius = None
            return
        R = float(lag_radius) if lag_radius is not None else L / 16
        if taper not in ("fejer", "none"):
            raise ValueError(f"unknown taper {taper!r}")
        if one_sided:
            inner = A.shrink(R) if np.all(A.extent > 2 * R) else None
            if inner is None or len(self.comb.support(inner)[0]) == 0:
                raise ValueError("patch too small for this lag radius")
        else:
            inner = A
        self.inner = inner
        self.window = Box.centered(2 * R, self.comb.dim)
        self.lag_radius, self.one_sided = R, one_sided
        self.resolution = 1.0 / R
        self._gamma = None
        # In 1-d the tapered lag sum is evaluated from prefix sums, without a lag map.
        self.direct = self.comb.dim == 1 and taper == "fejer"

    @property
    def gamma(self) -> WeightedComb:
        """The (lazily built) finite autocorrelation behind the windowed average."""
        if self._gamma is None:
            if self.one_sided:
                restricted = WeightedComb(self.comb.dim, *self.comb.support(self.A), self.A)
                self._gamma = finite_autocorrelation(restricted, self.inner, self.lag_radius,
                                                     one_sided=True)
            else:
                self._gamma = finite_autocorrelation(self.comb, self.A, self.lag_radius)
        return self._gamma

    def __call__(self, chis: np.ndarray, return_imag=False):
        chis = as_points(chis, self.comb.dim)
        if self.estimator == "structure_factor":
            P, w = self.comb.support(self.A)
            vals = np.abs(exp_sum(P, w, chis)) ** 2 / self.A.volume ** 2
            return (vals, np.zeros_like(vals)) if return_imag else vals
        if self.direct:
            src, ws = self.comb.support(self.inner)
            dst, wd = self.comb.support(self.A)
            S = fejer_pair_sum_1d(src, ws, dst, wd, self.lag_radius, chis)
            # gamma is symmetrised, so its tapered sum is the real part of S exactly.
            vals = S.real / (self.lag_radius * self.inner.volume)
            return (vals, np.zeros_like(vals)) if return_imag else vals
        Z, g = self.gamma.support(self.window)
        if self.taper == "fejer":
            g = g * fejer_taper(Z, self.window)
        raw = exp_sum(Z, g, chis) / self.window.volume
        return (raw.real, raw.imag) if return_imag else raw.real

    def halved(self) -> "IntensityEstimator":
        """Same estimator on the concentric half-size patch (for the convergence proxy)."""
        R = None if self.lag_radius is None else self.lag_radius / 2
        return IntensityEstimator(self.comb, self.A.scaled(0.5), self.estimator, R, self.taper,
                          getattr(self, "one_sided", True))


def grid_candidates(freq_region: Box, step: float) -> np.ndarray:
    """Integer multiples of ``step`` inside ``freq_region`` (symmetric when the region is)."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    axes = [np.arange(np.ceil(lo / step - TOL), np.floor(hi / step + TOL) + 1) * step
            for lo, hi in zip(freq_region.lo, freq_region.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    pts[np.abs(pts) <= TOL] = 0.0
    return pts[lexsort_rows(pts)]


def _bounding_box(chis: np.ndarray, pad: float = 0.5) -> Box:
    lo, hi = chis.min(axis=0), chis.max(axis=0)
    flat = hi - lo < TOL
    return Box(tuple(np.where(flat, lo - pad, lo)), tuple(np.where(flat, hi + pad, hi)))


def noise_floor(evaluate, freq_region: Box, avoid: np.ndarray, clearance: float, *,
                n_samples: int = NOISE_SAMPLES, seed: int = 0) -> tuple[float, np.ndarray]:
    """Largest ``|intensity|`` at seeded random frequencies at least ``clearance`` from ``avoid``.

    Returns ``(floor, sample_frequencies)``.  If the region leaves no room the
    clearance is halved until samples can be placed.
    """
    gen = rng(seed)
    lo, ext = freq_region.lo_arr, freq_region.extent
    tree = cKDTree(avoid) if len(avoid) else None
    picked = np.zeros((0, freq_region.dim))
    for _ in range(20):
        draw = lo + gen.random((64 * n_samples, freq_region.dim)) * ext
        if tree is not None:
            dist, _ = tree.query(draw, k=1)
            draw = draw[dist >= clearance]
        picked = draw[:n_samples]
        if len(picked) == n_samples:
            break
        clearance /= 2
    if len(picked) == 0:
        return 0.0, picked
    return float(np.max(np.abs(evaluate(picked)))), picked


def _refine(evaluate, chis: np.ndarray, half_width: float) -> np.ndarray:
    """Local maximisation of the intensity in a ``±half_width`` bracket around each chi."""
    out = chis.copy()
    for k, c in enumerate(chis):
        if np.all(np.abs(c) <= TOL):
            continue  # the origin is a peak of every positive comb
        if len(c) == 1:
            res = minimize_scalar(lambda t: -evaluate(np.array([[t]]))[0],
                                  bounds=(c[0] - half_width, c[0] + half_width), method="bounded",
                                  options={"xatol": 1e-12})
            out[k] = [res.x]
        else:
            bounds = [(v - half_width, v + half_width) for v in c]
            res = minimize(lambda t: -evaluate(t[None, :])[0], c, method="Nelder-Mead",
                           bounds=bounds, options={"xatol": 1e-12, "fatol": 1e-15})
            out[k] = res.x
    return out


def scan_spectrum(source, A: Box, candidates, estimator: str = "structure_factor", *,
                  lag_radius: float | None = None, taper: str = "fejer", one_sided: bool = True,
                  refine_step: float | None = None, seed: int = 0,
                  freq_region: Box | None = None) -> SpectrumEstimate:
    """Evaluate ``estimator`` at every candidate frequency.

    ``stderr_proxy`` is ``|I(patch) - I(half patch)|`` with the half patch concentric.
    The noise floor is the largest magnitude at 16 seeded frequencies kept clear of
    the candidates by 32 resolution lengths (``1/L`` for the structure factor,
    ``1/R`` for the windowed average).  With ``refine_step`` each nonzero candidate
    is moved to the local maximum within half a step.
    """
    comb = _as_comb(source)
    chis = as_points(candidates, comb.dim)
    if len(chis) == 0:
        raise ValueError("no candidate frequencies")
    est = IntensityEstimator(comb, A, estimator, lag_radius, taper, one_sided)
    if refine_step is not None:
        chis = _refine(est, chis, refine_step / 2)
    order = lexsort_rows(chis)
    chis = chis[order]
    vals, imag = est(chis, return_imag=True)
    zero = np.zeros((1, comb.dim))
    i_zero = float(est(zero)[0])
    half = est.halved()
    stderr = np.abs(vals - half(chis))
    region = freq_region if freq_region is not None else _bounding_box(chis)
    floor, _ = noise_floor(est, region, chis, NOISE_CLEARANCE * est.resolution, seed=seed)
    resid = float(np.max(np.abs(imag)) / abs(i_zero)) if i_zero else float(np.max(np.abs(imag)))
    params = {"estimator": estimator, "patch": A.to_dict(), "seed": seed,
              "n_candidates": int(len(chis)), "refine_step": refine_step}
    if estimator == "eqhof":
        params.update(lag_radius=est.lag_radius, taper=taper,
                      autocorrelation="one_sided" if one_sided else "restricted")
    return SpectrumEstimate(comb.dim, chis, vals, stderr, estimator, A.volume, i_zero, floor,
                            resid, region, params)


@dataclass(frozen=True)
class PeakSet:
    """Frequencies of a spectrum estimate whose intensity passes a threshold filter."""

    threshold: float
    chis: np.ndarray = field(repr=False)
    intensities: np.ndarray = field(repr=False)
    source: SpectrumEstimate = field(repr=False, compare=False)
    lower: float | None = None  # set for interval (band) peak sets

    def __len__(self) -> int:
        return len(self.intensities)

    @property
    def peaks(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.chis, self.intensities.tolist()))

    def as_pointset(self, region: Box | None = None) -> PointSet:
        return PointSet(self.source.dim, self.chis, region or self.source.freq_region)

    def to_dict(self) -> dict:
        d = {"threshold": self.threshold, "lower": self.lower,
             "estimator": self.source.estimator, "i_zero": self.source.i_zero,
             "peaks": [{"chi": c.tolist(), "intensity": float(i)}
                       for c, i in zip(self.chis, self.intensities)]}
        return d


def visible_peaks(spec: SpectrumEstimate, a: float) -> PeakSet:
    """Scanned frequencies with intensity ``>= a``; empty once ``a`` exceeds the supremum."""
    if not a > 0:
        raise ValueError("threshold a must be positive (for a <= 0 every frequency qualifies)")
    keep = spec.intensities >= a
    return PeakSet(float(a), spec.chis[keep], spec.intensities[keep], spec)


def interval_peaks(spec: SpectrumEstimate, b: float, a: float) -> PeakSet:
    """Scanned frequencies with ``b < intensity < a`` (strict on both sides)."""
    if not b > 0:
        raise ValueError("lower threshold b must be positive")
    if b >= a:
        raise ValueError(f"need b < a, got b={b}, a={a}")
    keep = (spec.intensities > b) & (spec.intensities < a)
    return PeakSet(float(a), spec.chis[keep], spec.intensities[keep], spec, lower=float(b))
