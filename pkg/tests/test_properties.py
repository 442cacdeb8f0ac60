"""Property suites: every test runs at least 200 hypothesis examples."""

import numpy as np
from hypothesis import example, given, settings
from hypothesis import strategies as st

from meyerlab.autocorr import WeightedComb, finite_autocorrelation
from meyerlab.harmonic import character_deviations, epsilon_dual_set, sup_distance
from meyerlab.pointset import Box, build_pointset, deform, difference_set, symmetric_difference
from meyerlab.spectrum import IntensityEstimator, SpectrumEstimate, interval_peaks, visible_peaks

MIN_EXAMPLES = 200
PROPS = settings(max_examples=MIN_EXAMPLES, deadline=None)

grid_ints = st.lists(st.integers(-60, 60), min_size=2, max_size=25, unique=True)
freqs = st.floats(-20, 20, allow_nan=False, allow_infinity=False)
eps_values = st.floats(0.01, 1.9)


def _dset(ints, scale):
    pts = np.array(sorted(ints), dtype=float)[:, None] * scale
    return np.vstack([pts, -pts, [[0.0]]])


@st.composite
def point_sets(draw, lo=0.0, hi=40.0):
    ints = draw(st.lists(st.integers(0, 399), min_size=3, max_size=40, unique=True))
    x = lo + np.array(ints, dtype=float) * (hi - lo) / 400
    return build_pointset(1, x, Box((lo,), (hi,)))


@st.composite
def combs(draw, complex_weights=True):
    ints = draw(st.lists(st.integers(0, 199), min_size=2, max_size=30, unique=True))
    x = np.array(ints, dtype=float) * 0.25
    re = draw(st.lists(st.floats(-3, 3), min_size=len(ints), max_size=len(ints)))
    im = draw(st.lists(st.floats(-3, 3), min_size=len(ints), max_size=len(ints))) if complex_weights \
        else [0.0] * len(ints)
    return WeightedComb(1, x, np.array(re) + 1j * np.array(im), Box((0.0,), (50.0,)))


# ---- epsilon-dual sets -------------------------------------------------------------


@PROPS
@given(grid_ints, st.floats(0.3, 3.0), st.lists(freqs, min_size=1, max_size=30), eps_values)
@example([0, 1], 1.0, [1e-9], 1.0)  # a candidate exactly TOL from the origin
def test_dual_set_symmetric(ints, scale, cands, eps):
    region = Box((-20.0,), (20.0,))
    cs = epsilon_dual_set(_dset(ints, scale), eps, region, candidates=np.array(cands)[:, None])
    m = cs.members[:, 0]
    assert 0.0 in m
    assert np.allclose(np.sort(m), np.sort(-m), atol=1e-12)


@PROPS
@given(grid_ints, st.floats(0.3, 3.0), st.lists(freqs, min_size=1, max_size=30), eps_values, eps_values)
def test_dual_set_monotone_in_eps(ints, scale, cands, e1, e2):
    lo, hi = min(e1, e2), max(e1, e2)
    region = Box((-20.0,), (20.0,))
    c = np.array(cands)[:, None]
    small = epsilon_dual_set(_dset(ints, scale), lo, region, candidates=c)
    big = epsilon_dual_set(_dset(ints, scale), hi, region, candidates=c)
    assert np.all(big.contains(small.members))


@PROPS
@given(grid_ints, st.floats(0.3, 3.0), freqs, freqs)
def test_character_deviation_subadditive(ints, scale, c1, c2):
    d = _dset(ints, scale)
    dev = character_deviations(np.array([[c1], [c2], [c1 + c2]]), d)
    assert dev[2] <= dev[0] + dev[1] + 1e-12


# ---- sup distance ---------------------------------------------------------------


@PROPS
@given(combs(), combs(), combs())
def test_sup_distance_pseudometric(a, b, c):
    assert sup_distance(a, a) == 0.0
    assert sup_distance(a, b) == sup_distance(b, a)
    assert sup_distance(a, b) >= 0.0
    assert sup_distance(a, c) <= sup_distance(a, b) + sup_distance(b, c) + 1e-12


# ---- visible peak sets -------------------------------------------------------------


@PROPS
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40), st.floats(1e-3, 1.0),
       st.floats(1e-3, 1.0))
def test_visible_sets_nest(intensities, a1, a2):
    n = len(intensities)
    spec = SpectrumEstimate(1, np.arange(n, dtype=float)[:, None], np.array(intensities),
                            np.zeros(n), "structure_factor", 1.0, 1.0, 0.0, 0.0,
                            Box((0.0,), (float(n),)))
    lo, hi = min(a1, a2), max(a1, a2)
    small, big = visible_peaks(spec, hi), visible_peaks(spec, lo)
    assert set(small.chis[:, 0]) <= set(big.chis[:, 0])
    if lo < hi:
        band = interval_peaks(spec, lo, hi)
        assert set(band.chis[:, 0]) <= set(big.chis[:, 0]) - set(small.chis[:, 0])


# ---- spectrum symmetry ----------------------------------------------------------------


@PROPS
@given(point_sets(), st.lists(freqs, min_size=1, max_size=10))
def test_spectrum_even_for_real_combs(ps, chis):
    c = np.array(chis)[:, None]
    sf = IntensityEstimator(ps, ps.region, "structure_factor")
    assert np.array_equal(sf(c), sf(-c))
    eq = IntensityEstimator(ps, ps.region, "eqhof", lag_radius=5.0, one_sided=False)
    assert np.allclose(eq(c), eq(-c), atol=1e-12)


# ---- deformations ------------------------------------------------------------------


@PROPS
@given(point_sets(), st.data())
def test_deform_involution(ps, data):
    k = data.draw(st.integers(0, len(ps) - 1))
    idx = data.draw(st.lists(st.integers(0, len(ps) - 1), min_size=0, max_size=k, unique=True))
    removed = ps.points[sorted(idx)]
    gam, n = deform(ps, removed, ())
    assert n == len(removed)
    assert len(symmetric_difference(ps, gam)) == len(removed)
    back, _ = deform(gam, (), removed)
    assert np.array_equal(back.points, ps.points)


# ---- autocorrelation --------------------------------------------------------------


@PROPS
@given(combs(), st.floats(0.5, 20.0), st.booleans())
def test_autocorrelation_hermitian(mu, radius, one_sided):
    A = mu.region.shrink(radius) if one_sided and radius < 20 else mu.region
    if len(mu.support(A)[0]) == 0:
        A = mu.region
    gamma = finite_autocorrelation(mu, A, radius, one_sided=one_sided and A != mu.region)
    assert np.allclose(gamma.weight_at(-gamma.positions), np.conj(gamma.weights), atol=1e-12)


@PROPS
@given(combs(complex_weights=False), st.floats(0.5, 20.0))
def test_autocorrelation_support_in_difference_set(mu, radius):
    gamma = finite_autocorrelation(mu, mu.region, radius)
    ps = build_pointset(1, mu.positions, mu.region)
    dset = difference_set(ps, radius)
    ref = dset.points[:, 0]
    for z in gamma.positions[:, 0]:
        assert np.min(np.abs(ref - z)) <= 1e-9
        assert abs(z) <= radius + 1e-9
