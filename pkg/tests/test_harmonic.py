import numpy as np
import pytest

from meyerlab.autocorr import WeightedComb
from meyerlab.cutproject import TAU, fibonacci_scheme, fourier_candidates
from meyerlab.harmonic import (CharacterSet, almost_periods, character_deviation,
                               character_deviations, epsilon_dual_set, extract_period_lattice,
                               period_threshold, sup_distance, translation_distance)
from meyerlab.pointset import Box, difference_set
from meyerlab.verify import defect_comb, two_level_comb

PSI = Box((-100.0,), (100.0,))


@pytest.fixture(scope="module")
def dset(fib):
    return difference_set(fib, 50.0)


def test_character_deviation_formula():
    pts = np.array([[0.0], [1.0], [TAU]])
    chi = 0.37
    expected = max(abs(1 - np.exp(-2j * np.pi * x * chi)) for x in (0.0, 1.0, TAU))
    assert character_deviation(chi, pts) == pytest.approx(expected, abs=1e-14)
    assert character_deviation(-chi, pts) == character_deviation(chi, pts)


def test_integer_dual_of_integers():
    dset = np.arange(-20, 21, dtype=float)[:, None]
    dev = character_deviations(np.array([[0.0], [1.0], [-3.0], [0.5]]), dset)
    assert dev[:3].tolist() == [0.0, 0.0, 0.0]
    assert dev[3] == pytest.approx(2.0)


def test_fibonacci_dual_set_matches_window_bound(dset):
    # For a dual point (k, k*) the character deviation on the difference set is close
    # to 2 sin(pi tau |k*|), since the star images of differences fill (-tau, tau).
    cand, k_star = fourier_candidates(fibonacci_scheme(), PSI, 0.1, return_internal=True)
    dev = character_deviations(cand, dset)
    bound = 2 * np.sin(np.pi * TAU * np.abs(k_star[:, 0]))
    assert np.all(dev <= bound + 1e-12)
    assert np.all(dev >= 0.98 * bound)
    cs = epsilon_dual_set(dset, 0.1, PSI, candidates=cand)
    assert np.allclose(cs.members[:, 0], np.sort(cand[bound <= 0.1, 0]), atol=1e-12)
    expected = [21.0095, 33.9941, 55.0036, 88.9978]
    pos = cs.members[cs.members[:, 0] > 0, 0]
    assert np.allclose(pos, expected, atol=1e-4)


def test_dual_set_inside_small_region_is_origin(dset):
    cs = epsilon_dual_set(dset, 0.1, Box((-10.0,), (10.0,)),
                          candidates=fourier_candidates(fibonacci_scheme(), Box((-10.0,), (10.0,)), 0.1))
    assert cs.members[:, 0].tolist() == [0.0]


def test_grid_fallback_agrees_with_candidates(dset):
    region = Box((-10.0,), (10.0,))
    cand = fourier_candidates(fibonacci_scheme(), region, 0.5)
    by_cand = epsilon_dual_set(dset, 0.5, region, candidates=cand)
    by_grid = epsilon_dual_set(dset, 0.5, region)
    assert by_grid.method.startswith("grid:")
    assert np.allclose(by_grid.members, by_cand.members, atol=1e-6)
    assert np.allclose(by_cand.members[by_cand.members[:, 0] > 0, 0], [4.9597, 8.0249], atol=1e-4)


def test_dual_set_shrinks_with_truncation(fib):
    region = Box((-30.0,), (30.0,))
    cand = fourier_candidates(fibonacci_scheme(), region, 0.5)
    small = epsilon_dual_set(difference_set(fib, 10.0), 0.3, region, candidates=cand)
    large = epsilon_dual_set(difference_set(fib, 60.0), 0.3, region, candidates=cand)
    assert set(map(float, large.members[:, 0])) <= set(map(float, small.members[:, 0]))
    assert len(large) < len(small)


def test_dual_set_json_roundtrip(dset):
    cs = epsilon_dual_set(dset, 0.1, PSI, candidates=fourier_candidates(fibonacci_scheme(), PSI, 0.1))
    back = CharacterSet.from_dict(cs.to_dict())
    assert np.array_equal(back.members, cs.members)
    assert back.contains([21.00951949424901]).tolist() == [True]


def test_dual_set_validation(dset):
    with pytest.raises(ValueError):
        epsilon_dual_set(dset, 2.5, PSI)
    with pytest.raises(ValueError):
        epsilon_dual_set(dset, 0.1, Box((0.0, 0.0), (1.0, 1.0)))


def test_sup_distance_basic():
    r = Box((0.0,), (3.0,))
    mu = WeightedComb(1, [0.0, 1.0, 2.0], [1.0, 2.0, 3.0], r)
    nu = WeightedComb(1, [0.0, 1.0, 3.0], [1.0, 2.5, -1.0], r)
    assert sup_distance(mu, mu) == 0.0
    assert sup_distance(mu, nu) == 3.0  # the unmatched atom at 2
    assert sup_distance(mu, nu) == sup_distance(nu, mu)


def test_translation_distance_lattice():
    mu = two_level_comb(40, second=None)
    assert translation_distance(mu, 1.0) == 0.0
    assert translation_distance(mu, 3.0) == 0.0
    assert translation_distance(mu, 0.5) == 1.0
    assert translation_distance(mu, 100.0) == np.inf


def test_translation_distance_needs_atoms():
    mu = WeightedComb(1, [0.0, 1.0, TAU], [1.0, 1.0, 1.0], Box((0.0,), (TAU,)))
    # Overlap of [0, tau] with [1, 1 + tau] holds atoms only on its boundary.
    assert translation_distance(mu, 1.0, min_overlap=0.0) > 0


def test_almost_periods_two_level():
    mu = two_level_comb(60)
    rep = almost_periods(mu, 0.5, [[1.0], [0.3], [2.0], [0.7]])
    assert rep.passing[:, 0].tolist() == [1.0, 2.0]
    assert rep.to_dict()["passing"] == [[1.0], [2.0]]


def test_period_threshold():
    assert period_threshold(two_level_comb(20)) == pytest.approx(1.0)
    mu = WeightedComb(1, [0.0, 1.0], [1.0, 1.25], Box((0.0,), (1.0,)))
    assert period_threshold(mu) == pytest.approx(0.25)


def test_extract_lattice_two_level():
    mu = two_level_comb(100)
    cands = np.arange(1, 30, dtype=float)[:, None] * 0.1
    lat = extract_period_lattice(mu, 0.5, cands)
    assert lat is not None
    assert abs(lat.basis[0, 0] - 1.0) <= 1e-9


def test_extract_lattice_rejects_large_eps():
    with pytest.raises(ValueError):
        extract_period_lattice(two_level_comb(20), 1.0, [[1.0]])


def test_extract_lattice_aperiodic(fib_small):
    mu = WeightedComb.from_pointset(fib_small)
    cands = difference_set(fib_small, 32.0).points
    assert extract_period_lattice(mu, 0.5, cands[cands[:, 0] > 0]) is None


def test_extract_lattice_incommensurate():
    mu = WeightedComb(1, [0.0, 1.0, TAU], [1.0, 1.0, 1.0], Box((0.0,), (TAU,)))
    assert extract_period_lattice(mu, 0.5, [[1.0], [TAU], [TAU - 1]]) is None


def test_extract_lattice_defect_breaks_periodicity():
    mu = defect_comb(60)
    cands = np.arange(1, 20, dtype=float)[:, None]
    assert extract_period_lattice(mu, 0.5, cands) is None


def test_extract_lattice_two_dim():
    g = np.arange(-6, 7, dtype=float)
    zz = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
    half = zz[(zz[:, 0] < 6) & (zz[:, 1] < 6)] + 0.5
    region = Box((-6.0, -6.0), (6.0, 6.0))
    cands = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.5, -0.5], [1.0, 1.0], [2.0, 0.0]])
    weighted = WeightedComb(2, np.vstack([zz, half]),
                            np.concatenate([np.ones(len(zz)), 2 * np.ones(len(half))]), region)
    lat = extract_period_lattice(weighted, 0.5, cands)
    assert lat is not None and abs(abs(np.linalg.det(lat.basis)) - 1.0) < 1e-9
    uniform = WeightedComb(2, np.vstack([zz, half]), np.ones(len(zz) + len(half)), region)
    lat = extract_period_lattice(uniform, 0.5, cands)
    assert lat is not None and abs(abs(np.linalg.det(lat.basis)) - 0.5) < 1e-9


def test_integer_dual_set(zset, z_scheme):
    region = Box((-3.0,), (3.0,))
    cs = epsilon_dual_set(difference_set(zset, 20.0), 0.1, region,
                          candidates=fourier_candidates(z_scheme, region, 1.0))
    assert cs.members[:, 0].tolist() == [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]


def test_fibonacci_dual_set_relatively_dense(dset):
    from meyerlab.pointset import PointSet, covering_radius

    region = Box((-10.0,), (10.0,))
    cs = epsilon_dual_set(dset, 0.5, region,
                          candidates=fourier_candidates(fibonacci_scheme(), region, 0.5))
    assert len(cs) >= 3
    assert covering_radius(PointSet(1, cs.members, region)) <= 4.0


def test_dual_sets_nest_in_eps(dset):
    cand = fourier_candidates(fibonacci_scheme(), PSI, 0.3)
    small = epsilon_dual_set(dset, 0.1, PSI, candidates=cand)
    big = epsilon_dual_set(dset, 0.3, PSI, candidates=cand)
    assert np.all(big.contains(small.members))
    assert len(big) > len(small)
