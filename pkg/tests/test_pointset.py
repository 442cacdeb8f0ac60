import numpy as np
import pytest

from meyerlab.cutproject import TAU
from meyerlab.pointset import (Box, PointSet, TruncationWarning, build_pointset, covering_radius,
                               deform, density_bounds, difference_set, intersect, meyer_certificate,
                               min_separation, symmetric_difference, thin)


def test_box_geometry():
    b = Box((0.0, -1.0), (4.0, 1.0))
    assert b.dim == 2
    assert b.volume == pytest.approx(8.0)
    assert b.center.tolist() == [2.0, 0.0]
    assert b.shrink(0.5).volume == pytest.approx(3.0)
    assert b.scaled(0.5).extent.tolist() == [2.0, 1.0]
    assert b.intersect(Box((3.0, 0.0), (9.0, 9.0))) == Box((3.0, 0.0), (4.0, 1.0))
    assert b.intersect(Box((5.0, 0.0), (9.0, 9.0))) is None
    assert Box.from_dict(b.to_dict()) == b


def test_box_rejects_bad_bounds():
    with pytest.raises(ValueError):
        Box((1.0,), (0.0,))


def test_build_sorts_and_checks_region():
    ps = build_pointset(1, [3.0, 1.0, 2.0], Box((0.0,), (4.0,)))
    assert ps.coords.tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        build_pointset(1, [5.0], Box((0.0,), (4.0,)))
    assert len(build_pointset(1, [1.0, 1.0 + 1e-12], Box((0.0,), (4.0,)))) == 1


def test_pointset_json_roundtrip(fib_small):
    back = PointSet.from_dict(fib_small.to_dict())
    assert np.array_equal(back.points, fib_small.points)
    assert back.region == fib_small.region


def test_fibonacci_gaps(fib):
    gaps = np.diff(fib.coords)
    assert set(np.round(gaps, 9)) == {1.0, round(TAU, 9)}
    assert min_separation(fib) == pytest.approx(1.0)


def test_covering_radius_fibonacci(fib):
    # Largest hole is a long tile; away from the region ends the radius is tau / 2.
    assert covering_radius(fib, margin=2.0) == pytest.approx(TAU / 2)


def test_covering_radius_lattice(zset):
    # The last point is 9999 on [0, 10^4], so the right end sits 1 away from the patch.
    assert covering_radius(zset) == 1.0
    assert covering_radius(zset, margin=1.5) == pytest.approx(0.5, abs=1e-12)


def test_difference_set_of_fibonacci(fib):
    d = difference_set(fib, 5.0).coords
    # Differences of Fibonacci points are m + n tau; within 5 the set is symmetric.
    assert np.allclose(np.sort(d), np.sort(-d))
    assert 0.0 in d
    expected = [0.0, 1.0, TAU, 1 + TAU, 2 * TAU, 2 + TAU, 1 + 2 * TAU]
    assert np.allclose(d[d >= 0], expected, atol=1e-9)
    # No two short tiles are adjacent, so 2 never occurs.
    assert np.min(np.abs(d - 2.0)) > 0.1


def test_density_of_lattice_is_exact(zset):
    est = density_bounds(zset, 1000.0)
    assert est.lower == est.upper == 1.0


def test_density_of_fibonacci(fib):
    est = density_bounds(fib, 1382.0)
    dens = TAU / 5 ** 0.5
    assert est.lower <= dens <= est.upper
    assert est.upper - est.lower < 3.0 / 1382.0


def test_density_window_too_large(fib_small):
    with pytest.raises(ValueError):
        density_bounds(fib_small, fib_small.region.extent[0])


def test_meyer_certificate_fibonacci(fib):
    cert = meyer_certificate(fib, 10.0, Box((-3.0,), (3.0,)))
    assert cert.is_delone and cert.verdict
    assert cert.min_sep == pytest.approx(1.0)
    # The closest distinct differences, 2 tau and 2 + tau, are 2 - tau apart.
    assert cert.delta_min_sep == pytest.approx(2 - TAU)
    assert len(cert.uncovered) == 0
    assert 0 < len(cert.cover_F) <= 6


def test_difference_set_flags_truncation(fib_small):
    with pytest.warns(TruncationWarning):
        difference_set(fib_small, 1.1 * fib_small.region.extent[0])


def test_deform_remove_add():
    ps = build_pointset(1, [0.0, 1.0, 2.0, 3.0], Box((0.0,), (4.0,)))
    out, n = deform(ps, [1.0], [1.5, 3.5])
    assert out.coords.tolist() == [0.0, 1.5, 2.0, 3.0, 3.5]
    assert n == 3
    assert symmetric_difference(ps, out).shape[0] == 3
    assert intersect(ps, out).shape[0] == 3


def test_deform_errors():
    ps = build_pointset(1, [0.0, 1.0], Box((0.0,), (4.0,)))
    with pytest.raises(ValueError):
        deform(ps, [0.5])
    with pytest.raises(ValueError):
        deform(ps, [], [1.0])
    with pytest.raises(ValueError):
        deform(ps, [0.0, 1.0])


def test_thin_is_seeded(fib_small):
    a, b = thin(fib_small, 0.1, 3), thin(fib_small, 0.1, 3)
    assert np.array_equal(a, b)
    assert 50 < len(a) < 150
    assert not np.array_equal(a, thin(fib_small, 0.1, 4))
    with pytest.raises(ValueError):
        thin(fib_small, 1.5, 0)
