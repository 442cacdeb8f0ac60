import warnings

import numpy as np
import pytest

from meyerlab.cutproject import (TAU, TAU_CONJ, CollisionWarning, CutProjectScheme, EmbeddingLattice,
                                 dual_lattice, fibonacci_scheme, fibonacci_word, fourier_candidates,
                                 generate_fibonacci, generate_lattice_patch, generate_model_set,
                                 integer_scheme, preset_scheme)
from meyerlab.pointset import Box


def test_fibonacci_word_prefix():
    assert fibonacci_word(13) == "abaababaabaab"
    counts = fibonacci_word(10_000).count("a") / 10_000
    assert counts == pytest.approx(1 / TAU, abs=1e-3)


def test_fibonacci_patch_endpoints():
    ps = generate_fibonacci(8)
    expected = [0, TAU, TAU + 1, 2 * TAU + 1, 3 * TAU + 1, 3 * TAU + 2, 4 * TAU + 2, 4 * TAU + 3]
    assert np.allclose(ps.coords, expected, atol=1e-12)
    assert ps.region.hi[0] == pytest.approx(5 * TAU + 3)


def test_scheme_density():
    s = fibonacci_scheme()
    assert s.lattice.covolume == pytest.approx(5 ** 0.5)
    assert s.density == pytest.approx(TAU / 5 ** 0.5)
    assert integer_scheme(2).density == 1.0


def test_scheme_roundtrip():
    s = fibonacci_scheme()
    back = CutProjectScheme.from_dict(s.to_dict())
    assert np.array_equal(back.lattice.basis, s.lattice.basis)
    assert back.window == s.window


def test_scheme_validation():
    with pytest.raises(ValueError):
        CutProjectScheme(EmbeddingLattice(np.eye(2)), 1, 0, None)
    with pytest.raises(ValueError):
        EmbeddingLattice(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ValueError):
        preset_scheme("penrose")


def test_model_set_matches_substitution_up_to_translation():
    # Both constructions produce the same tile sequence; compare the gap sequences.
    ms = generate_model_set(fibonacci_scheme(), Box((0.0,), (2000.0,)))
    gaps = np.round(np.diff(ms.coords), 9)
    assert set(gaps) == {1.0, round(TAU, 9)}
    assert len(ms) / 2000.0 == pytest.approx(TAU / 5 ** 0.5, abs=2e-3)
    word = "".join("a" if g > 1.5 else "b" for g in gaps)
    assert "bb" not in word and "aaa" not in word
    assert word[5:30] in fibonacci_word(5000)


def test_model_set_internal_coordinates_in_window():
    s = fibonacci_scheme()
    ms = generate_model_set(s, Box((-50.0,), (50.0,)))
    # Every x = m + n tau has star image m + n tau' in [-1, tau - 1).
    for x in ms.coords:
        n = None
        for cand in range(-80, 81):
            m = x - cand * TAU
            if abs(m - round(m)) < 1e-9:
                n, m = cand, round(m)
                break
        assert n is not None
        star = m + n * TAU_CONJ
        assert -1 - 1e-9 <= star < TAU - 1


def test_lattice_patch_counts():
    ps = generate_lattice_patch(np.eye(2), Box((0.0, 0.0), (4.0, 2.0)))
    assert len(ps) == 15
    with pytest.raises(ValueError):
        generate_lattice_patch(np.zeros((2, 2)), Box((0.0, 0.0), (1.0, 1.0)))


def test_collision_warning():
    # Physical projection of Z^2 onto the first axis with a wide window collides.
    lat = EmbeddingLattice(np.array([[1.0, 0.0], [0.0, 1.0]]))
    s = CutProjectScheme(lat, 1, 1, Box((-2.0,), (2.0,)))
    with pytest.warns(CollisionWarning):
        generate_model_set(s, Box((0.0,), (5.0,)))


def test_dual_lattice_pairing():
    lat = fibonacci_scheme().lattice
    dual = dual_lattice(lat).basis
    assert np.allclose(lat.basis.T @ dual, np.eye(2), atol=1e-12)


def test_fourier_candidates_symmetric_with_origin():
    c, internal = fourier_candidates(fibonacci_scheme(), Box((-10.0,), (10.0,)), 0.5,
                                     return_internal=True)
    assert 0.0 in c[:, 0]
    assert np.allclose(np.sort(c[:, 0]), np.sort(-c[:, 0]), atol=1e-12)
    assert np.all(np.abs(internal) <= 0.5 + 1e-9)


def test_fourier_candidates_of_integers():
    c = fourier_candidates(integer_scheme(1), Box((-3.0,), (3.0,)), 1.0)
    assert c[:, 0].tolist() == [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]


def test_fourier_candidates_warn_when_empty():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(UserWarning):
            fourier_candidates(fibonacci_scheme(), Box((0.1,), (0.2,)), 1e-3)
