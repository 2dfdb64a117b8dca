"""Grid functions: exact restriction, dilation, translation, expectation."""

import numpy as np
import pytest

from bmkit.cubes import DyadicCube
from bmkit.errors import PreconditionError
from bmkit.grids import (
    FunctionCorpus,
    GridFunction,
    common_grid,
    conditional_expectation,
    dilate_dyadic,
    generate_corpus,
    indicator,
    pointwise_dominates,
    refine,
    restrict,
    translate_lattice,
)


def test_indicator_unit_interval():
    f = indicator(DyadicCube(0, (0,)), 2)
    assert f.shape == (4,)
    assert np.all(f.values == 1)


def test_indicator_integral_is_volume():
    for c in [DyadicCube(1, (1,)), DyadicCube(0, (0, 1)), DyadicCube(-1, (0,))]:
        J = max(c.scale, 0) + 2
        f = indicator(c, J)
        assert f.integral() == pytest.approx(float(c.volume), abs=0)


def test_indicator_cell_placement():
    f = indicator(DyadicCube(1, (1,)), 3)
    assert f.origin == (4,)
    assert f.shape == (4,)


def test_indicator_too_coarse():
    with pytest.raises(PreconditionError):
        indicator(DyadicCube(3, (0,)), 2)


def test_restrict_disjoint_and_superset():
    f = indicator(DyadicCube(1, (1,)), 3)
    z = restrict(f, DyadicCube(1, (3,)))
    assert z.is_zero()
    whole = restrict(f, DyadicCube(-2, (0,)))
    assert np.array_equal(whole.values, f.values)


def test_restrict_then_integrate():
    rng = np.random.default_rng(5)
    f = GridFunction(3, (0,), rng.uniform(size=8))
    c = DyadicCube(1, (1,))
    direct = f.values[4:8].sum() * f.cell
    assert restrict(f, c).integral() == pytest.approx(direct)


def test_dilate_identity_and_halving():
    f = indicator(DyadicCube(0, (0,)), 2)
    same = dilate_dyadic(f, 0)
    assert same.resolution == f.resolution and np.array_equal(same.values, f.values)
    g = dilate_dyadic(f, 1)
    h = indicator(DyadicCube(1, (0,)), 3)
    G, H = common_grid(g, h)
    assert np.array_equal(G.values, H.values)


def test_dilate_round_trip():
    rng = np.random.default_rng(7)
    f = GridFunction(4, (3,), rng.normal(size=6) + 1j * rng.normal(size=6))
    back = dilate_dyadic(dilate_dyadic(f, 2), -2)
    F, B = common_grid(f, back)
    assert np.allclose(F.values, B.values, atol=0)


def test_translate_unit_interval():
    f = indicator(DyadicCube(0, (0,)), 2)
    g = translate_lattice(f, (1,), 0)
    h = indicator(DyadicCube(0, (1,)), 2)
    G, H = common_grid(g, h)
    assert np.array_equal(G.values, H.values)


def test_translate_misaligned_rejected():
    f = indicator(DyadicCube(0, (0,)), 2)
    with pytest.raises(PreconditionError):
        translate_lattice(f, (1,), 5)


def test_expectation_at_resolution_is_identity():
    rng = np.random.default_rng(11)
    f = GridFunction(3, (2,), rng.normal(size=8))
    g = conditional_expectation(f, 3)
    F, G = common_grid(f, g)
    assert np.array_equal(F.values, G.values)


def test_expectation_coarse_average():
    f = indicator(DyadicCube(0, (0,)), 2)
    g = conditional_expectation(f, -1)
    # averaged over [0,2): value 1/2 everywhere there
    assert np.allclose(g.values, 0.5)
    assert g.box_lower() == (0,)
    assert g.box_upper() == (8,)  # [0,2) at J=2


def test_expectation_preserves_integral():
    rng = np.random.default_rng(13)
    f = GridFunction(4, (-5,), rng.normal(size=12) + 1j * rng.normal(size=12))
    for k in (4, 2, 0, -1):
        g = conditional_expectation(f, k)
        assert g.integral() == pytest.approx(f.integral(), rel=1e-13, abs=1e-15)


def test_expectation_tower_property():
    rng = np.random.default_rng(17)
    f = GridFunction(4, (1,), rng.uniform(size=10))
    a = conditional_expectation(conditional_expectation(f, 3), 1)
    b = conditional_expectation(f, 1)
    A, B = common_grid(a, b)
    assert np.allclose(A.values, B.values, rtol=1e-13, atol=1e-16)


def test_dominates_cellwise():
    f = indicator(DyadicCube(0, (0,)), 2)
    g = f.scaled(0.5)
    assert pointwise_dominates(f, g)
    assert not pointwise_dominates(g, f)


def test_corpus_deterministic():
    spec = FunctionCorpus(seed=0, count=3, family="random-cells", dim=1, resolution=3)
    a = generate_corpus(spec)
    b = generate_corpus(spec)
    assert len(a) == 3
    for fa, fb in zip(a, b):
        assert fa.origin == fb.origin
        assert np.array_equal(fa.values, fb.values)


def test_corpus_unknown_family():
    with pytest.raises(PreconditionError):
        generate_corpus(FunctionCorpus(seed=0, count=1, family="nope"))


def test_corpus_band_limited_mean_zero():
    spec = FunctionCorpus(seed=3, count=2, family="cosines", dim=1, resolution=5)
    for f in generate_corpus(spec):
        assert abs(f.integral()) < 1e-10


def test_json_round_trip():
    rng = np.random.default_rng(23)
    f = GridFunction(2, (-1, 4), rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3)))
    g = GridFunction.from_json(f.to_json())
    assert g.resolution == f.resolution and g.origin == f.origin
    assert np.array_equal(g.values, f.values)
