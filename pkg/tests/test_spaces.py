"""Bourgain-Morrey norms: closed forms, tails, laws, shifted grids.

The brute-force oracle sums the cube family directly over a wide scale
window using only restriction and the mixed norm; the closed-form tails of
the production path are validated against it and against hand-computed
values of the unit-cube norm.
"""

import math

import numpy as np
import pytest

from bmkit.cubes import DyadicCube
from bmkit.errors import PreconditionError
from bmkit.grids import (
    FunctionCorpus,
    GridFunction,
    common_grid,
    generate_corpus,
    indicator,
    refine,
    translate_lattice,
)
from bmkit.mixed import ExponentVector, mixed_norm
from bmkit.spaces import (
    SpaceParams,
    _shifted_cube_norms,
    approximation_check,
    bm_norm,
    bm_norm_vector,
    bm_norm_weighted,
    check_dilation,
    check_translation,
    cube_norms_at_scale,
    fine_scale_sum,
    stabilization_scale,
)

INF = math.inf


def oracle_bm_norm(f, sp, j_lo=-40, extra=60, extra_direct=None):
    """Direct truncated summation over scales [j_lo, J + extra].

    Scales up to J + extra_direct are enumerated cube by cube (restriction
    plus mixed norm only); beyond that the per-scale closed form takes
    over, itself brute-force validated at low scales by separate tests.
    The coarse truncation error is geometric and negligible at the
    defaults for the parameters used here.
    """
    n, J, r = f.dim, f.resolution, sp.r
    if extra_direct is None:
        extra_direct = 8 if n == 1 else 3
    fine = refine(f, J + extra_direct)
    total = 0.0
    sup = 0.0
    for j in range(j_lo, fine.resolution + 1):
        g = fine if j > J else f
        norms, _ = cube_norms_at_scale(g, sp.p, j)
        w = 2.0 ** (-j * n * sp.delta)
        if r == INF:
            sup = max(sup, w * float(norms.max()))
        else:
            total += (w ** r) * float(np.sum(norms ** r))
    if r == INF:
        return sup
    for j in range(fine.resolution + 1, J + extra + 1):
        total += fine_scale_sum(f, sp, j)
    return total ** (1.0 / r)


def corpus(seed, count, dim=1, J=3, **kw):
    return generate_corpus(
        FunctionCorpus(seed=seed, count=count, family="random-cells", dim=dim, resolution=J, params=kw)
    )


# --- closed-form values -----------------------------------------------------


def test_unit_interval_value():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = indicator(DyadicCube(0, (0,)), 0)
    got = bm_norm(f, sp)
    assert got.total == pytest.approx(3.0 ** (1.0 / 6.0), rel=1e-12)
    assert got.total ** got.r == pytest.approx(sum(got.scales.values()) + got.coarse_tail + got.fine_tail, rel=1e-12)


def test_unit_interval_value_matches_oracle():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = indicator(DyadicCube(0, (0,)), 2)
    assert bm_norm(f, sp).total == pytest.approx(oracle_bm_norm(f, sp), rel=1e-9)


def test_unit_square_value():
    sp = SpaceParams.of((2.0, 4.0), 4.0, 8.0)
    f = indicator(DyadicCube(0, (0, 0)), 0)
    got = bm_norm(f, sp)
    assert got.total == pytest.approx((5.0 / 3.0) ** (1.0 / 8.0), rel=1e-12)
    # the two pieces of the hand computation: cube-or-finer sum 4/3, coarser sum 1/3
    assert got.fine_tail + sum(got.scales.values()) == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert got.coarse_tail == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_zero_function():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    z = GridFunction(2, (0,), np.zeros(4))
    assert bm_norm(z, sp).total == 0.0


def test_oracle_agreement_random_1d():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    for f in corpus(10, 4, dim=1, J=3):
        assert bm_norm(f, sp).total == pytest.approx(oracle_bm_norm(f, sp), rel=1e-9)


def test_oracle_agreement_random_2d():
    sp = SpaceParams.of((2.0, 4.0), 4.0, 8.0)
    for f in corpus(11, 2, dim=2, J=2):
        assert bm_norm(f, sp).total == pytest.approx(oracle_bm_norm(f, sp, j_lo=-25, extra=40), rel=1e-9)


def test_fine_scale_sum_matches_brute_force_standard():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(9, 1, dim=1, J=2)[0]
    for j in (3, 4, 5):
        fine = refine(f, j)
        norms, _ = cube_norms_at_scale(fine, sp.p, j)
        w = 2.0 ** (-j * sp.delta)
        brute = (w ** sp.r) * float(np.sum(norms ** sp.r))
        assert fine_scale_sum(f, sp, j) == pytest.approx(brute, rel=1e-12)


def test_oracle_agreement_straddling_origin():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = GridFunction(3, (-5,), np.linspace(1.0, 2.0, 12))
    assert bm_norm(f, sp).total == pytest.approx(oracle_bm_norm(f, sp), rel=1e-9)


def test_sup_norm_case():
    sp = SpaceParams.of((2.0,), 3.0, INF)
    f = indicator(DyadicCube(0, (0,)), 1)
    # sup over v >= 0 of 2^(-v/3) is 1 (at the unit cube); coarser cubes give
    # 2^(v*(1/3 - 1/2)) < 1
    assert bm_norm(f, sp).total == pytest.approx(1.0, rel=1e-12)


# --- divergence classification ----------------------------------------------


def test_divergence_coarse_tail():
    sp = SpaceParams.of((2.0,), 2.0, 6.0)  # t = n / sum(1/p) exactly
    f = indicator(DyadicCube(0, (0,)), 1)
    got = bm_norm(f, sp)
    assert not got.finite
    assert got.reason == "coarse-tail"
    assert got.total == INF


def test_divergence_fine_tail():
    sp = SpaceParams.of((2.0,), 3.0, 3.0)  # r = t
    f = indicator(DyadicCube(0, (0,)), 1)
    got = bm_norm(f, sp)
    assert not got.finite
    assert got.reason == "fine-tail"


def test_divergence_both():
    sp = SpaceParams.of((2.0,), 2.0, 2.0)
    f = indicator(DyadicCube(0, (0,)), 1)
    got = bm_norm(f, sp)
    assert got.reason == "both"


def test_nontriviality_classification():
    assert SpaceParams.of((2.0,), 3.0, 6.0).nontrivial
    assert SpaceParams.of((2.0,), 2.0, INF).nontrivial
    assert not SpaceParams.of((2.0,), 2.0, 6.0).nontrivial
    assert not SpaceParams.of((2.0,), 3.0, 3.0).nontrivial
    with pytest.raises(PreconditionError):
        SpaceParams.of((2.0,), 6.0, 3.0)  # t > r
    with pytest.raises(PreconditionError):
        bm_norm(indicator(DyadicCube(0, (0,)), 1), SpaceParams.of((4.0,), 1.5, 6.0))


# --- exact laws ---------------------------------------------------------------


def test_dilation_law_exact():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = indicator(DyadicCube(0, (0,)), 0)
    rep = check_dilation(f, sp, 1)
    assert rep.passed
    assert rep.lhs == pytest.approx(2.0 ** (-1.0 / 3.0) * 3.0 ** (1.0 / 6.0), rel=1e-12)


def test_dilation_law_corpus():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    for f in corpus(12, 4, dim=1, J=4):
        for m in (-2, -1, 0, 1, 2):
            assert check_dilation(f, sp, m).rel_error <= 1e-12


def test_translation_invariance_unit_box_support():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    for f in corpus(13, 4, dim=1, J=4):
        for k in (-3, 1, 7):
            assert check_translation(f, sp, (k,)).rel_error <= 1e-12


def test_embedding_monotone_in_r():
    sp1 = SpaceParams.of((2.0,), 3.0, 5.0)
    sp2 = SpaceParams.of((2.0,), 3.0, 9.0)
    for f in corpus(14, 6, dim=1, J=4):
        assert bm_norm(f, sp2).total <= bm_norm(f, sp1).total


def test_embedding_monotone_in_p():
    lo = SpaceParams.of((2.0, 2.0), 4.0, 8.0)
    hi = SpaceParams.of((3.0, 4.0), 4.0, 8.0)
    for f in corpus(15, 4, dim=2, J=2):
        assert bm_norm(f, lo).total <= bm_norm(f, hi).total


def test_lattice_property():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    for f in corpus(16, 4, dim=1, J=4):
        g = f.with_values(f.values * 0.3)
        assert bm_norm(g, sp).total <= bm_norm(f, sp).total


def test_monotone_convergence():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(17, 1, dim=1, J=4, nonnegative=True)[0]
    norms = [bm_norm(f.scaled(c), sp).total for c in (0.25, 0.5, 0.75, 1.0)]
    assert norms == sorted(norms)
    assert norms[-1] == pytest.approx(bm_norm(f, sp).total)


def test_vector_norm_single_and_sup():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(18, 1, dim=1, J=3)[0]
    assert bm_norm_vector([f], sp, 2.0).total == pytest.approx(bm_norm(abs(f), sp).total, rel=1e-13)
    assert bm_norm_vector([f, f], sp, INF).total == pytest.approx(bm_norm(abs(f), sp).total, rel=1e-13)


def test_vector_norm_disjoint_l2():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    a = indicator(DyadicCube(1, (0,)), 3).scaled(2.0)
    b = indicator(DyadicCube(1, (1,)), 3).scaled(0.5)
    got = bm_norm_vector([a, b], sp, 2.0).total
    A, B = common_grid(a, b)
    direct = A.with_values(np.sqrt(np.abs(A.values) ** 2 + np.abs(B.values) ** 2))
    assert got == pytest.approx(bm_norm(direct, sp).total, rel=1e-13)


def test_approximation_check():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(19, 1, dim=1, J=4)[0]
    rep = approximation_check(f, sp, [1, 2, 3, 4])
    assert rep["final_zero"]
    assert rep["decreased"]


# --- shifted grids -------------------------------------------------------------


def test_shifted_zero_shift_matches():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(20, 1, dim=1, J=3)[0]
    a = bm_norm(f, sp, shift=(0,))
    b = bm_norm(f, sp)
    assert a.total == pytest.approx(b.total, rel=1e-13)


def test_shifted_cube_norms_hand_values():
    # f = chi_[0,1), scale-0 cubes of the grid offset by 1/3:
    # overlaps [0,1/3) and [1/3,1) give norms (1/3)^(1/2) and (2/3)^(1/2)
    f = indicator(DyadicCube(0, (0,)), 0)
    norms = _shifted_cube_norms(f, ExponentVector.of(2.0), 0, (1,))
    got = sorted(float(v) for v in norms)
    assert got == pytest.approx([math.sqrt(1.0 / 3.0), math.sqrt(2.0 / 3.0)], rel=1e-12)


def test_shifted_fine_scale_hand_value():
    # hand computation for chi_[0,1), (p,t,r) = (2,3,6), shift 1/3, scale 1:
    # the three cubes contribute 1/108 + 1/4 + 2/27 = 1/3
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = indicator(DyadicCube(0, (0,)), 0)
    assert fine_scale_sum(f, sp, 1, shift=(1,)) == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_shifted_fine_scale_matches_brute_force():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(21, 1, dim=1, J=2)[0]
    for j in (3, 4, 5):
        norms = _shifted_cube_norms(f, sp.p, j, (2,))
        w = 2.0 ** (-j * sp.delta)
        brute = (w ** sp.r) * float(np.sum(norms ** sp.r))
        assert fine_scale_sum(f, sp, j, shift=(2,)) == pytest.approx(brute, rel=1e-11)


def test_shifted_fine_scale_matches_brute_force_2d():
    sp = SpaceParams.of((2.0, 4.0), 4.0, 8.0)
    f = corpus(22, 1, dim=2, J=1)[0]
    for j in (2, 3):
        norms = _shifted_cube_norms(f, sp.p, j, (1, 2))
        w = 2.0 ** (-j * 2 * sp.delta)
        brute = (w ** sp.r) * float(np.sum(norms ** sp.r))
        assert fine_scale_sum(f, sp, j, shift=(1, 2)) == pytest.approx(brute, rel=1e-11)


def oracle_shifted(f, sp, shift, j_lo=-40, j_hi_extra=60):
    n, J, r = f.dim, f.resolution, sp.r
    total = 0.0
    for j in range(j_lo, J + 1):
        norms = _shifted_cube_norms(f, sp.p, j, shift)
        w = 2.0 ** (-j * n * sp.delta)
        total += (w ** r) * float(np.sum(norms ** r))
    for j in range(J + 1, J + j_hi_extra):
        total += fine_scale_sum(f, sp, j, shift=shift)
    return total ** (1.0 / r)


def test_shifted_norm_total():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(23, 1, dim=1, J=3)[0]
    got = bm_norm(f, sp, shift=(1,)).total
    assert got == pytest.approx(oracle_shifted(f, sp, (1,)), rel=1e-9)


def test_shifted_norm_indicator_finite_same_classification():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = indicator(DyadicCube(0, (0,)), 1)
    got = bm_norm(f, sp, shift=(1,))
    assert got.finite
    bad = bm_norm(f, SpaceParams.of((2.0,), 2.0, 6.0), shift=(1,))
    assert not bad.finite and bad.reason == "coarse-tail"


def test_shifted_equivalence_band():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    ratios = []
    for f in corpus(24, 5, dim=1, J=3):
        plain = bm_norm(f, sp).total
        for a in ((1,), (2,)):
            ratios.append(bm_norm(f, sp, shift=a).total / plain)
    assert 0.2 < min(ratios) and max(ratios) < 5.0


# --- weighted equivalent norm ---------------------------------------------------


def test_weighted_norm_dominates_windowed_plain():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    eta = 0.6
    f = corpus(25, 1, dim=1, J=3, nonnegative=True)[0]
    J = f.resolution
    j_supp = J - math.ceil(math.log2(max(*f.shape, 2)))
    window = (j_supp - 6, min(J, j_supp + 6))
    weighted = bm_norm_weighted(f, sp, eta)
    plain = bm_norm(f, sp, window=window).total
    assert weighted >= plain * (1 - 1e-10)
    assert weighted <= 40.0 * plain


def test_weighted_norm_eta_window_enforced():
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    f = corpus(26, 1, dim=1, J=3)[0]
    with pytest.raises(PreconditionError):
        bm_norm_weighted(f, sp, 1.5)


def test_stabilization_scale_far_support():
    f = GridFunction(2, (4000,), np.ones(3))
    j0 = stabilization_scale(f)
    assert 2.0 ** (-j0) >= f.support_radius()
    sp = SpaceParams.of((2.0,), 3.0, 6.0)
    assert bm_norm(f, sp).total == pytest.approx(oracle_bm_norm(f, sp, j_lo=-45), rel=1e-9)
