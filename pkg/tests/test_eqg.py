"""Dynamical R-matrix, shift-operator quadruple, RLL relations, highest weight."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ellsov import eqg
from ellsov.eqg import (
    ShiftOp,
    S0Grid,
    ab_exchange_residual,
    build_quadruple,
    central_element_residual,
    det_scalar,
    highest_weight_check,
    k_matrix,
    ktwist_residual,
    qybe_residual,
    r_matrix,
    residue_sum,
    restriction_closure,
    rll_residual,
    shift_residual,
)
from ellsov.params import ModelParams, ParameterError

from conftest import sample_point

ETA = 0.173 - 0.061j
Z1 = (0.12 + 0.23j,)
Z2 = (0.12 + 0.23j, 0.57 + 0.71j)
Z3 = (0.12 + 0.23j, 0.57 + 0.71j, 0.34 + 0.52j)


def make_params(lattice, zs, lams):
    return ModelParams(lattice=lattice, eta=ETA, zs=zs, lams=lams)


def test_r_matrix_structure(lattice, rng):
    params = make_params(lattice, Z1, (1,))
    ev = params.evaluator()
    z = sample_point(rng, lattice)
    lam = sample_point(rng, lattice)

    r = r_matrix(params, z, lam)
    # corners are exactly 1, the middle block carries alpha and beta
    assert r[0, 0] == 1.0 and r[3, 3] == 1.0
    alpha = ev.theta(lam + 2 * ETA) * ev.theta(z) / (ev.theta(lam) * ev.theta(z - 2 * ETA))
    beta = -ev.theta(lam + z) * ev.theta(2 * ETA) / (ev.theta(lam) * ev.theta(z - 2 * ETA))
    assert_allclose(r[1, 1], alpha, rtol=1e-13)
    assert_allclose(r[1, 2], beta, rtol=1e-13)
    assert np.max(np.abs(r[0, 1:])) == 0.0

    # weight preservation
    h2 = np.diag([2.0, 0.0, 0.0, -2.0])
    assert np.max(np.abs(r @ h2 - h2 @ r)) <= 1e-12 * np.max(np.abs(r))

    # z = 0 collapses to the permutation matrix
    flip = np.zeros((4, 4), dtype=complex)
    flip[0, 0] = flip[3, 3] = flip[1, 2] = flip[2, 1] = 1.0
    assert np.max(np.abs(r_matrix(params, 0.0, lam) - flip)) <= 1e-12

    with pytest.raises(ParameterError):
        r_matrix(params, z, 0.0)
    with pytest.raises(ParameterError):
        r_matrix(params, 2 * ETA, lam)


def test_qybe(lattice, rng):
    params = make_params(lattice, Z1, (1,))
    for _ in range(20):
        z = sample_point(rng, lattice)
        w = sample_point(rng, lattice)
        lam = sample_point(rng, lattice)
        assert qybe_residual(params, z, w, lam) <= 1e-9


def test_ktwist(lattice, rng):
    params = make_params(lattice, Z1, (1,))
    k = k_matrix()
    np.testing.assert_array_equal(k @ k, np.eye(2))
    for _ in range(5):
        z = sample_point(rng, lattice)
        lam = sample_point(rng, lattice)
        assert ktwist_residual(params, z, lam) <= 1e-12


def test_shift_algebra(lattice, rng):
    params = make_params(lattice, Z2, (2, 2))
    quad = build_quadruple(params)
    z = sample_point(rng, lattice)
    w = sample_point(rng, lattice)
    lams = [sample_point(rng, lattice) for _ in range(3)]
    a, b, c = quad.a(z), quad.b(w), quad.c(z + 0.1)

    # associativity, relative to the size of the composite
    lhs = a.compose(b).compose(c)
    rhs = a.compose(b.compose(c))
    scale = max(
        1.0,
        max(float(np.max(np.abs(m))) for lam in lams for m in lhs.matrices(lam).values()),
    )
    assert shift_residual(lhs, rhs, lams) <= 1e-11 * scale

    # composition agrees with applying the factors one after the other
    dim = quad.grid.dim
    coef = rng.standard_normal((dim, 3)) + 1j * rng.standard_normal((dim, 3))

    def fun(lam):
        return np.array([sum(coef[t, k] * lam**k for k in range(3)) for t in range(dim)])

    comp = a.compose(b)
    for lam in lams:
        direct = a.apply(lambda mu: b.apply(fun, mu), lam)
        mag = max(
            1.0,
            float(np.max(np.abs(direct))),
            max(float(np.max(np.abs(m))) for m in comp.matrices(lam).values()),
        )
        assert np.max(np.abs(comp.apply(fun, lam) - direct)) <= 1e-11 * mag


def test_h_grading(lattice):
    # a and d preserve the grid weight, b lowers it by 2, c raises it by 2
    params = make_params(lattice, Z2, (1, 2))
    quad = build_quadruple(params)
    grid = quad.grid
    z = 0.41 + 0.18j
    for op, change in ((quad.a(z), 0), (quad.b(z), -2), (quad.c(z), 2), (quad.d(z), 0)):
        for (t, s, _k) in op.terms:
            assert grid.weights[t] - grid.weights[s] == change


def test_n1_example(lattice, rng):
    """One site of weight 1: all four operators match the closed two-point forms."""
    params = make_params(lattice, Z1, (1,))
    ev = params.evaluator()
    quad = build_quadruple(params)
    grid = quad.grid
    z1 = Z1[0]
    for _ in range(3):
        z = sample_point(rng, lattice)
        lam = sample_point(rng, lattice)
        mats = {
            "a": quad.a(z).matrices(lam),
            "b": quad.b(z).matrices(lam),
            "c": quad.c(z).matrices(lam),
            "d": quad.d(z).matrices(lam),
        }
        for idx in range(grid.dim):
            h = grid.weights[idx]
            a_ex = ev.theta(z - z1 - ETA * h) * ev.theta(lam - ETA * h + ETA) / ev.theta(lam)
            d_ex = ev.theta(z - z1 + ETA * h) * ev.theta(lam - ETA * h - ETA) / ev.theta(lam)
            assert abs(mats["a"][-1][idx, idx] - a_ex) <= 1e-10 * max(1.0, abs(a_ex))
            assert abs(mats["d"][+1][idx, idx] - d_ex) <= 1e-10 * max(1.0, abs(d_ex))
            src = grid.shifted(idx, 0, -1)
            if src is not None:
                b_ex = ev.theta(lam + z - z1 - ETA * h) / ev.theta(lam) * ev.theta(ETA - ETA * h)
                assert abs(mats["b"][+1][idx, src] - b_ex) <= 1e-10 * max(1.0, abs(b_ex))
            src = grid.shifted(idx, 0, +1)
            if src is not None:
                c_ex = -ev.theta(-lam + z - z1 + ETA * h) / ev.theta(lam) * ev.theta(ETA * h + ETA)
                assert abs(mats["c"][-1][idx, src] - c_ex) <= 1e-10 * max(1.0, abs(c_ex))


@pytest.mark.parametrize("zs,lams", [(Z1, (1,)), (Z2, (1, 1))])
def test_rll_relations(lattice, rng, zs, lams):
    params = make_params(lattice, zs, lams)
    z = sample_point(rng, lattice)
    w = sample_point(rng, lattice)
    samples = [sample_point(rng, lattice) for _ in range(5)]
    report = rll_residual(params, z, w, samples)
    assert report["max_residual"] <= 1e-9
    assert np.max(np.asarray(report["block_residuals"])) <= 1e-9


def test_ab_exchange(lattice, rng):
    params = make_params(lattice, Z2, (1, 1))
    z = sample_point(rng, lattice)
    w = sample_point(rng, lattice)
    samples = [sample_point(rng, lattice) for _ in range(4)]
    assert ab_exchange_residual(params, z, w, samples) <= 1e-9


def test_restriction_closure(lattice, rng):
    """b closes the grid boundary with Delta_+, c with Delta_-; recorded, not assumed."""
    params = make_params(lattice, Z2, (2, 2))
    z = sample_point(rng, lattice)
    lam = sample_point(rng, lattice)
    report = restriction_closure(params, z, lam)
    scale = max(1.0, report["b"]["delta_minus"], report["c"]["delta_plus"])
    assert report["b"]["delta_plus"] <= 1e-12 * scale
    assert report["c"]["delta_minus"] <= 1e-12 * scale
    assert report["b_closes_with"] == "delta_plus"
    assert report["c_closes_with"] == "delta_minus"
    # the opposite signs genuinely fail to close
    assert report["b"]["delta_minus"] > 1e-3
    assert report["c"]["delta_plus"] > 1e-3


def test_s1_preservation(lattice, rng):
    """b and c keep functions vanishing on lambda = eta h vanishing there.

    All-odd weights with an odd site count keep eta h(m) away from the
    theta(lambda) pole, the same genericity the finite restriction needs.
    """
    params = make_params(lattice, Z3, (1, 1, 1))
    quad = build_quadruple(params)
    grid = quad.grid
    z = sample_point(rng, lattice)
    dim = grid.dim
    coef = rng.standard_normal((dim, 4)) + 1j * rng.standard_normal((dim, 4))

    def vanishing(lam):
        out = np.zeros(dim, dtype=complex)
        for t in range(dim):
            poly = sum(coef[t, k] * lam**k for k in range(4))
            out[t] = (lam - ETA * grid.weights[t]) * poly
        return out

    worst = 0.0
    scale = 1.0
    for op in (quad.b(z), quad.c(z)):
        for t in range(dim):
            val = op.apply(vanishing, ETA * grid.weights[t])
            worst = max(worst, abs(val[t]))
            scale = max(scale, float(np.max(np.abs(val))))
    assert worst <= 1e-12 * scale


def test_highest_weight(lattice, rng):
    params = make_params(lattice, Z2, (2, 2))
    z_samples = [sample_point(rng, lattice) for _ in range(3)]
    lam_samples = [sample_point(rng, lattice) for _ in range(3)]
    report = highest_weight_check(params, z_samples, lam_samples)
    assert report["weight"] == report["weight_expected"] == 4
    assert report["c_residual"] <= 1e-12
    assert report["a_residual"] <= 1e-12
    assert report["d_residual"] <= 1e-10
    assert report["pair_residual"] <= 1e-10


def test_centrality(lattice, rng):
    params = make_params(lattice, Z2, (1, 1))
    z = sample_point(rng, lattice)
    w = sample_point(rng, lattice)
    samples = [sample_point(rng, lattice) for _ in range(3)]
    report = central_element_residual(params, z, w, samples)
    assert report["scalar_residual"] <= 1e-10
    for name in ("a", "b", "c"):
        assert report[f"commutator_{name}"] <= 1e-10

    # the scalar itself
    ev = params.evaluator()
    val = det_scalar(params, z)
    expected = 1.0
    for zi, li in zip(params.zs, params.lams):
        expected *= ev.theta(z - zi - li * ETA) * ev.theta(z - zi + li * ETA + 2 * ETA)
    assert_allclose(val, expected, rtol=1e-13)


def test_residue_sum(lattice):
    params = make_params(lattice, Z2, (2, 2))
    grid = S0Grid(params)
    for gi in (0, grid.dim // 2):
        for i in (0, 1):
            assert abs(residue_sum(params, gi, i)) <= 1e-10


def test_zero_op_is_empty(lattice):
    op = ShiftOp.zero(3, 2 * ETA)
    assert op.matrices(0.3 + 0.2j) == {}
