import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kgreduce.operators import AngleOperator, BlockOperator
from kgreduce.opnorms import (NormParams, analytic_norm, block_norm, commutator_ad, lie_conjugate,
                              lipschitz_block_norm, operator_norm_Hr, sdecay_norm)

from _blocks import random_block, random_matrix


complex_mats = arrays(np.complex128, (8, 8),
                      elements=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))


# --- s-decay ---------------------------------------------------------------------

@pytest.mark.parametrize("s", [0.0, 0.5, 2.0, 5.0])
def test_identity_has_unit_sdecay(s):
    assert sdecay_norm(np.eye(7), s) == pytest.approx(1.0)


def test_single_offdiagonal_entry():
    A = np.zeros((4, 4))
    A[1, 0] = 1.0  # A_1^2
    assert sdecay_norm(A, 2) == pytest.approx(2.0)


@settings(max_examples=60)
@given(complex_mats, complex_mats, st.floats(0, 4))
def test_sdecay_triangle_inequality(A, B, s):
    assert sdecay_norm(A + B, s) <= sdecay_norm(A, s) + sdecay_norm(B, s) + 1e-12 * (1 + sdecay_norm(A, s))


def _algebra_constant(rng, J, s, trials=40):
    worst = 0.0
    for _ in range(trials):
        A, B = random_matrix(rng, J, decay=s + 1), random_matrix(rng, J, decay=s + 1)
        worst = max(worst, sdecay_norm(A @ B, s) / (sdecay_norm(A, s) * sdecay_norm(B, s)))
    return worst


@pytest.mark.parametrize("s", [1.0, 2.0])
def test_algebra_constant_stable_under_refinement(s):
    consts = [_algebra_constant(np.random.default_rng(J), J, s) for J in (8, 16, 32)]
    assert all(np.isfinite(consts))
    assert max(consts) / min(consts) < 2.0


def test_operator_norm_dominated_by_sdecay():
    s = 2.0
    ratios = {}
    for J in (8, 16, 32):
        rng = np.random.default_rng(100 + J)
        worst = 0.0
        for _ in range(20):
            A = random_matrix(rng, J, decay=s)
            for r in (0.0, 1.0, 2.0):
                worst = max(worst, operator_norm_Hr(A, r) / sdecay_norm(A, s))
        ratios[J] = worst
    assert max(ratios.values()) / min(ratios.values()) < 2.0


# --- analytic and block norms ------------------------------------------------------

def test_analytic_norm_of_constant(rng):
    A = random_matrix(rng, 5)
    op = AngleOperator.constant(A, 1, 3)
    assert analytic_norm(op, 2.0, 1.5) == pytest.approx(sdecay_norm(A, 1.5))


def test_analytic_norm_two_modes():
    op = AngleOperator.from_dict({(1,): np.eye(4), (-1,): np.eye(4)}, 1, 2, 4)
    assert analytic_norm(op, 1.0, 0.0) == pytest.approx(2 * math.e)


def test_block_norm_of_zero():
    assert block_norm(BlockOperator.zeros(2, 2, 5), NormParams(s=1, rho=1, alphaW=0.5, betaW=0.3)) == 0.0


@pytest.mark.parametrize("J", [3, 5, 10])
def test_block_norm_identity_hand_count(J):
    A = BlockOperator(AngleOperator.constant(np.eye(J), 1, 1), AngleOperator.zeros(1, 1, J))
    value = block_norm(A, NormParams(s=0, rho=0, alphaW=1, betaW=0))
    assert value == pytest.approx(2 * math.sqrt(1 + J**2) + 3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(0, 10**6))
def test_block_norm_monotone_in_all_indices(f_rho, f_s, f_a, f_b, scale, seed):
    rng = np.random.default_rng(seed)
    A = random_block(rng, K=2, J=5)
    big = NormParams(s=2.0, rho=1.0, alphaW=1.0, betaW=0.5)
    small = NormParams(s=2.0 * f_s, rho=f_rho, alphaW=f_a, betaW=0.5 * f_b)
    assert block_norm(A, small) <= block_norm(A, big) * (1 + 1e-12)


def test_lipschitz_constant_family(rng):
    A = random_block(rng)
    p = NormParams(s=1, rho=0.5, alphaW=0.4, lipWeight=0.3)
    fam = [(w, A) for w in (200.0, 250.0, 300.0)]
    res = lipschitz_block_norm(fam, p)
    assert res["lip"] == 0.0
    assert res["value"] == pytest.approx(block_norm(A, p))
    assert res["lower_bound"] is True


def test_lipschitz_scalar_identity_family():
    J = 4
    fam = []
    for w in (1.0, 2.5, -3.0):
        fam.append(([w, 0.7], BlockOperator(AngleOperator.constant(w * np.eye(J), 2, 1), AngleOperator.zeros(2, 1, J))))
    res = lipschitz_block_norm(fam, NormParams(s=0, rho=0, alphaW=0, betaW=0, lipWeight=1.0))
    assert res["value"] == pytest.approx(3.0 + 1.0)


def test_lipschitz_needs_two_samples(rng):
    with pytest.raises(ValueError):
        lipschitz_block_norm([(1.0, random_block(rng))], NormParams(lipWeight=1.0))


# --- commutators and Lie series ----------------------------------------------------

def test_self_commutator_vanishes(rng):
    X = random_block(rng, nu=2, K=2, J=5, keep=1)
    assert commutator_ad(X, X).max_abs() <= 1e-13 * X.max_abs() ** 2


def test_commutator_diagonal_blocks_hand_case():
    xd = np.array([[1.0, 2.0 - 1j], [2.0 + 1j, -0.5]])
    vd = np.array([[0.3, 1j], [-1j, 2.0]])
    X = BlockOperator(AngleOperator.constant(xd, 1, 1), AngleOperator.zeros(1, 1, 2))
    V = BlockOperator(AngleOperator.constant(vd, 1, 1), AngleOperator.zeros(1, 1, 2))
    Z = commutator_ad(X, V)
    np.testing.assert_allclose(Z.d[(0,)], 1j * (xd @ vd - vd @ xd), atol=1e-15)
    assert Z.o.max_abs() == 0


def test_commutator_matches_dense_matrices(rng):
    X = random_block(rng, K=2, J=4, keep=1)
    V = random_block(rng, K=2, J=4, keep=1)
    Z = commutator_ad(X, V)
    for th in rng.uniform(0, 2 * np.pi, size=(3, 1)):
        Xm, Vm = X.evaluate(th), V.evaluate(th)
        np.testing.assert_allclose(Z.evaluate(th), 1j * (Xm @ Vm - Vm @ Xm), atol=1e-12)


def test_commutator_preserves_symmetry(rng):
    X = random_block(rng, nu=2, K=2, J=6, keep=2)
    V = random_block(rng, nu=2, K=2, J=6, keep=2)
    Z = commutator_ad(X, V)
    assert Z.symmetry_defect()["max"] <= 1e-12 * max(1.0, Z.max_abs())


def test_commutator_norm_bound(rng):
    s, rho, a = 1.0, 0.3, 0.4
    Cs = _algebra_constant(np.random.default_rng(0), 6, s)
    paa = NormParams(s=s, rho=rho, alphaW=a, betaW=a)
    pa0 = NormParams(s=s, rho=rho, alphaW=a, betaW=0)
    for _ in range(10):
        X = random_block(rng, K=3, J=6, keep=1)
        V = random_block(rng, K=3, J=6, keep=1)
        lhs = block_norm(commutator_ad(X, V), paa)
        assert lhs <= 2 * Cs * block_norm(X, paa) * block_norm(V, pa0)


def test_lie_conjugate_zero_generator(rng):
    V = random_block(rng)
    res = lie_conjugate(BlockOperator.zeros(1, 2, 6), V, 6)
    assert (res.value - V).max_abs() == 0


def test_lie_conjugate_abelian_case():
    X = BlockOperator(AngleOperator.constant(np.array([[0.7]]), 1, 1), AngleOperator.zeros(1, 1, 1))
    V = BlockOperator(AngleOperator.constant(np.array([[-1.3]]), 1, 1), AngleOperator.zeros(1, 1, 1))
    assert (lie_conjugate(X, V, 8).value - V).max_abs() <= 1e-15


def test_lie_conjugate_matches_exponential(rng):
    from scipy.linalg import expm
    # angle independent X keeps every commutator inside the stored modes
    X = random_block(rng, K=4, J=4, keep=0, scale=0.05)
    V = random_block(rng, K=4, J=4, keep=1)
    res = lie_conjugate(X, V, 10)
    assert res.max_dropped <= 1e-15
    th = np.array([0.37])
    Xm = X.evaluate(th)
    exact = expm(1j * Xm) @ V.evaluate(th) @ expm(-1j * Xm)
    assert np.abs(res.value.evaluate(th) - exact).max() <= 1e-8


def test_lie_conjugate_growth_bound(rng):
    s, rho, a = 1.0, 0.2, 0.4
    Cs = _algebra_constant(np.random.default_rng(0), 5, s)
    pa0 = NormParams(s=s, rho=rho, alphaW=a, betaW=0)
    paa = NormParams(s=s, rho=rho, alphaW=a, betaW=a)
    for _ in range(5):
        X = random_block(rng, K=4, J=5, keep=1, scale=0.02)
        V = random_block(rng, K=4, J=5, keep=1)
        out = lie_conjugate(X, V, 8).value
        assert block_norm(out, pa0) <= math.exp(2 * Cs * block_norm(X, paa)) * block_norm(V, pa0)


def test_lie_conjugate_spectrum_defect_decreases_with_order(rng):
    """Conjugation is isospectral; truncating the series breaks that less as the order grows."""
    J = 4
    X = random_block(rng, K=4, J=J, keep=1, scale=0.03)
    H = BlockOperator.diagonal(np.arange(1.0, J + 1), 1, 4)
    target = np.sort(np.linalg.eigvals(H.evaluate([0.0])).real)
    th = np.array([1.1])
    defects = []
    for L in range(1, 7):
        ev = np.linalg.eigvals(lie_conjugate(X, H, L).value.evaluate(th))
        defects.append(np.abs(np.sort(ev.real) - target).max() + np.abs(ev.imag).max())
    for a, b in zip(defects, defects[1:]):
        assert b < a or b < 1e-13
