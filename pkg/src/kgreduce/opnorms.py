"""Norms on truncated operator matrices, commutators and Lie conjugation.

Conventions: ``<h> = (1 + h^2)^{1/2}``; the analytic weight is
``exp(rho * |k|_1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .operators import AngleOperator, BlockOperator, TruncationLog
from .spectral import japanese


@dataclass(frozen=True)
class NormParams:
    """Indices of the block norm |A|_{rho,s}^{alpha,beta} and its Lipschitz weight."""

    s: float = 1.0
    rho: float = 0.0
    alphaW: float = 0.0
    betaW: float = 0.0
    lipWeight: float = 0.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("s must be nonnegative")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.lipWeight < 0:
            raise ValueError("lipWeight must be nonnegative")


def sdecay_norm(A, s: float) -> float:
    """s-decay norm: ( sum_h <h>^{2s} (max_{|m-n|=h} |A_mn|)^2 )^{1/2}."""
    A = np.asarray(A)
    J = A.shape[-1]
    absA = np.abs(A)
    sup = np.array([max(np.diagonal(absA, h).max(), np.diagonal(absA, -h).max()) for h in range(J)])
    w = japanese(np.arange(J)) ** (2 * s)
    return float(np.sqrt(np.sum(w * sup**2)))


def diagonal_sups(coeffs: np.ndarray) -> np.ndarray:
    """max over each diagonal |m-n| = h, for a stack of matrices (last two axes)."""
    absA = np.abs(coeffs)
    J = absA.shape[-1]
    out = np.empty(absA.shape[:-2] + (J,))
    for h in range(J):
        up = np.diagonal(absA, h, axis1=-2, axis2=-1).max(axis=-1)
        lo = np.diagonal(absA, -h, axis1=-2, axis2=-1).max(axis=-1)
        out[..., h] = np.maximum(up, lo)
    return out


def _sdecay_stack(coeffs: np.ndarray, s: float) -> np.ndarray:
    J = coeffs.shape[-1]
    w = japanese(np.arange(J)) ** (2 * s)
    return np.sqrt(np.sum(w * diagonal_sups(coeffs) ** 2, axis=-1))


def analytic_norm(A: AngleOperator, rho: float, s: float) -> float:
    """sum_k exp(rho |k|_1) |A_hat(k)|_s."""
    per_mode = _sdecay_stack(A.coeffs, s)
    return float(np.sum(np.exp(rho * A.k_norms(1)) * per_mode))


def block_norm_terms(alpha: float, beta: float) -> list[tuple]:
    """Distinct (left exponent, block, right exponent) terms of the block norm.

    Repeated terms (alpha = beta, alpha = 0 or beta = 0) are listed once.
    """
    terms = [(alpha, "d", 0.0), (0.0, "d", alpha), (beta, "o", 0.0), (0.0, "o", beta)]
    for sigma in (alpha, -alpha, beta, -beta, 0.0):
        for delta in ("d", "o"):
            terms.append((sigma, delta, -sigma))
    seen, out = set(), []
    for left, delta, right in terms:
        key = (float(left) + 0.0, delta, float(right) + 0.0)
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def block_norm(A: BlockOperator, p: NormParams) -> float:
    """|A|_{rho,s}^{alpha,beta}: sum of analytic norms of the weighted blocks."""
    w = japanese(np.arange(1, A.J + 1))
    total = 0.0
    for left, delta, right in block_norm_terms(p.alphaW, p.betaW):
        blk = A.d if delta == "d" else A.o
        coeffs = (w**left)[:, None] * blk.coeffs * (w**right)[None, :]
        per_mode = _sdecay_stack(coeffs, p.s)
        total += float(np.sum(np.exp(p.rho * blk.k_norms(1)) * per_mode))
    return total


def lipschitz_block_norm(family, p: NormParams) -> dict:
    """Weighted Lipschitz block norm over a finite sample of frequencies.

    ``family`` is a sequence of ``(omega, BlockOperator)`` pairs.  The sup
    and the difference quotients are taken over the sample only, so the
    result is a lower bound for the norm over the continuum.
    """
    family = [(np.atleast_1d(np.asarray(w, dtype=float)), A) for w, A in family]
    if not family:
        raise ValueError("empty family")
    sup = max(block_norm(A, p) for _, A in family)
    lip = 0.0
    if p.lipWeight > 0:
        if len(family) < 2:
            raise ValueError("Lipschitz part needs at least two samples")
        for a in range(len(family)):
            for b in range(a + 1, len(family)):
                (w1, A1), (w2, A2) = family[a], family[b]
                dist = float(np.linalg.norm(w1 - w2))
                if dist == 0:
                    continue
                lip = max(lip, block_norm(A1 - A2, p) / dist)
    return {"value": sup + p.lipWeight * lip, "sup": sup, "lip": lip, "lower_bound": True}


# --- commutators -----------------------------------------------------------

def commutator_ad(X: BlockOperator, V: BlockOperator, log: TruncationLog | None = None) -> BlockOperator:
    """ad_X(V) = i [X, V], blockwise with truncated angle convolutions.

    Z^d = X^d V^d - X^o conj(V^o) - V^d X^d + V^o conj(X^o)
    Z^o = X^d V^o - X^o conj(V^d) - V^d X^o + V^o conj(X^d)
    """
    mm = lambda a, b: a.matmul(b, log)
    Vo_c, Vd_c = V.o.conj(), V.d.conj()
    Xo_c, Xd_c = X.o.conj(), X.d.conj()
    Zd = mm(X.d, V.d) - mm(X.o, Vo_c) - mm(V.d, X.d) + mm(V.o, Xo_c)
    Zo = mm(X.d, V.o) - mm(X.o, Vd_c) - mm(V.d, X.o) + mm(V.o, Xd_c)
    return BlockOperator(Zd * 1j, Zo * 1j)


def ad_diagonal(X: BlockOperator, lambdas) -> BlockOperator:
    """ad_X(diag(lambdas) sigma_3) from the diagonal structure, without products.

    d-block: i (X^d_jl lambda_l - lambda_j X^d_jl);
    o-block: -i (lambda_j + lambda_l) X^o_jl.
    """
    lam = np.asarray(lambdas, dtype=float)
    diff = lam[None, :] - lam[:, None]
    summ = lam[None, :] + lam[:, None]
    return BlockOperator(X.d.entrywise(1j * diff), X.o.entrywise(-1j * summ))


class LieConjugation(NamedTuple):
    value: BlockOperator
    last_term_norm: float
    max_dropped: float


def lie_series_terms(X: BlockOperator, V: BlockOperator, order: int,
                     log: TruncationLog | None = None, first: BlockOperator | None = None) -> list:
    """[V, ad_X V, ad_X^2 V, ...] up to ``order`` (``first`` overrides ad_X V)."""
    terms = [V]
    cur = V
    for q in range(1, order + 1):
        if q == 1 and first is not None:
            cur = first
        else:
            cur = commutator_ad(X, cur, log)
        terms.append(cur)
    return terms


def lie_conjugate(X: BlockOperator, V: BlockOperator, order: int) -> LieConjugation:
    """exp(iX) V exp(-iX) as sum_{q <= order} ad_X^q(V) / q!."""
    log = TruncationLog()
    terms = lie_series_terms(X, V, order, log)
    total = BlockOperator.zeros(V.nu, V.K, V.J)
    for q, t in enumerate(terms):
        total = total + t * (1.0 / math.factorial(q))
    last = terms[-1].max_abs() / math.factorial(order)
    return LieConjugation(total, last, log.max_dropped)


def gauss_moments(order: int, n_nodes: int, weight: str = "flat") -> np.ndarray:
    """Gauss-Legendre values of int_0^1 w(s) s^q / q! ds for q = 0..order.

    ``weight`` is "flat" (w = 1) or "linear" (w = 1 - s).
    """
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    s = (x + 1) / 2
    w = w / 2
    if weight == "linear":
        w = w * (1 - s)
    elif weight != "flat":
        raise ValueError(weight)
    return np.array([np.sum(w * s**q) / math.factorial(q) for q in range(order + 1)])


# --- dense helpers at a single angle -----------------------------------------

def ad_dense(X: np.ndarray, H: np.ndarray) -> np.ndarray:
    return 1j * (X @ H - H @ X)


def lie_dense(X: np.ndarray, H: np.ndarray, order: int, coeffs=None) -> np.ndarray:
    """sum_q c_q ad_X^q(H) with c_q = 1/q! unless given."""
    out = np.zeros_like(H, dtype=complex)
    cur = H.astype(complex)
    for q in range(order + 1):
        c = coeffs[q] if coeffs is not None else 1.0 / math.factorial(q)
        out = out + c * cur
        cur = ad_dense(X, cur)
    return out


def sigma3_unitarity_defect(U: np.ndarray) -> float:
    """|| U^H s3 U - s3 ||: exp(-iX) for sigma_3-selfadjoint X preserves s3."""
    n = U.shape[0] // 2
    s3 = np.diag(np.concatenate([np.ones(n), -np.ones(n)]))
    return float(np.abs(U.conj().T @ s3 @ U - s3).max())


def operator_norm_Hr(A: np.ndarray, r: float) -> float:
    """Induced H^r -> H^r norm of a J x J matrix on sine coefficients."""
    w = japanese(np.arange(1, A.shape[0] + 1)) ** r
    return float(np.linalg.norm(w[:, None] * A / w[None, :], 2))
