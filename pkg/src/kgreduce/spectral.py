"""Truncated Klein-Gordon system on the Dirichlet sine basis.

The basis ``sin(m x)``, m = 1..J, is treated as orthonormal, so every L2
pairing on [0, pi] carries the factor 2/pi.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .config import ModelConfig, PotentialSpec
from .operators import AngleOperator, BlockOperator


def eigenvalues_B(mass: float, J: int) -> np.ndarray:
    """lambda_j = sqrt(j^2 + mass^2) for j = 1..J."""
    j = np.arange(1, J + 1, dtype=float)
    return np.sqrt(j**2 + float(mass) ** 2)


def c_coefficients(mass: float, J: int) -> np.ndarray:
    """c_j(m) = j (lambda_j - j), so that lambda_j = j + c_j / j."""
    j = np.arange(1, J + 1, dtype=float)
    # j (sqrt(j^2+m^2) - j) rewritten without cancellation
    return j * mass**2 / (np.sqrt(j**2 + mass**2) + j)


def japanese(x):
    """<x> = (1 + x^2)^(1/2)."""
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def cosine_multiplier(p: int, J: int) -> tuple[np.ndarray, float]:
    """Sine-basis matrix of multiplication by cos(p x), truncated to J modes.

    cos(px) sin(mx) = [sin((m+p)x) + sin((m-p)x)] / 2.  Returns the matrix
    and the largest entry that fell outside 1..J.
    """
    C = np.zeros((J, J))
    dropped = 0.0
    for m in range(1, J + 1):
        for n, sgn in ((m + p, 1.0), (m - p, 1.0)):
            if n < 0:
                n, sgn = -n, -1.0
            if n == 0:
                continue
            if n > J:
                dropped = max(dropped, 0.5)
                continue
            C[n - 1, m - 1] += 0.5 * sgn
    return C, dropped


def assemble_V(spec: PotentialSpec, cfg: ModelConfig, return_dropped: bool = False):
    """Fourier family of sine-basis matrices of the potential V(theta, x)."""
    spec.validate(nu=cfg.nu)
    V = AngleOperator.zeros(cfg.nu, cfg.K, cfg.J)
    dropped = 0.0
    for (k, p), v in spec.collected().items():
        if max(abs(c) for c in k) > cfg.K:
            dropped = max(dropped, abs(v))
            continue
        C, d = cosine_multiplier(p, cfg.J)
        dropped = max(dropped, d * abs(v))
        V.coeffs[V._index(k)] += v * C
    return (V, dropped) if return_dropped else V


def assemble_V_quadrature(spec: PotentialSpec, cfg: ModelConfig, n_nodes: int | None = None) -> AngleOperator:
    """Oracle for :func:`assemble_V` through Gauss-Legendre quadrature.

    Entry [n, m] of mode k is (2/pi) int_0^pi V_k(x) sin(m x) sin(n x) dx.
    """
    spec.validate(nu=cfg.nu)
    pmax = max((t.p for t in spec.terms), default=0)
    if n_nodes is None:
        n_nodes = 2 * cfg.J + pmax + 8
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    x = (x + 1) * np.pi / 2
    w = w * np.pi / 2
    modes = np.arange(1, cfg.J + 1)
    S = np.sin(np.outer(modes, x))
    V = AngleOperator.zeros(cfg.nu, cfg.K, cfg.J)
    for (k, p), v in spec.collected().items():
        if max(abs(c) for c in k) > cfg.K:
            continue
        f = v * np.cos(p * x)
        V.coeffs[V._index(k)] += (2 / np.pi) * (S * (w * f)) @ S.T
    return V


def assemble_V_exponential(spec: PotentialSpec, cfg: ModelConfig) -> AngleOperator:
    """Assembly on the full exponential basis of [-pi, pi], restricted to odd functions.

    The sine functions are ``(e^{imx} - e^{-imx}) / (2i)``; the even
    extension of V acts by convolution in the exponential index.  Used to
    check that the multiplication operator preserves parity.
    """
    spec.validate(nu=cfg.nu)
    J = cfg.J
    idx = np.arange(-J - 1, J + 2)
    n_exp = len(idx)
    pos = {int(i): a for a, i in enumerate(idx)}
    # odd embedding: sin(mx) -> (e_m - e_{-m}) / (sqrt(2) i), unit norm in l2(Z)
    E = np.zeros((n_exp, J), dtype=complex)
    for m in range(1, J + 1):
        E[pos[m], m - 1] = 1 / (np.sqrt(2) * 1j)
        E[pos[-m], m - 1] = -1 / (np.sqrt(2) * 1j)
    V = AngleOperator.zeros(cfg.nu, cfg.K, J)
    for (k, p), v in spec.collected().items():
        if max(abs(c) for c in k) > cfg.K:
            continue
        T = np.zeros((n_exp, n_exp), dtype=complex)
        for a, i in enumerate(idx):
            for shift in (p, -p):
                if int(i + shift) in pos:
                    T[pos[int(i + shift)], a] += 0.5 * v
        V.coeffs[V._index(k)] += E.conj().T @ T @ E
    return V


def assemble_W(V: AngleOperator, cfg: ModelConfig) -> BlockOperator:
    """W = (1/2) B^{-1/2} V B^{-1/2} sigma_4 as a block operator."""
    lam = eigenvalues_B(cfg.mass, cfg.J)
    core = W_core(V, lam)
    return BlockOperator.sigma4(core)


def W_core(V: AngleOperator, lambdas: np.ndarray) -> AngleOperator:
    s = 1 / np.sqrt(lambdas)
    return V.lmul_diag(0.5 * s).rmul_diag(s)


def H0_matrix(lambdas: np.ndarray) -> np.ndarray:
    """B sigma_3 on the 2J-dimensional phase space."""
    return np.diag(np.concatenate([lambdas, -lambdas])).astype(complex)


def sobolev_weights(J: int, r: float) -> np.ndarray:
    return japanese(np.arange(1, J + 1)) ** r


def sobolev_norm(phi, r: float) -> float:
    """H^r norm (sum <m>^{2r} |phi_m|^2)^{1/2} of sine coefficients phi_1..phi_J.

    A 2J vector (phi, conj phi) is measured in the product space.
    """
    phi = np.asarray(phi)
    J = phi.shape[-1]
    w = sobolev_weights(J, r)
    return float(np.sqrt(np.sum(w**2 * np.abs(phi) ** 2)))


def sobolev_norm_pair(state, r: float) -> float:
    state = np.asarray(state)
    J = state.shape[-1] // 2
    w = np.tile(sobolev_weights(J, r), 2)
    return float(np.sqrt(np.sum(w**2 * np.abs(state) ** 2)))


def potential_value(spec: PotentialSpec, theta, x) -> np.ndarray:
    """Pointwise V(theta, x) (real part; imaginary part vanishes for valid specs)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x, dtype=complex)
    for t in spec.terms:
        out += t.v * np.exp(1j * np.dot(t.k, theta)) * np.cos(t.p * x)
    return out


def quad_matrix_element(spec: PotentialSpec, theta, m: int, n: int) -> float:
    """(2/pi) int_0^pi V(theta, x) sin(mx) sin(nx) dx by adaptive quadrature."""
    f = lambda x: float(np.real(potential_value(spec, theta, x))) * np.sin(m * x) * np.sin(n * x)
    val, _ = integrate.quad(f, 0.0, np.pi, limit=200, epsabs=1e-13, epsrel=1e-13)
    return 2 / np.pi * val
