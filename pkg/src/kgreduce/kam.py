"""Quadratic KAM iteration reducing A + P(omega t) to constant coefficients.

One step solves the homological equation

    i[X, A] - omega . d_theta X + Pi_N P = Z,     A = diag(lambda) sigma_3,

updates the eigenvalues with Z and conjugates by exp(-iX).  The new
perturbation is computed as the whole transformed generator minus the new
normal form, with Lie series truncated at ``lieOrder`` and a Gauss rule in
the s-integral of the time derivative term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .config import ModelConfig
from .exceptions import ConvergenceStall, DenominatorTooSmall, NotSmallEnough
from .operators import BlockOperator, TruncationLog
from .opnorms import NormParams, ad_diagonal, block_norm, commutator_ad, gauss_moments
from .melnikov import in_step_set
from .spectral import japanese


@dataclass
class KamSchedule:
    """Analyticity widths rho_n, losses delta_n and the measured eta_n, N_n."""

    rho0: float
    deltas: list = field(default_factory=list)
    rhos: list = field(default_factory=list)
    etas: list = field(default_factory=list)
    Ns: list = field(default_factory=list)

    def __post_init__(self):
        if not self.rhos:
            self.rhos = [self.rho0]

    def delta(self, n: int) -> float:
        return 3 * self.rho0 / (math.pi**2 * (1 + n**2))

    def rho(self, n: int) -> float:
        r = self.rho0
        for q in range(n):
            r -= self.delta(q)
        return r

    @staticmethod
    def cutoff(eta: float, delta: float) -> int:
        """N = ceil(-ln(eta) / delta), at least 1."""
        if eta <= 0:
            return 1
        return max(1, math.ceil(-math.log(eta) / delta))

    def template(self, n: int) -> float:
        """eta_0 exp(1 - (3/2)^n)."""
        return self.etas[0] * math.exp(1 - 1.5**n) if self.etas else math.nan

    def as_dict(self) -> dict:
        return {"rho0": self.rho0, "deltas": list(self.deltas), "rhos": list(self.rhos),
                "etas": list(self.etas), "Ns": list(self.Ns)}


@dataclass
class EigenvalueLadder:
    rows: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.rows[-1]

    @property
    def eps(self) -> np.ndarray:
        return self.rows[-1] - self.rows[0]

    def increments(self) -> list:
        return [float(np.max(np.abs(b - a))) for a, b in zip(self.rows, self.rows[1:])]

    def table(self, alpha: float) -> list[dict]:
        j = np.arange(1, len(self.rows[0]) + 1)
        return [{"j": int(jj), "lambda0": float(a), "lambdaInf": float(b), "eps": float(e),
                 "j_alpha_abs_eps": float(jj**alpha * abs(e))}
                for jj, a, b, e in zip(j, self.rows[0], self.final, self.eps)]


@dataclass
class KamState:
    n: int
    lambdas: np.ndarray
    V: BlockOperator
    omega: np.ndarray
    schedule: KamSchedule
    generators: list = field(default_factory=list)
    log: list = field(default_factory=list)

    @property
    def eta(self) -> float:
        return self.schedule.etas[self.n]

    @property
    def rho(self) -> float:
        return self.schedule.rhos[self.n]


def eta_of(V: BlockOperator, rho: float, cfg: ModelConfig) -> float:
    """(M^alpha / gamma) |V|_{rho, s0}^{alpha, 0} at a single frequency."""
    p = NormParams(s=cfg.s0, rho=rho, alphaW=cfg.alpha, betaW=0.0)
    return cfg.M**cfg.alpha / cfg.gammaKam * block_norm(V, p)


def _denominators(lambdas, omega, kv):
    lam = np.asarray(lambdas, dtype=float)
    wk = (kv @ np.asarray(omega, dtype=float))[..., None, None]
    dd = wk + lam[:, None] - lam[None, :]
    do = wk + lam[:, None] + lam[None, :]
    return dd, do


def solve_step_homological(P: BlockOperator, lambdas, omega, N: float, cfg: ModelConfig,
                           check: bool = True):
    """Generator X and diagonal correction Z of one KAM step.

    X^d[j, l](k) = P^d[j, l](k) / (i (omega.k + lambda_j - lambda_l)) except at
    (k, j, l) = (0, a, a), X^o[j, l](k) = P^o[j, l](k) / (i (omega.k + lambda_j + lambda_l)),
    both on |k|_1 <= N; Z_j = Re P^d[j, j](0).
    With ``check`` the step nonresonance conditions are verified first and
    DenominatorTooSmall is raised on failure.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if check:
        v = in_step_set(omega, lambdas, N, cfg)
        if not v.member:
            k, j, l, sign, margin = v.worstTriple
            raise DenominatorTooSmall(k, margin, j, l, sign)
    low, _ = P.project(N)
    kv = P.d.kvecs
    dd, do = _denominators(lambdas, omega, kv)
    zero = (P.K,) * P.nu
    J = P.J
    diag_slot = np.zeros(dd.shape, bool)
    diag_slot[zero] = np.eye(J, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        xd = np.where(diag_slot | (low.d.coeffs == 0), 0, low.d.coeffs / (1j * dd))
        xo = np.where(low.o.coeffs == 0, 0, low.o.coeffs / (1j * do))
    X = BlockOperator(type(P.d)(xd, P.nu), type(P.o)(xo, P.nu))
    Z = np.real(np.diagonal(P.d.coeffs[zero])).copy()
    return X, Z


def homological_residual(X: BlockOperator, Z, P: BlockOperator, lambdas, omega, N) -> float:
    """max |i[X, A] - omega.d_theta X + Pi_N P - Z sigma_3|."""
    low, _ = P.project(N)
    R = ad_diagonal(X, lambdas) - X.time_derivative(omega) + low - BlockOperator.diagonal(Z, P.nu, P.K)
    return R.max_abs()


def _series(X, first, order, coeffs, log):
    """sum_q coeffs[q] ad_X^q(first) and the size of the last term kept."""
    total = first * coeffs[0]
    cur = first
    for q in range(1, len(coeffs)):
        cur = commutator_ad(X, cur, log)
        total = total + cur * coeffs[q]
    return total, cur.max_abs() * abs(coeffs[-1])


def conjugated_remainder(X: BlockOperator, Z, P: BlockOperator, lambdas, omega, cfg: ModelConfig,
                         log: TruncationLog | None = None):
    """New perturbation exp(iX)(A+P)exp(-iX) - int exp(isX) dX exp(-isX) ds - A - Z sigma_3.

    A itself never enters a sum: its series starts from ad_X(A), built from
    the diagonal structure.  Returns the operator and the size of the last
    Lie term kept.
    """
    order = cfg.lieOrder
    fact = np.array([1 / math.factorial(q) for q in range(order + 1)])
    adA = ad_diagonal(X, lambdas)
    T1, tail1 = _series(X, adA, order - 1, fact[1:], log)
    T2, tail2 = _series(X, P, order, fact, log)
    T3, tail3 = _series(X, X.time_derivative(omega), order, gauss_moments(order, cfg.quadS), log)
    Pn = T1 + T2 - T3 - BlockOperator.diagonal(Z, P.nu, P.K)
    return Pn, max(tail1, tail2, tail3)


def kam_step(state: KamState, omega, cfg: ModelConfig, check: bool = True) -> KamState:
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    sched = state.schedule
    n = state.n
    eta = state.eta
    delta = sched.delta(n)
    N = sched.cutoff(eta, delta)
    P = state.V
    lam = state.lambdas
    rho_next = sched.rhos[n] - delta

    if P.is_zero():
        X = BlockOperator.zeros(P.nu, P.K, P.J)
        Z = np.zeros(P.J)
        Pn, tail, margin = P, 0.0, math.inf
        res = 0.0
        log = TruncationLog()
    else:
        verdict = in_step_set(omega, lam, N, cfg)
        margin = verdict.margin
        if check and not verdict.member:
            k, j, l, sign, mg = verdict.worstTriple
            raise DenominatorTooSmall(k, mg, j, l, sign)
        X, Z = solve_step_homological(P, lam, omega, N, cfg, check=False)
        res = homological_residual(X, Z, P, lam, omega, N)
        scale = max(P.max_abs(), 1e-300)
        if res > 1e-12 * scale:
            raise RuntimeError(f"homological residual {res:.3e} exceeds 1e-12 * {scale:.3e}")
        log = TruncationLog()
        Pn, tail = conjugated_remainder(X, Z, P, lam, omega, cfg, log)

    eta_next = eta_of(Pn, rho_next, cfg)
    if eta > 0 and eta_next >= eta:
        raise ConvergenceStall(f"eta did not decrease at step {n}: {eta:.3e} -> {eta_next:.3e}")

    pa = NormParams(s=cfg.s0, rho=sched.rhos[n], alphaW=cfg.alpha, betaW=0.0)
    paa = NormParams(s=cfg.s0, rho=sched.rhos[n], alphaW=cfg.alpha, betaW=cfg.alpha)
    nP = block_norm(P, pa)
    gen_bound = 16 * japanese(N) ** (2 * cfg.tauKam + 1) * cfg.M**cfg.alpha / cfg.gammaKam * nP
    sched.deltas.append(delta)
    sched.rhos.append(rho_next)
    sched.etas.append(eta_next)
    sched.Ns.append(N)
    entry = {
        "n": n, "eta": eta, "eta_next": eta_next, "N": N, "delta": delta, "rho": sched.rhos[n],
        "melnikov_margin": margin, "homological_residual": res, "lie_tail": tail,
        "max_dropped": log.max_dropped, "generator_norm": block_norm(X, paa), "generator_bound": gen_bound,
        "Z_max": float(np.max(np.abs(Z))) if len(Z) else 0.0,
        "symmetry_defect": max(X.symmetry_defect()["max"], Pn.symmetry_defect()["max"]),
    }
    return KamState(n + 1, lam + Z, Pn, omega, sched, state.generators + [X], state.log + [entry])


def initial_state(W0: BlockOperator, lambdas0, omega, cfg: ModelConfig) -> KamState:
    sched = KamSchedule(cfg.rho0)
    sched.etas.append(eta_of(W0, cfg.rho0, cfg))
    return KamState(0, np.asarray(lambdas0, dtype=float).copy(), W0,
                    np.atleast_1d(np.asarray(omega, dtype=float)), sched)


def kam_run(W0: BlockOperator, lambdas0, omega, cfg: ModelConfig, maxSteps: int = 12,
            etaTol: float = 1e-12, check: bool = True):
    """Iterate KAM steps until eta < etaTol or maxSteps; returns (state, ladder).

    Raises NotSmallEnough when eta_0 >= 1 or e * eta_0 > k0.
    """
    state = initial_state(W0, lambdas0, omega, cfg)
    ladder = EigenvalueLadder([state.lambdas.copy()])
    eta0 = state.eta
    if eta0 >= 1 or eta0 * math.e > cfg.k0:
        raise NotSmallEnough(f"eta_0 = {eta0:.4g}, e*eta_0 = {eta0 * math.e:.4g} exceeds k0 = {cfg.k0:.4g}; increase M")
    while state.eta >= etaTol and state.n < maxSteps:
        state = kam_step(state, omega, cfg, check=check)
        ladder.rows.append(state.lambdas.copy())
        tmpl = state.schedule.template(state.n)
        if state.eta > tmpl:
            state.log[-1]["template_violated"] = True
            warnings.warn(f"eta_{state.n} = {state.eta:.3e} above template {tmpl:.3e}", RuntimeWarning)
    return state, ladder


def compose_transformation(state: KamState, theta, magnus=None) -> np.ndarray:
    """exp(-iX_1(theta)) ... exp(-iX_n(theta)), optionally preceded by the Magnus factor."""
    J = state.V.J
    out = np.eye(2 * J, dtype=complex)
    if magnus is not None:
        out = magnus.transformation(theta)
    for X in state.generators:
        out = out @ expm(-1j * X.evaluate(theta))
    return out


def composition_bound(eta0: float, n: int) -> float:
    """sqrt(e eta0) S exp(sqrt(e eta0) S) with S = sum_{q<=n} exp(-(3/2)^q / 2)."""
    S = sum(math.exp(-0.5 * 1.5**q) for q in range(n + 1))
    a = math.sqrt(math.e * eta0) * S
    return a * math.exp(a)


def eigenvalue_lipschitz(samples) -> float:
    """max |lambda(w1) - lambda(w2)|_inf / |w1 - w2| over a list of (omega, lambdas)."""
    best = 0.0
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            w1, l1 = samples[a]
            w2, l2 = samples[b]
            d = float(np.linalg.norm(np.atleast_1d(w1) - np.atleast_1d(w2)))
            if d > 0:
                best = max(best, float(np.max(np.abs(np.asarray(l1) - np.asarray(l2)))) / d)
    return best
