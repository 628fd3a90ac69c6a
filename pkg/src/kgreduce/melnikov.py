"""Nonresonance sets for the frequency vector and Monte Carlo measure estimates.

All membership tests run over finite ranges: ``0 < |k|_inf <= K`` (and
``|k|_1 <= N`` for KAM step sets) and ``1 <= j, l <= J``.  A verdict keeps the
constraint with the smallest margin ``|divisor| - threshold``.

In the filtered mode whole regions of (k, j, l) are skipped when an a-priori
lower bound on the divisor already beats the threshold.  Each skip is taken
only after its hypotheses are checked numerically, so the filtered and the
brute force verdicts must coincide.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import binomtest

from .config import ModelConfig
from .operators import k_vectors
from .spectral import japanese


class MelnikovVerdict(NamedTuple):
    member: bool
    worstTriple: tuple | None  # (k, j, l, sign, margin)

    @property
    def margin(self) -> float:
        return math.inf if self.worstTriple is None else self.worstTriple[-1]


@dataclass(frozen=True)
class FrequencySampler:
    """Uniform samples of the annulus M <= |omega| <= 2M in R^nu."""

    nu: int
    M: float
    seed: int = 0
    count: int = 1000

    def samples(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        out = []
        n = 0
        while n < self.count:
            batch = rng.uniform(-2 * self.M, 2 * self.M, size=(2 * (self.count - n) + 16, self.nu))
            r = np.linalg.norm(batch, axis=1)
            keep = batch[(r >= self.M) & (r <= 2 * self.M)]
            out.append(keep)
            n += len(keep)
        return np.concatenate(out)[: self.count]

    def __iter__(self):
        return iter(self.samples())


def _nonzero_k(nu: int, K: int, N: float | None = None) -> np.ndarray:
    kv = k_vectors(nu, K).reshape(-1, nu)
    kv = kv[np.any(kv != 0, axis=1)]
    if N is not None:
        kv = kv[np.abs(kv).sum(axis=1) <= N]
    return kv


def _verdict(best) -> MelnikovVerdict:
    if best is None:
        return MelnikovVerdict(True, None)
    return MelnikovVerdict(best[-1] >= 0, best)


def _update(best, cand):
    if cand is not None and (best is None or cand[-1] < best[-1]):
        return cand
    return best


def in_omega0(omega, cfg: ModelConfig) -> MelnikovVerdict:
    """|omega.k| >= gamma0 M / <k>^tau0 for 0 < |k|_inf <= K."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    kv = _nonzero_k(len(omega), cfg.K)
    thr = cfg.gamma0 * cfg.M / japanese(np.abs(kv).sum(axis=1)) ** cfg.tau0
    margin = np.abs(kv @ omega) - thr
    i = int(np.argmin(margin))
    return _verdict((tuple(int(c) for c in kv[i]), None, None, None, float(margin[i])))


# --- second order conditions ----------------------------------------------------

def _scan(omega, lambdas, kv, coef_k, Malpha, alpha, skip=None):
    """Worst margin over both sign branches for the k's in ``kv``.

    ``coef_k[i]`` is the k-dependent factor of the threshold, which reads
    coef_k * <j +- l>^alpha / M^alpha.  ``skip(sign, i, k, D, n)`` returns a
    boolean J x J mask of slots proven to pass.
    """
    lam = np.asarray(lambdas, dtype=float)
    J = len(lam)
    j = np.arange(1, J + 1)
    wk = kv @ omega
    best = None
    tested = 0
    for sign in (1, -1):
        S = lam[:, None] + sign * lam[None, :]
        n = j[:, None] + sign * j[None, :]
        weight = japanese(n) ** alpha / Malpha
        for i, k in enumerate(kv):
            D = wk[i] + S
            margin = np.abs(D) - coef_k[i] * weight
            mask = np.ones((J, J), bool)
            if sign == -1 and not np.any(k):
                mask &= ~np.eye(J, dtype=bool)  # (0, a, a) is not a constraint
            if skip is not None:
                mask &= ~skip(sign, i, k, D, n)
            if not mask.any():
                continue
            tested += int(mask.sum())
            mm = np.where(mask, margin, np.inf)
            a, b = np.unravel_index(int(np.argmin(mm)), mm.shape)
            best = _update(best, (tuple(int(c) for c in k), int(a) + 1, int(b) + 1,
                                  "+" if sign == 1 else "-", float(mm[a, b])))
    return best, tested


def _ua_skip_factory(omega, cfg: ModelConfig, lambdas, kv):
    """Auto-pass regions for the unperturbed eigenvalues lambda_j = sqrt(j^2 + m^2)."""
    m, M, alpha, gt = cfg.mass, cfg.M, cfg.alpha, cfg.gammaTilde
    Malpha = M**alpha
    J = len(lambdas)
    j = np.arange(1, J + 1)
    jmin = np.minimum(j[:, None], j[None, :])
    eye = np.eye(J, dtype=bool)
    nu = len(omega)
    wk = kv @ omega
    k1 = np.abs(kv).sum(axis=1)
    # auxiliary integer condition |omega.k + n| >= g1 <n>^alpha / (<k>^tau1 M^alpha)
    g1, tau1 = gt ** (1 / 3), nu + 2
    r_ok = g1 >= 2 * gt and tau1 <= cfg.tauTilde
    # first order condition at each k, used for the j = l minus slots
    omega0_ok = np.abs(wk) >= cfg.gamma0 * M / japanese(k1) ** cfg.tau0
    far_ok = M >= m**2 and Malpha >= 2 * math.sqrt(2) * gt
    R = 4 * m**2 * Malpha * japanese(k1) ** tau1 / g1

    def skip(sign, i, k, D, n):
        out = np.zeros((J, J), bool)
        if not np.any(k):
            if sign == 1 and math.sqrt(2) * gt <= Malpha:
                out[:] = True
            if sign == -1 and Malpha >= math.sqrt(2) * gt * japanese(m):
                out |= ~eye
            return out
        if sign == -1 and omega0_ok[i] and gt <= cfg.gamma0 * M * Malpha and cfg.tauTilde >= cfg.tau0:
            out |= eye
        if far_ok:
            out |= np.abs(n) >= 8 * M * k1[i]
        if r_ok:
            region = (jmin * japanese(n) ** alpha >= R[i]) & ~eye
            integer_ok = np.abs(wk[i] + n) >= g1 * japanese(n) ** alpha / (japanese(k1[i]) ** tau1 * Malpha)
            out |= region & integer_ok
        return out

    return skip


def in_U_alpha(omega, lambdas, cfg: ModelConfig, mode: str = "filtered", gammaTilde: float | None = None,
               return_count: bool = False):
    """|omega.k + lambda_j +- lambda_l| >= gT / <k>^tauT * <j +- l>^alpha / M^alpha.

    ``mode`` is "filtered" (skip proven regions) or "brute" (every triple).
    The filters assume the unperturbed eigenvalues; pass ``mode="brute"``
    for anything else.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if gammaTilde is not None:
        cfg = cfg.replace(gammaTilde=gammaTilde)
    kv = k_vectors(len(omega), cfg.K).reshape(-1, len(omega))
    coef = cfg.gammaTilde / japanese(np.abs(kv).sum(axis=1)) ** cfg.tauTilde
    if mode == "filtered":
        skip = _ua_skip_factory(omega, cfg, lambdas, kv)
    elif mode == "brute":
        skip = None
    else:
        raise ValueError(f"unknown mode {mode!r}")
    best, tested = _scan(omega, lambdas, kv, coef, cfg.M**cfg.alpha, cfg.alpha, skip)
    v = _verdict(best)
    return (v, tested) if return_count else v


def step_threshold(N: float, cfg: ModelConfig) -> float:
    """k-independent factor gamma / (2 <N>^tau) of the KAM step conditions."""
    return cfg.gammaKam / (2 * japanese(N) ** cfg.tauKam)


def in_step_set(omega, lambdas_n, N_n, cfg: ModelConfig, n_threshold: float | None = None,
                mode: str = "filtered") -> MelnikovVerdict:
    """|omega.k + lambda_j +- lambda_l| >= gamma/(2<N>^tau) <j +- l>^alpha / M^alpha, |k|_1 <= N.

    ``n_threshold`` decouples the N inside the threshold from the k range.
    The only filter used is the far region |j +- l| >= 16 M |k|, valid as
    long as the eigenvalues stay within M of the integers j.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    lam = np.asarray(lambdas_n, dtype=float)
    nu = len(omega)
    kv = k_vectors(nu, cfg.K).reshape(-1, nu)
    kv = kv[np.abs(kv).sum(axis=1) <= N_n]
    c = step_threshold(N_n if n_threshold is None else n_threshold, cfg)
    coef = np.full(len(kv), c)
    Malpha = cfg.M**cfg.alpha
    k1 = np.abs(kv).sum(axis=1)

    def far(sign, i, k, D, n):
        if not np.any(k):
            return np.zeros(D.shape, bool)
        return np.abs(n) >= 16 * cfg.M * k1[i]

    if mode not in ("filtered", "brute"):
        raise ValueError(f"unknown mode {mode!r}")
    dev = float(np.max(np.abs(lam - np.arange(1, len(lam) + 1))))
    use_filter = mode == "filtered" and dev <= cfg.M and Malpha >= math.sqrt(2) * c
    best, _ = _scan(omega, lam, kv, coef, Malpha, cfg.alpha, far if use_filter else None)
    return _verdict(best)


# --- Monte Carlo -------------------------------------------------------------------

def estimate_measure(predicate: Callable, sampler: FrequencySampler, confidence: float = 0.95):
    """Fraction of samples for which ``predicate`` is False, with a Wilson interval.

    ``predicate`` returns a bool or a MelnikovVerdict.
    """
    if sampler.count < 100:
        raise ValueError("need at least 100 samples")
    fails = 0
    for w in sampler.samples():
        res = predicate(w)
        ok = res.member if isinstance(res, MelnikovVerdict) else bool(res)
        fails += not ok
    ci = binomtest(fails, sampler.count).proportion_ci(confidence_level=confidence, method="wilson")
    return fails / sampler.count, (float(ci.low), float(ci.high))


MEASURE_COLUMNS = ["gamma", "M", "nu", "excluded_fraction", "ci_low", "ci_high", "n_samples", "seed"]


def omega0_sweep(cfg: ModelConfig, gammas, count: int = 4000) -> list[dict]:
    """Excluded fraction of the first order set for several gamma0."""
    rows = []
    sampler = FrequencySampler(cfg.nu, cfg.M, cfg.seed, count)
    for g in gammas:
        c = cfg.replace(gamma0=float(g))
        frac, (lo, hi) = estimate_measure(lambda w: in_omega0(w, c), sampler)
        rows.append({"gamma": float(g), "M": cfg.M, "nu": cfg.nu, "excluded_fraction": frac,
                     "ci_low": lo, "ci_high": hi, "n_samples": count, "seed": cfg.seed})
    return rows


def fit_through_origin(x, y) -> tuple[float, float]:
    """Slope of y = c x and the centred coefficient of determination."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    c = float(x @ y / (x @ x))
    ss_res = float(np.sum((y - c * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return c, (1 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def write_measure_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MEASURE_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
