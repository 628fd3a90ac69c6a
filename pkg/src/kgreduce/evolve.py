"""Direct integration of i dphi/dt = H(omega t) phi and checks of the reduction against it.

``H = diag(lambda) sigma_3 + W`` acts on (phi, conj(phi)).  For a single
frequency and a step dividing the period, the one-step propagators repeat
with the phase, so they are built once and the run is a chain of matvecs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .config import ModelConfig
from .exceptions import StepTooLarge
from .kam import KamState, compose_transformation
from .operators import BlockOperator
from .spectral import eigenvalues_B, sobolev_norm


@dataclass
class EvolutionRun:
    phi0: np.ndarray
    T: float
    dt: float
    omega: np.ndarray
    r: float = 0.0
    sample_every: int = 100
    normTrace: list = field(default_factory=list)

    def __post_init__(self):
        self.phi0 = np.asarray(self.phi0, dtype=complex)
        self.omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if self.phi0.ndim != 1 or len(self.phi0) % 2:
            raise ValueError("phi0 must be a 2J vector (phi, conj(phi))")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    run: EvolutionRun
    method: str

    @property
    def J(self) -> int:
        return self.states.shape[1] // 2

    def reality_defect(self) -> float:
        J = self.J
        return float(np.abs(self.states[:, J:] - np.conj(self.states[:, :J])).max())


def pair(phi) -> np.ndarray:
    """(phi, conj(phi)) from sine coefficients phi."""
    phi = np.asarray(phi, dtype=complex)
    return np.concatenate([phi, np.conj(phi)])


def hamiltonian(W: BlockOperator, cfg: ModelConfig) -> BlockOperator:
    """B sigma_3 + W as one block operator."""
    lam = eigenvalues_B(cfg.mass, W.J)
    return BlockOperator.diagonal(lam, W.nu, W.K) + W


def periodic_dt(omega: float, max_dt: float) -> float:
    """Largest step <= max_dt that divides the period 2 pi / omega."""
    period = 2 * math.pi / abs(omega)
    return period / math.ceil(period / max_dt)


def check_step(dt: float, omega, lam_max: float) -> None:
    if dt * float(np.linalg.norm(omega)) > 0.1 + 1e-12:
        raise StepTooLarge(f"dt*|omega| = {dt * np.linalg.norm(omega):.4g} > 0.1")
    if dt * lam_max > 0.1 + 1e-12:
        raise StepTooLarge(f"dt*lambda_J = {dt * lam_max:.4g} > 0.1")


def _rk4_matrix(Hf, t, dt, n):
    I = np.eye(n)
    A1, A2, A3 = (-1j * Hf(t), -1j * Hf(t + dt / 2), -1j * Hf(t + dt))
    K1 = A1
    K2 = A2 @ (I + dt / 2 * K1)
    K3 = A2 @ (I + dt / 2 * K2)
    K4 = A3 @ (I + dt * K3)
    return I + dt / 6 * (K1 + 2 * K2 + 2 * K3 + K4)


def _midpoint_matrix(Hf, t, dt, n):
    return expm(-1j * dt * Hf(t + dt / 2))


def integrate(H: BlockOperator, run: EvolutionRun, cfg: ModelConfig, method: str = "rk4",
              backward_from: np.ndarray | None = None) -> Trajectory:
    """Step the 2J system from 0 to run.T (or back from run.T when ``backward_from`` is given).

    ``method`` is "rk4" (explicit fourth order) or "midpoint" (exponential
    midpoint, time symmetric).  The angle is omega t reduced mod 2 pi.
    """
    lam_max = float(np.max(np.abs(np.diagonal(H.d[(0,) * H.nu].real))))
    check_step(run.dt, run.omega, lam_max)
    n_steps = int(math.floor(run.T / run.dt + 1e-9))
    last = run.T - n_steps * run.dt
    if last > 1e-12 * run.dt:
        n_steps += 1  # final short step lands exactly on T
    else:
        last = run.dt
    size = 2 * H.J
    omega = run.omega
    Hf = lambda t: H.evaluate(np.mod(omega * t, 2 * math.pi))
    builder = {"rk4": _rk4_matrix, "midpoint": _midpoint_matrix}[method]
    sign = 1.0 if backward_from is None else -1.0

    n_phase = None
    if H.nu == 1 and sign > 0:
        p = 2 * math.pi / (abs(omega[0]) * run.dt)
        if abs(p - round(p)) < 1e-9:
            n_phase = int(round(p))
    cache = {}

    def step_matrix(i):
        t = run.T - i * run.dt if sign < 0 else i * run.dt
        h = last if i == n_steps - 1 else run.dt
        key = None if n_phase is None or h != run.dt else i % n_phase
        if key is not None and key in cache:
            return cache[key]
        M = builder(Hf, t, sign * h, size)
        if key is not None:
            cache[key] = M
        return M

    y = np.array(run.phi0 if backward_from is None else backward_from, dtype=complex)
    times, states = [0.0 if sign > 0 else run.T], [y.copy()]
    for i in range(n_steps):
        y = step_matrix(i) @ y
        if (i + 1) % run.sample_every == 0 or i + 1 == n_steps:
            t_end = min((i + 1) * run.dt, run.T)
            times.append(t_end if sign > 0 else run.T - t_end)
            states.append(y.copy())
    traj = Trajectory(np.array(times), np.array(states), run, method)
    J = H.J
    run.normTrace = [(float(t), run.r, sobolev_norm(s[:J], run.r)) for t, s in zip(traj.times, traj.states)]
    return traj


def time_reversal_defect(H: BlockOperator, run: EvolutionRun, cfg: ModelConfig) -> float:
    """|phi_back(0) - phi0| after integrating to T and back with the symmetric scheme."""
    fwd = integrate(H, run, cfg, method="midpoint")
    back = integrate(H, run, cfg, method="midpoint", backward_from=fwd.states[-1])
    return float(np.linalg.norm(back.states[-1] - run.phi0) / np.linalg.norm(run.phi0))


def floquet_propagator(t: float, magnus, kam: KamState, T0inv: np.ndarray | None = None) -> np.ndarray:
    """T(omega t) exp(-i t H_inf) T(0)^{-1}, T = exp(-iX_magnus) exp(-iX_1) ... exp(-iX_n)."""
    omega = kam.omega
    lam = kam.lambdas
    if T0inv is None:
        T0inv = np.linalg.inv(compose_transformation(kam, np.zeros(len(omega)), magnus))
    Tt = compose_transformation(kam, np.mod(omega * t, 2 * math.pi), magnus)
    phase = np.concatenate([np.exp(-1j * t * lam), np.exp(1j * t * lam)])
    return Tt @ (phase[:, None] * T0inv)


def floquet_compare(traj: Trajectory, magnus, kam: KamState, cfg: ModelConfig) -> dict:
    """Relative H^0 distance between the integrated and the reconstructed states."""
    phi0 = traj.run.phi0
    T0inv = np.linalg.inv(compose_transformation(kam, np.zeros(len(kam.omega)), magnus))
    norm0 = np.linalg.norm(phi0)
    errs = []
    for t, y in zip(traj.times, traj.states):
        rec = floquet_propagator(t, magnus, kam, T0inv) @ phi0
        errs.append(float(np.linalg.norm(rec - y) / norm0))
    errs = np.array(errs)
    half = traj.times <= traj.times[-1] / 2
    return {
        "times": traj.times, "errors": errs, "max_error": float(errs.max()),
        "first_half_max": float(errs[half].max()), "second_half_max": float(errs[~half].max()),
    }


def norm_bound_report(traj: Trajectory, r_list=(0, 1, 2)) -> list[dict]:
    J = traj.J
    rows = []
    for r in r_list:
        n0 = sobolev_norm(traj.run.phi0[:J], r)
        ratios = np.array([sobolev_norm(s[:J], r) for s in traj.states]) / n0
        rows.append({"r": r, "min": float(ratios.min()), "max": float(ratios.max()),
                     "ratio": float(ratios.max() / ratios.min())})
    return rows


def _fmt(v):
    return format(v, ".17g") if isinstance(v, float) else v


def write_norm_trace(path, traj: Trajectory, r_list=(0, 1, 2)) -> None:
    J = traj.J
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "norm"])
        for r in r_list:
            for t, s in zip(traj.times, traj.states):
                w.writerow([_fmt(float(t)), r, _fmt(sobolev_norm(s[:J], r))])


def write_comparison(path, comparison: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "reconstruction_error"])
        for t, e in zip(comparison["times"], comparison["errors"]):
            w.writerow([_fmt(float(t)), _fmt(float(e))])
