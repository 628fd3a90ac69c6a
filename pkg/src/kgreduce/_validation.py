"""Input checks shared by the estimator facade."""

from __future__ import annotations

import numpy as np

from .config import PotentialSpec
from .exceptions import ConfigInvalid


def check_potential(potential, nu: int) -> PotentialSpec:
    if not isinstance(potential, PotentialSpec):
        try:
            potential = PotentialSpec.from_records(potential)
        except (ConfigInvalid, TypeError):
            potential = PotentialSpec(tuple(potential))
    potential.validate(nu=nu)
    return potential


def check_omega(omega, nu: int) -> np.ndarray:
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.shape != (nu,):
        raise ValueError(f"omega must have {nu} components, got shape {omega.shape}")
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")
    return omega


def check_state(phi, J: int) -> np.ndarray:
    """Accept J sine coefficients or a 2J pair (phi, conj phi); batches along axis 0."""
    phi = np.asarray(phi, dtype=complex)
    if phi.shape[-1] == J:
        phi = np.concatenate([phi, np.conj(phi)], axis=-1)
    if phi.shape[-1] != 2 * J:
        raise ValueError(f"state must have {J} or {2 * J} entries in its last axis, got {phi.shape[-1]}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("state contains non-finite entries")
    return phi


def check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or not np.all(np.isfinite(t)):
        raise ValueError("times must be a finite 1-d array")
    return t
