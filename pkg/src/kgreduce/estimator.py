"""Estimator-style facade over the Magnus and KAM stages."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_omega, check_potential, check_state, check_times
from .config import ModelConfig
from .evolve import floquet_propagator
from .kam import compose_transformation, kam_run
from .magnus import magnus_normal_form
from .spectral import assemble_V, eigenvalues_B


class KleinGordonReducer(BaseEstimator):
    """Reduce the driven Klein-Gordon system to constant coefficients.

    ``fit(potential, omega)`` runs the Magnus normal form and the KAM
    iteration for one frequency vector.  ``transform(phi, t)`` maps a state
    at time t into the reduced coordinates, where the flow is the diagonal
    exponential of ``eigenvalues_``; ``predict(phi0, times)`` propagates a
    state with the resulting Floquet decomposition.
    """

    def __init__(self, nu=1, mass=0.0, rho=1.0, M=200.0, J=16, K=4, alpha=0.4, s0=1.0,
                 gamma0=0.5, tau0=None, gammaTilde=0.125, tauTilde=None, gammaKam=0.06, tauKam=None,
                 lieOrder=8, quadS=6, seed=0, k0=1e-2, maxSteps=12, etaTol=1e-12):
        self.nu = nu
        self.mass = mass
        self.rho = rho
        self.M = M
        self.J = J
        self.K = K
        self.alpha = alpha
        self.s0 = s0
        self.gamma0 = gamma0
        self.tau0 = tau0
        self.gammaTilde = gammaTilde
        self.tauTilde = tauTilde
        self.gammaKam = gammaKam
        self.tauKam = tauKam
        self.lieOrder = lieOrder
        self.quadS = quadS
        self.seed = seed
        self.k0 = k0
        self.maxSteps = maxSteps
        self.etaTol = etaTol

    def _model_config(self) -> ModelConfig:
        names = [f for f in ModelConfig.__dataclass_fields__]
        return ModelConfig(**{n: getattr(self, n) for n in names})

    def fit(self, potential, omega):
        cfg = self._model_config()
        potential = check_potential(potential, cfg.nu)
        omega = check_omega(omega, cfg.nu)
        V = assemble_V(potential, cfg)
        self.config_ = cfg
        self.omega_ = omega
        self.magnus_ = magnus_normal_form(V, omega, cfg)
        lam = eigenvalues_B(cfg.mass, cfg.J)
        self.kam_state_, self.ladder_ = kam_run(self.magnus_.V, lam, omega, cfg,
                                                maxSteps=self.maxSteps, etaTol=self.etaTol)
        self.eigenvalues_ = self.ladder_.final
        self.eps_ = self.ladder_.eps
        self.eta_ = np.array(self.kam_state_.schedule.etas)
        self.n_steps_ = self.kam_state_.n
        self._T0 = compose_transformation(self.kam_state_, np.zeros(cfg.nu), self.magnus_)
        self._T0inv = np.linalg.inv(self._T0)
        return self

    def transformation(self, t: float = 0.0) -> np.ndarray:
        """T(omega t): reduced coordinates -> original ones."""
        check_is_fitted(self)
        theta = np.mod(self.omega_ * t, 2 * math.pi)
        return compose_transformation(self.kam_state_, theta, self.magnus_)

    def transform(self, phi, t: float = 0.0):
        phi = check_state(phi, self.J)
        return np.linalg.solve(self.transformation(t), phi.T).T

    def inverse_transform(self, psi, t: float = 0.0):
        psi = check_state(psi, self.J)
        return (self.transformation(t) @ psi.T).T

    def predict(self, phi0, times):
        """States phi(t) for each t, shape (len(times), 2J)."""
        check_is_fitted(self)
        phi0 = check_state(phi0, self.config_.J)
        times = check_times(times)
        return np.array([floquet_propagator(t, self.magnus_, self.kam_state_, self._T0inv) @ phi0
                         for t in times])
