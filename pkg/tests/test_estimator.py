import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kgreduce import KleinGordonReducer
from kgreduce.config import PotentialSpec
from kgreduce.evolve import EvolutionRun, hamiltonian, integrate, pair, periodic_dt
from kgreduce.experiment import reference_phi0
from kgreduce.spectral import assemble_V, assemble_W

from conftest import REFERENCE


@pytest.fixture(scope="module")
def fitted():
    return KleinGordonReducer(**REFERENCE).fit(PotentialSpec.cosine(1, 1, 1.0), [400.0])


def test_params_round_trip():
    est = KleinGordonReducer(**REFERENCE)
    assert est.get_params()["gammaKam"] == 0.12
    twin = clone(est).set_params(M=400.0)
    assert twin.M == 400.0 and est.M == 200.0


def test_unfitted_use_raises():
    with pytest.raises(NotFittedError):
        KleinGordonReducer().transform(np.ones(16))


def test_fitted_attributes(fitted):
    assert fitted.n_steps_ >= 1 and fitted.eta_[-1] < 1e-12
    assert fitted.eigenvalues_.shape == (16,)
    np.testing.assert_allclose(fitted.eps_, fitted.eigenvalues_ - np.sqrt(np.arange(1, 17) ** 2 + 1.0))


def test_transform_inverts(fitted):
    phi = reference_phi0(16, 4)
    for t in (0.0, 0.7, 13.1):
        psi = fitted.transform(phi, t)
        np.testing.assert_allclose(fitted.inverse_transform(psi, t), pair(phi), atol=1e-13)
    batch = np.stack([reference_phi0(16, s) for s in range(3)])
    assert fitted.transform(batch, 0.2).shape == (3, 32)


def test_reduced_coordinates_evolve_diagonally(fitted):
    phi0 = reference_phi0(16, 1)
    t = 2.5
    lhs = fitted.transform(fitted.predict(phi0, [t])[0], t)
    lam = fitted.eigenvalues_
    rhs = np.concatenate([np.exp(-1j * lam * t), np.exp(1j * lam * t)]) * fitted.transform(phi0, 0.0)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_predict_matches_direct_integration(fitted):
    cfg = fitted.config_
    W = assemble_W(assemble_V(PotentialSpec.cosine(1, 1, 1.0), cfg), cfg)
    phi0 = pair(reference_phi0(16, 0))
    run = EvolutionRun(phi0, T=3.0, dt=periodic_dt(400.0, 0.1 / 400.0), omega=[400.0], sample_every=1000)
    traj = integrate(hamiltonian(W, cfg), run, cfg)
    pred = fitted.predict(phi0, traj.times)
    assert np.abs(pred - traj.states).max() <= 1e-6 * np.linalg.norm(phi0)


def test_input_validation(fitted):
    with pytest.raises(ValueError):
        fitted.transform(np.ones(7))
    with pytest.raises(ValueError):
        fitted.predict(np.ones(16), [[0.0, 1.0]])
    with pytest.raises(ValueError):
        KleinGordonReducer(**REFERENCE).fit(PotentialSpec.cosine(1, 1, 1.0), [400.0, 1.0])
