import math

import numpy as np
import pytest

from kgreduce.config import ModelConfig, PotentialSpec
from kgreduce.kam import kam_run
from kgreduce.magnus import magnus_normal_form
from kgreduce.spectral import assemble_V, assemble_W, eigenvalues_B

# nu = 1, V = cos(theta) cos(x), m = 1, M = 200, alpha = 0.4, omega = 2M
REFERENCE = dict(nu=1, mass=1.0, M=200.0, J=16, K=4, alpha=0.4, s0=0.6, rho=0.5,
                 gammaKam=0.12, k0=math.e, seed=0)


def reference_model(**changes) -> ModelConfig:
    return ModelConfig(**{**REFERENCE, **changes})


def reference_omega(cfg: ModelConfig) -> np.ndarray:
    return np.array([2.0 * cfg.M])


@pytest.fixture(scope="session")
def ref_cfg():
    return reference_model()


@pytest.fixture(scope="session")
def ref_potential():
    return PotentialSpec.cosine(1, 1, 1.0)


@pytest.fixture(scope="session")
def ref_pipeline(ref_cfg, ref_potential):
    """Magnus + KAM on the reference configuration, shared across tests."""
    V = assemble_V(ref_potential, ref_cfg)
    W = assemble_W(V, ref_cfg)
    omega = reference_omega(ref_cfg)
    mag = magnus_normal_form(V, omega, ref_cfg)
    state, ladder = kam_run(mag.V, eigenvalues_B(ref_cfg.mass, ref_cfg.J), omega, ref_cfg)
    return {"V": V, "W": W, "omega": omega, "magnus": mag, "state": state, "ladder": ladder}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
