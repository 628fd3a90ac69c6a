"""Random operators with the block symmetry structure, shared by several test modules."""

import numpy as np

from kgreduce.operators import AngleOperator, BlockOperator
from kgreduce.spectral import japanese


def random_matrix(rng, J, decay=1.0):
    n, m = np.indices((J, J))
    return (rng.normal(size=(J, J)) + 1j * rng.normal(size=(J, J))) / japanese(n - m) ** (decay + 1)


def random_block(rng, nu=1, K=2, J=6, scale=1.0, keep=None):
    """Random block operator with the reality/self-adjointness structure."""
    def family():
        c = np.zeros((2 * K + 1,) * nu + (J, J), complex)
        for idx in np.ndindex(*((2 * K + 1,) * nu)):
            if keep is None or np.abs(np.array(idx) - K).sum() <= keep:
                c[idx] = scale * random_matrix(rng, J)
        return AngleOperator(c, nu)
    B = BlockOperator(family(), family())
    return B.symmetrized()
