import numpy as np
import pytest
import scipy.sparse as sp

from ltswaves.mesh import DofPartition


class ToySystem:
    """Minimal stand-in for a semi-discrete system: dense B plus a mask."""

    def __init__(self, B, mask):
        self.B = sp.csr_matrix(np.asarray(B, dtype=float))
        self.dim = self.B.shape[0]
        self.partition = DofPartition(self.dim, np.asarray(mask, dtype=bool))

    @property
    def split(self):
        m = self.partition.fine_mask.astype(float)
        return (self.B @ sp.diags(1.0 - m)).tocsr(), (self.B @ sp.diags(m)).tocsr()


@pytest.fixture
def toy_system():
    return ToySystem


def stable_random_system(rng, n, damping=(0.01, 0.1)):
    """Skew-dominant random operator: eigenvalues in the left half plane."""
    q = 0.5 * rng.standard_normal((n, n))
    return (q - q.T) - np.diag(rng.uniform(*damping, n))


@pytest.fixture
def random_system():
    return stable_random_system
