import numpy as np
import pytest

from treexp.graph import RootConstraint, WeightedGraph, random_graph

MULTI, SINGLE = RootConstraint.MULTI, RootConstraint.SINGLE
BOTH = [MULTI, SINGLE]


def ones(n, constraint=MULTI):
    return WeightedGraph.complete(n, constraint)


def n2_uniform():
    """N=2 all-ones multi-root: three unit-weight trees."""
    return ones(2, MULTI)


def rand_graph(seed, n, constraint=MULTI):
    return random_graph(np.random.default_rng(seed), n, constraint)


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale, initial=0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
