"""Expectations of edge-decomposable functions under edge-factored
spanning-arborescence distributions."""

from .errors import (
    DimensionError,
    DomainError,
    NumericalError,
    SingularError,
    SizeError,
    StructuralError,
    SupportError,
    TreexpError,
)
from .expectations import (
    EdgeTotals,
    Factored,
    PairwiseTotals,
    SecondOrderResult,
    edge_totals,
    first_total,
    labeled_edge_marginals,
    pairwise_totals,
    second_total,
    second_total_hes,
    second_total_vjp,
)
from .graph import (
    EdgeFunction,
    LabeledWeightedGraph,
    RootConstraint,
    Tree,
    WeightedGraph,
    enumerate_trees,
    iter_trees,
    validate,
)
from .laplacian import build_laplacian, log_partition_function, partition_function
from .quantities import (
    GESpec,
    QuantityResult,
    cross_entropy,
    edge_marginals,
    expected_attachment,
    ge_objective,
    kl_divergence,
    lp_norm,
    partition,
    renyi_entropy,
    shannon_entropy,
    shannon_entropy_baseline_n4,
)

__version__ = "0.1.0"
