"""JSON instance files and the seeded instance generator."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, StructuralError
from .graph import (
    EdgeFunction,
    LabeledWeightedGraph,
    RootConstraint,
    Tree,
    WeightedGraph,
    edge_index,
    legal_mask,
    random_tree,
    validate_tree,
)
from .quantities import GESpec

GEN_LOW, GEN_HIGH = 0.1, 1.0
GEN_FEATURES = 20
GEN_MAX_DENSITY = 3


@dataclass
class Instance:
    n: int
    root_constraint: RootConstraint
    weights: np.ndarray
    seed: int | None = None
    gold: list[int] | None = None
    q_weights: np.ndarray | None = None
    ge_features: list[tuple[int, int, int, float]] | None = None
    ge_target: list[float] | None = None
    labels: int | None = None
    labeled_weights: np.ndarray | None = None

    def __post_init__(self):
        self.root_constraint = RootConstraint(self.root_constraint)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.n + 1, self.n + 1):
            raise DimensionError(f"weights must be {self.n + 1}x{self.n + 1}, got {self.weights.shape}")
        if self.q_weights is not None:
            self.q_weights = np.asarray(self.q_weights, dtype=float)
        if self.labeled_weights is not None:
            self.labeled_weights = np.asarray(self.labeled_weights, dtype=float)
        # constructing every object runs the structural checks
        self.graph()
        if self.gold is not None:
            validate_tree(self.gold_tree(), self.n, self.root_constraint)
        if self.q_weights is not None:
            self.q_graph()
        if self.ge_features is not None or self.ge_target is not None:
            self.ge_spec()

    def graph(self) -> WeightedGraph:
        """The graph quantities are computed on (label-collapsed if labeled)."""
        if self.labeled_weights is not None:
            lg = self.labeled_graph()
            return WeightedGraph(lg.labeled_weights.sum(axis=2), self.root_constraint)
        return WeightedGraph(self.weights, self.root_constraint)

    def labeled_graph(self) -> LabeledWeightedGraph | None:
        if self.labeled_weights is None:
            return None
        lg = LabeledWeightedGraph(self.labeled_weights, self.root_constraint)
        if lg.n != self.n or (self.labels is not None and lg.labels != self.labels):
            raise DimensionError("labeled_weights shape disagrees with n / labels")
        return lg

    def gold_tree(self) -> Tree:
        if self.gold is None:
            raise StructuralError("instance has no gold tree")
        return Tree(tuple(self.gold))

    def q_graph(self) -> WeightedGraph:
        if self.q_weights is None:
            raise StructuralError("instance has no q_weights")
        return WeightedGraph(self.q_weights, self.root_constraint)

    def ge_spec(self) -> GESpec:
        if self.ge_features is None or self.ge_target is None:
            raise StructuralError("instance has no complete ge block")
        features = EdgeFunction.from_triplets(self.n, len(self.ge_target), self.ge_features)
        return GESpec(features, np.asarray(self.ge_target, dtype=float))

    def to_dict(self) -> dict:
        d: dict = {"n": self.n, "root_constraint": self.root_constraint.value}
        if self.seed is not None:
            d["seed"] = self.seed
        d["weights"] = self.weights.tolist()
        if self.gold is not None:
            d["gold"] = list(self.gold)
        if self.q_weights is not None:
            d["q_weights"] = self.q_weights.tolist()
        if self.ge_features is not None:
            d["ge"] = {
                "features": [[int(i), int(j), int(c), float(v)] for i, j, c, v in self.ge_features],
                "target": [float(t) for t in self.ge_target],
            }
        if self.labeled_weights is not None:
            d["labels"] = int(self.labeled_weights.shape[2])
            d["labeled_weights"] = self.labeled_weights.tolist()
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        try:
            ge = d.get("ge")
            return cls(
                n=int(d["n"]),
                root_constraint=d["root_constraint"],
                weights=d["weights"],
                seed=d.get("seed"),
                gold=d.get("gold"),
                q_weights=d.get("q_weights"),
                ge_features=None if ge is None else [tuple(t) for t in ge["features"]],
                ge_target=None if ge is None else ge["target"],
                labels=d.get("labels"),
                labeled_weights=d.get("labeled_weights"),
            )
        except KeyError as exc:
            raise StructuralError(f"instance is missing field {exc}") from None
        except ValueError as exc:
            if isinstance(exc, (StructuralError, DimensionError)):
                raise
            raise StructuralError(str(exc)) from None

    @classmethod
    def loads(cls, text: str) -> "Instance":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"instance is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "Instance":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def generate(seed: int, n: int, root_constraint=RootConstraint.MULTI,
             features: int = GEN_FEATURES) -> Instance:
    """Synthetic instance; every random draw comes from one generator seeded
    with ``seed``, so equal arguments give byte-identical files."""
    if n < 1:
        raise DimensionError("n must be >= 1")
    rng = np.random.default_rng(seed)
    mask = legal_mask(n)
    weights = rng.uniform(GEN_LOW, GEN_HIGH, size=(n + 1, n + 1)) * mask
    q_weights = rng.uniform(GEN_LOW, GEN_HIGH, size=(n + 1, n + 1)) * mask
    gold = random_tree(rng, n, root_constraint)
    triplets = []
    for i, j in zip(*edge_index(n)):
        k = int(rng.integers(0, GEN_MAX_DENSITY + 1))
        for c in sorted(rng.choice(features, size=k, replace=False).tolist()):
            triplets.append((int(i), int(j), int(c), 1.0))
    target = rng.uniform(0.0, 1.0, size=features)
    return Instance(
        n=n,
        root_constraint=RootConstraint(root_constraint),
        weights=weights,
        seed=seed,
        gold=list(gold.parent),
        q_weights=q_weights,
        ge_features=triplets,
        ge_target=target.tolist(),
    )
