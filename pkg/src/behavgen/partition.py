"""Suite splitting and held-out partition planning.

Three generalisation axes are supported: leave-one-functionality-out,
leave-one-class-out, and leave-one-test-type-out.  The ``standard`` and
``seen`` scenarios train on nothing and on everything, respectively.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .suite import TestSuite, TestType

AXES = ("functionality", "class", "test_type")
AXIS_ALIASES = {"func": "functionality", "class": "class", "type": "test_type"}
SCENARIOS = ("standard", "seen", "functionality", "class", "test_type")


@dataclass(frozen=True)
class SuiteSplit:
    train: frozenset
    val: frozenset
    test: frozenset

    def all_ids(self) -> frozenset:
        return self.train | self.val | self.test


@dataclass(frozen=True)
class PartitionPlan:
    axis: str
    subsets: tuple  # of frozenset[str]


@dataclass(frozen=True)
class ScenarioRun:
    scenario: str
    train_functionalities: frozenset
    eval_functionalities: frozenset
    subset_name: str


def _check_ratios(ratios: Sequence[float]) -> tuple:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise InvalidInputError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidInputError("ratios must sum to 1")
    return ratios


def allocate_counts(n: int, ratios: Sequence[float], rng: np.random.Generator) -> list[int]:
    """Largest-remainder apportionment of n items over the given ratios.

    Remainder ties are broken by the rng stream; every bucket is then
    guaranteed at least one item by stealing from the largest bucket.
    """
    quotas = [n * r for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    tie_rank = rng.permutation(len(ratios))
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], tie_rank[i]))
    for i in order[:leftover]:
        counts[i] += 1
    while any(c == 0 for c in counts):
        zero = counts.index(0)
        donor = int(np.argmax(counts))
        counts[donor] -= 1
        counts[zero] += 1
    return counts


def split_suite(suite: TestSuite, ratios: Sequence[float], rng: np.random.Generator) -> SuiteSplit:
    """Per-functionality stratified shuffle split honoring the ratios."""
    ratios = _check_ratios(ratios)
    train, val, test = set(), set(), set()
    for func in suite.functionalities():
        ids = list(func.case_ids)
        if len(ids) < 3:
            raise InvalidInputError(
                f"functionality {func.name!r} has {len(ids)} cases; "
                "at least 3 are needed to populate every split"
            )
        counts = allocate_counts(len(ids), ratios, rng)
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        train.update(shuffled[: counts[0]])
        val.update(shuffled[counts[0]: counts[0] + counts[1]])
        test.update(shuffled[counts[0] + counts[1]:])
    return SuiteSplit(train=frozenset(train), val=frozenset(val), test=frozenset(test))


def split_indices(n: int, ratios: Sequence[float], rng: np.random.Generator):
    """Ratio split of an unstructured dataset; returns (train, val, test)
    index lists."""
    ratios = _check_ratios(ratios)
    if n < 3:
        raise InvalidInputError("need at least 3 items to populate every split")
    counts = allocate_counts(n, ratios, rng)
    order = list(rng.permutation(n))
    train = order[: counts[0]]
    val = order[counts[0]: counts[0] + counts[1]]
    test = order[counts[0] + counts[1]:]
    return train, val, test


def build_partition(suite: TestSuite, axis: str) -> PartitionPlan:
    """Partition the functionality set along one generalisation axis."""
    axis = AXIS_ALIASES.get(axis, axis)
    if axis == "functionality":
        subsets = tuple(frozenset([f.name]) for f in suite.functionalities())
    elif axis == "class":
        subsets = tuple(
            frozenset(f.name for f in cls.functionalities) for cls in suite.classes
        )
    elif axis == "test_type":
        subsets = []
        for ttype in TestType:
            names = frozenset(f.name for f in suite.functionalities() if f.test_type is ttype)
            if names:
                subsets.append(names)
        subsets = tuple(subsets)
    else:
        raise InvalidInputError(f"unknown axis {axis!r}")
    return PartitionPlan(axis=axis, subsets=subsets)


def plan_scenarios(suite: TestSuite, split: SuiteSplit, scenario: str) -> list[ScenarioRun]:
    """Expand a scenario name into concrete train/eval functionality sets.

    Generalisation axes yield one run per held-out subset, so concatenating
    the runs' eval sets tiles the full functionality set exactly once.
    """
    all_funcs = frozenset(suite.functionality_names())
    scenario = AXIS_ALIASES.get(scenario, scenario)
    if scenario == "standard":
        return [ScenarioRun("standard", frozenset(), all_funcs, "all")]
    if scenario == "seen":
        return [ScenarioRun("seen", all_funcs, all_funcs, "all")]
    plan = build_partition(suite, scenario)
    runs = []
    for subset in plan.subsets:
        name = "+".join(sorted(subset))
        runs.append(ScenarioRun(plan.axis, all_funcs - subset, subset, name))
    return runs
