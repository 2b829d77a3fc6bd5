"""Behavioural test-suite taxonomy, labels and expectation functions.

A suite is a three-level hierarchy: functionality classes group
functionalities, and each functionality owns a disjoint set of test cases.
Cases come in three flavours:

* MFT  -- a single input with an expected label,
* INV  -- an original input plus label-preserving perturbations,
* DIR  -- perturbations whose effect must satisfy a comparison predicate
          (or match a known label, for pair-style tasks).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DataError, InvalidInputError

TextInput = Union[str, tuple]


class TestType(str, Enum):
    MFT = "MFT"
    INV = "INV"
    DIR = "DIR"


class DeltaKind(str, Enum):
    """The four directional-expectation predicates for 2-class tasks.

    The two sentiment-directional kinds compare a fixed class probability
    (index 0 = negative, index 1 = positive); the two confidence kinds
    compare the probability of the original prediction's argmax class.
    """

    NOT_MORE_NEGATIVE = "not_more_negative"
    NOT_MORE_POSITIVE = "not_more_positive"
    NOT_MORE_CONFIDENT = "not_more_confident"
    NOT_LESS_CONFIDENT = "not_less_confident"


SENTIMENT_KINDS = (DeltaKind.NOT_MORE_NEGATIVE, DeltaKind.NOT_MORE_POSITIVE)


@dataclass(frozen=True)
class NeutralPolicy:
    """Band of positive probability treated as a neutral prediction.

    Bounds are inclusive at both ends. ``not_negative`` passes at or above
    ``lower``.
    """

    lower: float = 1.0 / 3.0
    upper: float = 2.0 / 3.0
    positive_index: int = 1


DEFAULT_POLICY = NeutralPolicy()


@dataclass(frozen=True)
class LabelSpec:
    """Expected label: a hard class index, a soft distribution, or the
    2-class 'not negative' relaxation."""

    kind: str
    class_index: int | None = None
    probs: tuple | None = None

    @staticmethod
    def hard(class_index: int) -> "LabelSpec":
        return LabelSpec(kind="hard", class_index=int(class_index))

    @staticmethod
    def soft(probs: Sequence[float]) -> "LabelSpec":
        return LabelSpec(kind="soft", probs=tuple(float(p) for p in probs))

    @staticmethod
    def not_negative() -> "LabelSpec":
        return LabelSpec(kind="not_negative")

    def validate(self, num_classes: int | None = None) -> list[str]:
        """Return a list of problems (empty when well-formed)."""
        problems = []
        if self.kind == "hard":
            if self.class_index is None or self.class_index < 0:
                problems.append("hard label needs a non-negative class index")
            elif num_classes is not None and self.class_index >= num_classes:
                problems.append(
                    f"hard label index {self.class_index} out of range for "
                    f"{num_classes} classes"
                )
        elif self.kind == "soft":
            if not self.probs:
                problems.append("soft label needs a probability vector")
            else:
                vec = np.asarray(self.probs, dtype=float)
                if (vec < 0).any():
                    problems.append("soft label has negative entries")
                if abs(vec.sum() - 1.0) > 1e-9:
                    problems.append("soft label does not sum to 1")
                if num_classes is not None and vec.size != num_classes:
                    problems.append("soft label dimension mismatch")
        elif self.kind == "not_negative":
            if num_classes is not None and num_classes != 2:
                problems.append("not_negative labels require a 2-class task")
        else:
            problems.append(f"unknown label kind {self.kind!r}")
        return problems


@dataclass(frozen=True)
class MftCase:
    input: TextInput
    label: LabelSpec


@dataclass(frozen=True)
class InvCase:
    original: TextInput
    perturbed: tuple


@dataclass(frozen=True)
class DirCase:
    original: TextInput
    perturbed: tuple
    delta: DeltaKind | None = None
    label: LabelSpec | None = None


@dataclass(frozen=True)
class TestCase:
    id: int
    payload: Union[MftCase, InvCase, DirCase]

    @property
    def test_type(self) -> TestType:
        if isinstance(self.payload, MftCase):
            return TestType.MFT
        if isinstance(self.payload, InvCase):
            return TestType.INV
        return TestType.DIR


@dataclass(frozen=True)
class Functionality:
    name: str
    test_type: TestType
    case_ids: tuple


@dataclass(frozen=True)
class FunctionalityClass:
    name: str
    functionalities: tuple


@dataclass(frozen=True)
class TestSuite:
    name: str
    classes: tuple
    cases: dict = field(default_factory=dict)

    def functionalities(self) -> Iterator[Functionality]:
        for cls in self.classes:
            yield from cls.functionalities

    def functionality_names(self) -> list[str]:
        return [f.name for f in self.functionalities()]

    def functionality(self, name: str) -> Functionality:
        for f in self.functionalities():
            if f.name == name:
                return f
        raise KeyError(name)

    def class_of(self, functionality_name: str) -> str:
        for cls in self.classes:
            for f in cls.functionalities:
                if f.name == functionality_name:
                    return cls.name
        raise KeyError(functionality_name)

    def cases_of(self, functionality_name: str) -> list[TestCase]:
        func = self.functionality(functionality_name)
        return [self.cases[i] for i in func.case_ids]


# ---------------------------------------------------------------------------
# expectation functions


def as_prediction(pred) -> np.ndarray:
    """Validate and return a prediction as a probability vector."""
    p = np.asarray(pred, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise InvalidInputError("prediction must be a vector of >= 2 probabilities")
    if (p < 0).any() or not np.isfinite(p).all():
        raise InvalidInputError("prediction entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise InvalidInputError("prediction entries must sum to 1")
    return p


def _is_neutral_target(probs: np.ndarray) -> bool:
    return probs.size == 2 and abs(probs[0] - probs[1]) <= 1e-9


def evaluate_mft(pred, spec: LabelSpec, policy: NeutralPolicy = DEFAULT_POLICY) -> bool:
    """Check a single prediction against an expected label.

    Hard labels use argmax (ties break toward the lowest index). The soft
    uniform 2-class label means "neutral": the positive probability must
    fall inside the policy band. ``not_negative`` admits anything at or
    above the band's lower edge.
    """
    p = as_prediction(pred)
    if spec.kind == "hard":
        if spec.class_index is None or spec.class_index >= p.size:
            raise InvalidInputError("label index out of range for prediction")
        return int(np.argmax(p)) == spec.class_index
    if spec.kind == "soft":
        t = np.asarray(spec.probs, dtype=float)
        if t.size != p.size:
            raise InvalidInputError("soft label dimension mismatch")
        if _is_neutral_target(t):
            pos = p[policy.positive_index]
            return policy.lower <= pos <= policy.upper
        return int(np.argmax(p)) == int(np.argmax(t))
    if spec.kind == "not_negative":
        if p.size != 2:
            raise InvalidInputError("not_negative labels require 2-class predictions")
        return p[policy.positive_index] >= policy.lower
    raise InvalidInputError(f"unknown label kind {spec.kind!r}")


def evaluate_inv(preds: Sequence) -> bool:
    """Invariance check: every perturbed argmax must match the original's."""
    if len(preds) < 2:
        raise InvalidInputError("invariance check needs the original and >= 1 perturbed")
    vecs = [as_prediction(p) for p in preds]
    ref = int(np.argmax(vecs[0]))
    return all(int(np.argmax(v)) == ref for v in vecs[1:])


def _delta_target(kind: DeltaKind, y0: np.ndarray, yi: np.ndarray):
    """Resolve (index, sign) for a directional comparison.

    sign +1 means the monitored probability must not rise above the
    reference; -1 means it must not fall below.
    """
    if y0.size != yi.size:
        raise InvalidInputError("prediction dimension mismatch")
    if kind in SENTIMENT_KINDS:
        if y0.size != 2:
            raise InvalidInputError(f"{kind.value} requires 2-class predictions")
        index = 0 if kind is DeltaKind.NOT_MORE_NEGATIVE else 1
        return index, 1.0
    c_star = int(np.argmax(y0))
    sign = 1.0 if kind is DeltaKind.NOT_MORE_CONFIDENT else -1.0
    return c_star, sign


def delta(kind: DeltaKind, y0, yi) -> bool:
    """Directional predicate on an (original, perturbed) prediction pair."""
    a = as_prediction(y0)
    b = as_prediction(yi)
    index, sign = _delta_target(kind, a, b)
    if sign > 0:
        return b[index] <= a[index]
    return b[index] >= a[index]


def epsilon(kind: DeltaKind, y0, yi) -> float:
    """Continuous violation measure in [0, 1]; 0 exactly when delta holds."""
    a = as_prediction(y0)
    b = as_prediction(yi)
    index, sign = _delta_target(kind, a, b)
    return float(max(0.0, sign * (b[index] - a[index])))


def evaluate_dir(case: DirCase, preds: Sequence, policy: NeutralPolicy = DEFAULT_POLICY) -> bool:
    """Directional-expectation check for one case.

    Delta form expects ``preds[0]`` to be the original's prediction followed
    by the perturbed ones; label form expects only the perturbed predictions.
    """
    if case.delta is not None:
        if len(preds) != 1 + len(case.perturbed):
            raise InvalidInputError(
                "delta-form DIR expects the original plus one prediction per perturbation"
            )
        return all(delta(case.delta, preds[0], p) for p in preds[1:])
    if case.label is not None:
        if len(preds) != len(case.perturbed):
            raise InvalidInputError(
                "label-form DIR expects exactly one prediction per perturbation"
            )
        return all(evaluate_mft(p, case.label, policy) for p in preds)
    raise InvalidInputError("DIR case carries neither a delta kind nor a label")


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def add(self, message: str) -> None:
        self.problems.append(message)


def validate_suite(suite: TestSuite) -> ValidationReport:
    """Check every structural invariant; problems are reported, never raised."""
    report = ValidationReport()
    seen_funcs: dict = {}
    owner: dict = {}

    for cls in suite.classes:
        if not cls.functionalities:
            report.add(f"class {cls.name!r} has no functionalities")
        for func in cls.functionalities:
            if func.name in seen_funcs:
                report.add(
                    f"functionality {func.name!r} appears in classes "
                    f"{seen_funcs[func.name]!r} and {cls.name!r}"
                )
            seen_funcs[func.name] = cls.name
            for cid in func.case_ids:
                if cid in owner:
                    report.add(
                        f"case {cid} belongs to both {owner[cid]!r} and {func.name!r}"
                    )
                owner[cid] = func.name
                case = suite.cases.get(cid)
                if case is None:
                    report.add(f"functionality {func.name!r} references missing case {cid}")
                    continue
                if case.test_type is not func.test_type:
                    report.add(
                        f"case {cid} has type {case.test_type.value} but functionality "
                        f"{func.name!r} expects {func.test_type.value}"
                    )

    for cid, case in suite.cases.items():
        if cid != case.id:
            report.add(f"case stored under id {cid} carries id {case.id}")
        if cid not in owner:
            report.add(f"case {cid} is not referenced by any functionality")
        payload = case.payload
        if isinstance(payload, MftCase):
            for problem in payload.label.validate():
                report.add(f"case {cid}: {problem}")
        elif isinstance(payload, InvCase):
            if not payload.perturbed:
                report.add(f"case {cid}: INV case has no perturbations")
            if any(p == payload.original for p in payload.perturbed):
                report.add(f"case {cid}: INV perturbation equals the original")
        elif isinstance(payload, DirCase):
            if (payload.delta is None) == (payload.label is None):
                report.add(f"case {cid}: DIR case needs exactly one of delta or label")
            if not payload.perturbed:
                report.add(f"case {cid}: DIR case has no perturbations")

    n_class = len(suite.classes)
    n_func = len(seen_funcs)
    m = len(suite.cases)
    if not n_class < n_func:
        report.add(f"hierarchy violation: n_class={n_class} must be < n_func={n_func}")
    if not n_func < m:
        report.add(f"hierarchy violation: n_func={n_func} must be < case count {m}")
    return report


# ---------------------------------------------------------------------------
# serialization (canonical JSON schema)


def _encode_input(value: TextInput):
    if isinstance(value, tuple):
        return list(value)
    return value


def _decode_input(value) -> TextInput:
    if isinstance(value, list):
        if len(value) != 2 or not all(isinstance(v, str) for v in value):
            raise DataError("pair inputs must be two strings")
        return (value[0], value[1])
    if isinstance(value, str):
        return value
    raise DataError(f"unsupported input value {value!r}")


def _encode_label(spec: LabelSpec):
    if spec.kind == "hard":
        return spec.class_index
    if spec.kind == "soft":
        return list(spec.probs)
    return "not_negative"


def _decode_label(value) -> LabelSpec:
    if isinstance(value, bool):
        raise DataError("labels must be an index, a vector, or 'not_negative'")
    if isinstance(value, int):
        return LabelSpec.hard(value)
    if isinstance(value, list):
        return LabelSpec.soft(value)
    if value == "not_negative":
        return LabelSpec.not_negative()
    raise DataError(f"unsupported label value {value!r}")


def _encode_case(case: TestCase) -> dict:
    payload = case.payload
    if isinstance(payload, MftCase):
        return {"input": _encode_input(payload.input), "label": _encode_label(payload.label)}
    if isinstance(payload, InvCase):
        return {
            "original": _encode_input(payload.original),
            "perturbed": [_encode_input(p) for p in payload.perturbed],
        }
    out = {
        "original": _encode_input(payload.original),
        "perturbed": [_encode_input(p) for p in payload.perturbed],
    }
    if payload.delta is not None:
        out["delta"] = payload.delta.value
    else:
        out["label"] = _encode_label(payload.label)
    return out


def _decode_case(case_id: int, test_type: TestType, raw: dict) -> TestCase:
    if test_type is TestType.MFT:
        payload = MftCase(input=_decode_input(raw["input"]), label=_decode_label(raw["label"]))
    elif test_type is TestType.INV:
        payload = InvCase(
            original=_decode_input(raw["original"]),
            perturbed=tuple(_decode_input(p) for p in raw["perturbed"]),
        )
    else:
        delta_kind = DeltaKind(raw["delta"]) if "delta" in raw else None
        label = _decode_label(raw["label"]) if "label" in raw else None
        payload = DirCase(
            original=_decode_input(raw["original"]),
            perturbed=tuple(_decode_input(p) for p in raw["perturbed"]),
            delta=delta_kind,
            label=label,
        )
    return TestCase(id=case_id, payload=payload)


def suite_to_dict(suite: TestSuite) -> dict:
    return {
        "name": suite.name,
        "classes": [
            {
                "name": cls.name,
                "functionalities": [
                    {
                        "name": func.name,
                        "type": func.test_type.value,
                        "cases": [_encode_case(suite.cases[cid]) for cid in func.case_ids],
                    }
                    for func in cls.functionalities
                ],
            }
            for cls in suite.classes
        ],
    }


def suite_from_dict(data: dict) -> TestSuite:
    try:
        classes = []
        cases: dict = {}
        next_id = 0
        for cls_raw in data["classes"]:
            funcs = []
            for func_raw in cls_raw["functionalities"]:
                test_type = TestType(func_raw["type"])
                ids = []
                for case_raw in func_raw["cases"]:
                    case = _decode_case(next_id, test_type, case_raw)
                    cases[next_id] = case
                    ids.append(next_id)
                    next_id += 1
                funcs.append(
                    Functionality(name=func_raw["name"], test_type=test_type, case_ids=tuple(ids))
                )
            classes.append(FunctionalityClass(name=cls_raw["name"], functionalities=tuple(funcs)))
        return TestSuite(name=data["name"], classes=tuple(classes), cases=cases)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed suite record: {exc}") from exc


def serialize_suite(suite: TestSuite) -> str:
    return json.dumps(suite_to_dict(suite), indent=2) + "\n"


def parse_suite(text: str) -> TestSuite:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"line {exc.lineno}: {exc.msg}") from exc
    return suite_from_dict(data)
