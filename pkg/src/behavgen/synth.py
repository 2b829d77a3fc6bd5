"""Synthetic i.i.d. datasets and behavioural suites built from templates.

The default experiment ships two tasks: a single-text sentiment analogue
(airline-domain suite over a movie-domain dataset, so the suite's negation
functionalities collide with the dataset's sentiment lexicon) and a
question-pair duplicate analogue whose relation class plants a contrastive
functionality pair (same template skeleton, opposite labels).

All generation is deterministic given the rng.  Planted correlations are
explicit in the spec and surfaced through ``suite_metadata``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .suite import (
    DeltaKind,
    DirCase,
    Functionality,
    FunctionalityClass,
    InvCase,
    LabelSpec,
    MftCase,
    TestCase,
    TestSuite,
    TestType,
    validate_suite,
)

_PLACEHOLDER = re.compile(r"\{([a-z_]+?)(\d*)\}")


@dataclass
class IidSpec:
    """Recipe for a labeled i.i.d. dataset (class-conditional token pools)."""

    name: str
    task: str                     # "single" | "pair"
    sample_count: int
    pools: dict
    params: dict
    balance: float = 0.5
    noise_rate: float = 0.02

    def validate(self) -> None:
        if self.task not in ("single", "pair"):
            raise InvalidInputError(f"unknown task kind {self.task!r}")
        if not 0.0 < self.balance < 1.0:
            raise InvalidInputError("label balance must lie in (0, 1)")
        if not 0.0 <= self.noise_rate <= 0.3:
            raise InvalidInputError("noise rate must lie in [0, 0.3]")
        if self.sample_count < 3:
            raise InvalidInputError("sample_count must be at least 3")
        for key, pool in self.pools.items():
            if not pool:
                raise InvalidInputError(f"pool {key!r} is empty")


@dataclass(frozen=True)
class FunctionalitySpec:
    name: str
    test_type: TestType
    recipe: str
    case_count: int
    params: dict


@dataclass(frozen=True)
class ClassSpec:
    name: str
    functionalities: tuple


@dataclass
class SuiteSpec:
    name: str
    task: str
    pools: dict
    classes: tuple
    contrastive_pairs: tuple = ()
    planted_cues: tuple = ()

    def functionality_names(self) -> list:
        return [f.name for cls in self.classes for f in cls.functionalities]

    def validate(self) -> None:
        if self.task not in ("single", "pair"):
            raise InvalidInputError(f"unknown task kind {self.task!r}")
        names = self.functionality_names()
        if len(set(names)) != len(names):
            raise InvalidInputError("functionality names must be unique")
        owner = {f.name: cls.name for cls in self.classes for f in cls.functionalities}
        for fspec in (f for cls in self.classes for f in cls.functionalities):
            if fspec.case_count < 9:
                raise InvalidInputError(
                    f"functionality {fspec.name!r} needs >= 9 cases for splitting")
        for first, second in self.contrastive_pairs:
            if first not in owner or second not in owner:
                raise InvalidInputError(f"contrastive pair ({first}, {second}) names "
                                        "unknown functionalities")
            if owner[first] != owner[second]:
                raise InvalidInputError(
                    f"contrastive pair ({first}, {second}) spans two classes")


# ---------------------------------------------------------------------------
# template machinery


def _draw_distinct(pool: Sequence[str], used: set, rng: np.random.Generator) -> str:
    options = [w for w in pool if w not in used]
    if not options:
        options = list(pool)
    return options[int(rng.integers(len(options)))]


class _Binding:
    """Per-case placeholder bindings; repeated draws from one pool are kept
    distinct, and ``<base>_syn`` pools resolve index-aligned to their base."""

    def __init__(self, pools: dict, rng: np.random.Generator):
        self.pools = pools
        self.rng = rng
        self.values: dict = {}
        self.used: dict = {}

    def get(self, base: str, suffix: str) -> str:
        key = base + suffix
        if key in self.values:
            return self.values[key]
        if base.endswith("_syn"):
            root = base[:-4]
            aligned = self.pools.get(base)
            root_pool = self.pools.get(root)
            root_value = self.values.get(root + suffix) or self.values.get(root)
            if aligned is None or root_pool is None or root_value is None:
                raise InvalidInputError(f"aligned pool {base!r} needs a prior {root!r} draw")
            value = aligned[list(root_pool).index(root_value)]
        else:
            pool = self.pools.get(base)
            if pool is None:
                raise InvalidInputError(f"template placeholder {base!r} has no pool")
            value = _draw_distinct(pool, self.used.setdefault(base, set()), self.rng)
            self.used[base].add(value)
        self.values[key] = value
        return value

    def set(self, name: str, value: str) -> None:
        self.values[name] = value


def fill_template(template: str, binding: _Binding) -> str:
    def sub(match: re.Match) -> str:
        return binding.get(match.group(1), match.group(2))

    return _PLACEHOLDER.sub(sub, template)


def transpose_typo(word: str, rng: np.random.Generator) -> str:
    """Swap one pair of (distinct) adjacent characters; always differs from
    the input."""
    positions = [i for i in range(len(word) - 1) if word[i] != word[i + 1]]
    if not positions:
        return word + word[-1] if word else word + "x"
    i = positions[int(rng.integers(len(positions)))]
    return word[:i] + word[i + 1] + word[i] + word[i + 2:]


def _replace_token(text: str, token: str, replacement: str) -> str:
    tokens = text.split()
    out = [replacement if t == token else t for t in tokens]
    return " ".join(out)


def _choose_template(params: dict, rng: np.random.Generator, key: str = "templates"):
    templates = params.get(key)
    if not templates:
        raise InvalidInputError(f"recipe needs non-empty {key!r}")
    return templates[int(rng.integers(len(templates)))]


def _mixed_pool(params: dict, rng: np.random.Generator) -> str:
    """Pick a pool name from params['word_mix'] = [(pool, weight), ...]."""
    mix = params["word_mix"]
    weights = np.array([w for _, w in mix], dtype=float)
    weights = weights / weights.sum()
    return mix[int(rng.choice(len(mix), p=weights))][0]


# ---------------------------------------------------------------------------
# i.i.d. generation


def generate_iid(spec: IidSpec, rng: np.random.Generator) -> list:
    """Labeled examples: (text, label) for single-text tasks and
    ((text_a, text_b), label) for pair tasks."""
    spec.validate()
    if spec.task == "single":
        examples = _generate_iid_single(spec, rng)
    else:
        examples = _generate_iid_pair(spec, rng)
    noisy = []
    for text, label in examples:
        if spec.noise_rate > 0.0 and rng.random() < spec.noise_rate:
            label = 1 - label
        noisy.append((text, label))
    return noisy


def _generate_iid_single(spec: IidSpec, rng: np.random.Generator) -> list:
    templates = spec.params["templates"]
    pos_key = spec.params["positive_pool"]
    neg_key = spec.params["negative_pool"]
    examples = []
    for _ in range(spec.sample_count):
        label = 1 if rng.random() < spec.balance else 0
        binding = _Binding(spec.pools, rng)
        binding.set("word", _draw_distinct(spec.pools[pos_key if label else neg_key],
                                           set(), rng))
        template = templates[int(rng.integers(len(templates)))]
        examples.append((fill_template(template, binding), label))
    return examples


def _generate_iid_pair(spec: IidSpec, rng: np.random.Generator) -> list:
    pairs = spec.params["paraphrase_pairs"]
    negative_kinds = spec.params["negative_mix"]  # [(kind, weight), ...]
    neg_weights = np.array([w for _, w in negative_kinds], dtype=float)
    neg_weights = neg_weights / neg_weights.sum()
    subjects = spec.pools[spec.params["subject_pool"]]
    examples = []
    for _ in range(spec.sample_count):
        if rng.random() < spec.balance:
            q1_t, q2_t = pairs[int(rng.integers(len(pairs)))]
            binding = _Binding(spec.pools, rng)
            examples.append(((fill_template(q1_t, binding), fill_template(q2_t, binding)), 1))
            continue
        kind = negative_kinds[int(rng.choice(len(negative_kinds), p=neg_weights))][0]
        if kind == "unrelated":
            i = int(rng.integers(len(pairs)))
            j = int(rng.integers(len(pairs)))
            s1 = _draw_distinct(subjects, set(), rng)
            s2 = _draw_distinct(subjects, {s1}, rng)
            b1 = _Binding(spec.pools, rng)
            b1.set(spec.params["subject_pool"], s1)
            b2 = _Binding(spec.pools, rng)
            b2.set(spec.params["subject_pool"], s2)
            examples.append(((fill_template(pairs[i][0], b1),
                              fill_template(pairs[j][1], b2)), 0))
        elif kind == "minimal_edit":
            template = pairs[int(rng.integers(len(pairs)))][0]
            s1 = _draw_distinct(subjects, set(), rng)
            s2 = _draw_distinct(subjects, {s1}, rng)
            b1 = _Binding(spec.pools, rng)
            b1.set(spec.params["subject_pool"], s1)
            b2 = _Binding(spec.pools, rng)
            b2.set(spec.params["subject_pool"], s2)
            examples.append(((fill_template(template, b1), fill_template(template, b2)), 0))
        elif kind == "reorder":
            comp = _draw_distinct(spec.pools[spec.params["comparative_pool"]], set(), rng)
            items = spec.pools[spec.params["compare_pool"]]
            x = _draw_distinct(items, set(), rng)
            y = _draw_distinct(items, {x}, rng)
            examples.append(((f"is {x} {comp} than {y}", f"is {y} {comp} than {x}"), 0))
        else:
            raise InvalidInputError(f"unknown negative kind {kind!r}")
    return examples


# ---------------------------------------------------------------------------
# suite generation


def _case_text(fspec: FunctionalitySpec, pools: dict, rng: np.random.Generator):
    """Build one sentence for perturbation recipes; returns (text, binding,
    label record)."""
    params = fspec.params
    binding = _Binding(pools, rng)
    if "word_mix" in params:
        pool_name = _mixed_pool(params, rng)
        binding.set("word", _draw_distinct(pools[pool_name], set(), rng))
        record = params.get("labels_by_pool", {}).get(pool_name)
    else:
        record = params.get("label_record")
    template = _choose_template(params, rng)
    return fill_template(template, binding), binding, record


def _case_pair(fspec: FunctionalitySpec, pools: dict, rng: np.random.Generator):
    params = fspec.params
    binding = _Binding(pools, rng)
    q1_t, q2_t = _choose_template(params, rng)
    return (fill_template(q1_t, binding), fill_template(q2_t, binding)), binding


def _generate_case(fspec: FunctionalitySpec, pools: dict, rng: np.random.Generator,
                   case_id: int, records: dict) -> TestCase:
    params = fspec.params
    recipe = fspec.recipe

    if recipe == "mft":
        binding = _Binding(pools, rng)
        text = fill_template(_choose_template(params, rng), binding)
        payload = MftCase(input=text, label=params["label"])
    elif recipe == "mft_pair":
        pair, _ = _case_pair(fspec, pools, rng)
        payload = MftCase(input=pair, label=params["label"])
    elif recipe == "inv_typo":
        text, binding, record = _case_text(fspec, pools, rng)
        token = binding.values[params["typo_key"]]
        perturbed = []
        while len(perturbed) < params.get("n_perturbed", 2):
            variant = _replace_token(text, token, transpose_typo(token, rng))
            if variant != text and variant not in perturbed:
                perturbed.append(variant)
        payload = InvCase(original=text, perturbed=tuple(perturbed))
        records[case_id] = {"label": record, "perturbed_label": record}
    elif recipe == "inv_filler":
        text, binding, record = _case_text(fspec, pools, rng)
        fillers = pools[params["filler_pool"]]
        chosen = set()
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            filler = _draw_distinct(fillers, chosen, rng)
            chosen.add(filler)
            perturbed.append(f"{filler} {text}")
        payload = InvCase(original=text, perturbed=tuple(perturbed))
        records[case_id] = {"label": record, "perturbed_label": record}
    elif recipe == "dir_insert":
        text, binding, record = _case_text(fspec, pools, rng)
        word = binding.values["word"]
        modifiers = pools[params["modifier_pool"]]
        chosen = set()
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            modifier = _draw_distinct(modifiers, chosen, rng)
            chosen.add(modifier)
            perturbed.append(_replace_token(text, word, f"{modifier} {word}"))
        payload = DirCase(original=text, perturbed=tuple(perturbed),
                          delta=params["delta"])
        records[case_id] = {"label": record}
    elif recipe == "dir_append":
        text, binding, record = _case_text(fspec, pools, rng)
        phrases = pools[params["phrase_pool"]]
        chosen = set()
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            phrase = _draw_distinct(phrases, chosen, rng)
            chosen.add(phrase)
            perturbed.append(f"{text} {phrase}")
        payload = DirCase(original=text, perturbed=tuple(perturbed),
                          delta=params["delta"])
        records[case_id] = {"label": record}
    elif recipe == "inv_typo_pair":
        (q1, q2), binding = _case_pair(fspec, pools, rng)
        token = binding.values[params["typo_key"]]
        perturbed = []
        while len(perturbed) < params.get("n_perturbed", 2):
            variant = (_replace_token(q1, token, transpose_typo(token, rng)), q2)
            if variant != (q1, q2) and variant not in perturbed:
                perturbed.append(variant)
        payload = InvCase(original=(q1, q2), perturbed=tuple(perturbed))
        records[case_id] = {"label": params.get("label_record"),
                            "perturbed_label": params.get("label_record")}
    elif recipe == "inv_filler_pair":
        (q1, q2), binding = _case_pair(fspec, pools, rng)
        fillers = pools[params["filler_pool"]]
        chosen = set()
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            filler = _draw_distinct(fillers, chosen, rng)
            chosen.add(filler)
            perturbed.append((f"{filler} {q1}", q2))
        payload = InvCase(original=(q1, q2), perturbed=tuple(perturbed))
        records[case_id] = {"label": params.get("label_record"),
                            "perturbed_label": params.get("label_record")}
    elif recipe == "inv_entity_pair":
        (q1, q2), binding = _case_pair(fspec, pools, rng)
        key = params["entity_key"]
        entity = binding.values[key]
        entities = pools[key]
        chosen = {entity}
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            other = _draw_distinct(entities, chosen, rng)
            chosen.add(other)
            perturbed.append((_replace_token(q1, entity, other),
                              _replace_token(q2, entity, other)))
        payload = InvCase(original=(q1, q2), perturbed=tuple(perturbed))
        records[case_id] = {"label": params.get("label_record"),
                            "perturbed_label": params.get("label_record")}
    elif recipe == "dir_label_pair":
        (q1, q2), binding = _case_pair(fspec, pools, rng)
        key = params["swap_key"]
        entity = binding.values[key]
        entities = pools[key]
        chosen = {entity}
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            other = _draw_distinct(entities, chosen, rng)
            chosen.add(other)
            perturbed.append((q1, _replace_token(q2, entity, other)))
        payload = DirCase(original=(q1, q2), perturbed=tuple(perturbed),
                          label=params["label"])
    elif recipe == "dir_pad_pair":
        (q1, q2), binding = _case_pair(fspec, pools, rng)
        pads = pools[params["pad_pool"]]
        chosen = set()
        perturbed = []
        for _ in range(params.get("n_perturbed", 2)):
            pad = _draw_distinct(pads, chosen, rng)
            chosen.add(pad)
            perturbed.append((q1, f"{q2} {pad}"))
        payload = DirCase(original=(q1, q2), perturbed=tuple(perturbed),
                          delta=params["delta"])
    else:
        raise InvalidInputError(f"unknown recipe {recipe!r}")
    return TestCase(id=case_id, payload=payload)


def generate_suite_with_records(spec: SuiteSpec, rng: np.random.Generator):
    """Generate a suite plus the per-case label records used by the
    metamorphic-guarantee checks."""
    spec.validate()
    records: dict = {}
    classes = []
    cases: dict = {}
    case_id = 0
    for cls_spec in spec.classes:
        funcs = []
        for fspec in cls_spec.functionalities:
            ids = []
            for _ in range(fspec.case_count):
                case = _generate_case(fspec, spec.pools, rng, case_id, records)
                cases[case_id] = case
                ids.append(case_id)
                case_id += 1
            funcs.append(Functionality(name=fspec.name, test_type=fspec.test_type,
                                       case_ids=tuple(ids)))
        classes.append(FunctionalityClass(name=cls_spec.name, functionalities=tuple(funcs)))
    suite = TestSuite(name=spec.name, classes=tuple(classes), cases=cases)
    report = validate_suite(suite)
    if not report.ok:
        raise InvalidInputError("generated suite is malformed: " + "; ".join(report.problems))
    return suite, records


def generate_suite(spec: SuiteSpec, rng: np.random.Generator) -> TestSuite:
    return generate_suite_with_records(spec, rng)[0]


def suite_metadata(spec: SuiteSpec) -> dict:
    """Planted structure worth auditing: contrastive pairs and spurious cues."""
    return {
        "contrastive_pairs": [list(pair) for pair in spec.contrastive_pairs],
        "planted_cues": [dict(cue) for cue in spec.planted_cues],
        "functionalities": {
            cls.name: [f.name for f in cls.functionalities] for cls in spec.classes
        },
    }


def masked_skeleton(template) -> str:
    """Template text with placeholders blanked, for contrastive-pair checks."""
    if isinstance(template, tuple):
        return " ||| ".join(_PLACEHOLDER.sub("{}", t) for t in template)
    return _PLACEHOLDER.sub("{}", template)


# ---------------------------------------------------------------------------
# the default experiment


IID_POS_WORDS = (
    "superb", "delightful", "wonderful", "brilliant", "stunning", "magnificent",
    "charming", "gripping", "masterful", "inspired", "heartfelt", "dazzling",
    "exquisite", "riveting", "flawless", "luminous", "memorable", "uplifting",
    "witty", "elegant", "refreshing", "vibrant", "poignant", "enchanting",
)
IID_NEG_WORDS = (
    "dreadful", "tedious", "awful", "clumsy", "bland", "lifeless",
    "shallow", "grating", "sloppy", "dismal", "forgettable", "incoherent",
    "stale", "wooden", "meandering", "hollow", "contrived", "irritating",
    "joyless", "absurd", "disjointed", "lazy", "tiresome", "painful",
)

_SENTIMENT_POOLS = {
    "obj": ("movie", "film", "plot", "acting", "script", "soundtrack",
            "ending", "cast", "dialogue", "story"),
    "objs": ("flight", "crew", "service", "boarding", "cabin", "landing",
             "meal", "luggage", "seat", "lounge"),
    "posa": ("excellent", "friendly", "smooth", "comfortable", "spotless",
             "punctual", "helpful", "pleasant", "impressive", "generous",
             "quick", "courteous", "relaxing", "reliable", "gracious", "seamless"),
    "negb": ("terrible", "rude", "bumpy", "cramped", "filthy", "delayed",
             "unhelpful", "miserable", "noisy", "chaotic", "slow", "hostile",
             "stressful", "broken", "careless", "crowded"),
    "neutralc": ("scheduled", "standard", "ordinary", "typical", "routine",
                 "regular", "average", "plain", "usual", "common", "expected",
                 "unremarkable"),
    "iid_pos": IID_POS_WORDS,
    "iid_neg": IID_NEG_WORDS,
    "intensifier": ("really", "very", "absolutely", "incredibly"),
    "reducer": ("somewhat", "slightly", "fairly", "mildly"),
    "filler": ("to be honest", "frankly speaking", "all things considered",
               "at the end of the day"),
    "praise_phrase": ("and the staff smiled warmly", "which made everyone cheerful",
                      "and the view was lovely", "leaving us quite pleased"),
}


def _sentiment_suite_spec(cases_per_functionality: int = 300) -> SuiteSpec:
    mft = TestType.MFT
    inv = TestType.INV
    dirt = TestType.DIR
    n = cases_per_functionality
    dir_mix = {"word_mix": [("posa", 0.8), ("negb", 0.2)],
               "labels_by_pool": {"posa": 1, "negb": 0}}
    classes = (
        ClassSpec("praise", (
            FunctionalitySpec("praise-adjective", mft, "mft", n, {
                "templates": ("the {objs} was {posa}", "our {objs} was {posa} today"),
                "label": LabelSpec.hard(1)}),
            FunctionalitySpec("praise-exclamation", mft, "mft", n, {
                "templates": ("what a {posa} {objs}", "quite a {posa} {objs} overall"),
                "label": LabelSpec.hard(1)}),
            FunctionalitySpec("praise-typo-robustness", inv, "inv_typo", n, {
                "templates": ("the {objs} was {posa}", "our {objs} was {posa} today"),
                "typo_key": "objs", "n_perturbed": 2, "label_record": 1}),
        )),
        ClassSpec("complaint", (
            FunctionalitySpec("complaint-adjective", mft, "mft", n, {
                "templates": ("the {objs} was {negb}", "our {objs} was {negb} today"),
                "label": LabelSpec.hard(0)}),
            FunctionalitySpec("complaint-exclamation", mft, "mft", n, {
                "templates": ("what a {negb} {objs}", "quite a {negb} {objs} overall"),
                "label": LabelSpec.hard(0)}),
            FunctionalitySpec("complaint-filler-robustness", inv, "inv_filler", n, {
                "templates": ("the {objs} was {negb}", "our {objs} was {negb} today"),
                "filler_pool": "filler", "n_perturbed": 2, "label_record": 0}),
        )),
        ClassSpec("negation", (
            FunctionalitySpec("negated-praise", mft, "mft", n, {
                "templates": ("the {objs} was not {iid_pos}",
                              "i felt the {objs} was not {iid_pos}"),
                "label": LabelSpec.hard(0)}),
            FunctionalitySpec("negated-complaint", mft, "mft", n, {
                "templates": ("the {objs} was not {iid_neg}",
                              "i felt the {objs} was not {iid_neg}"),
                "label": LabelSpec.not_negative()}),
            FunctionalitySpec("negated-neutral", mft, "mft", n, {
                "templates": ("the {objs} was not {neutralc}",),
                "label": LabelSpec.soft((0.5, 0.5))}),
        )),
        ClassSpec("intensity", (
            FunctionalitySpec("intensifier-confidence", dirt, "dir_insert", n, {
                "templates": ("the {objs} was {word}",),
                "modifier_pool": "intensifier", "n_perturbed": 2,
                "delta": DeltaKind.NOT_LESS_CONFIDENT, **dir_mix}),
            FunctionalitySpec("reducer-confidence", dirt, "dir_insert", n, {
                "templates": ("the {objs} was {word}",),
                "modifier_pool": "reducer", "n_perturbed": 2,
                "delta": DeltaKind.NOT_MORE_CONFIDENT, **dir_mix}),
            FunctionalitySpec("added-praise-direction", dirt, "dir_append", n, {
                "templates": ("the {objs} was {word}",),
                "phrase_pool": "praise_phrase", "n_perturbed": 2,
                "delta": DeltaKind.NOT_MORE_NEGATIVE, **dir_mix}),
        )),
    )
    return SuiteSpec(
        name="airline-sentiment-suite",
        task="single",
        pools=dict(_SENTIMENT_POOLS),
        classes=classes,
        contrastive_pairs=(),
        planted_cues=(
            {"feature": "iid sentiment lexicon reused under negation",
             "functionalities": ["negated-praise", "negated-complaint"]},
        ),
    )


def _sentiment_iid_spec(sample_count: int = 2400) -> IidSpec:
    return IidSpec(
        name="movie-sentiment",
        task="single",
        sample_count=sample_count,
        pools={"obj": _SENTIMENT_POOLS["obj"],
               "iid_pos": IID_POS_WORDS,
               "iid_neg": IID_NEG_WORDS},
        params={
            "templates": ("the {obj} was {word}", "i thought the {obj} was {word}",
                          "overall the {obj} felt {word}", "that {obj} seemed {word}"),
            "positive_pool": "iid_pos",
            "negative_pool": "iid_neg",
        },
        balance=0.5,
        noise_rate=0.02,
    )


_DUPLICATE_POOLS = {
    "person": ("natalie", "sophia", "matthew", "nicole", "oliver", "amelia",
               "lucas", "isabella", "ethan", "grace", "henry", "clara"),
    "sym_rel": ("dating", "married to", "friends with", "related to",
                "living with", "working with", "studying with", "teammates with"),
    "sym_rel_syn": ("seeing", "wed to", "pals with", "family with",
                    "sharing a home with", "colleagues with", "classmates with",
                    "playing alongside"),
    "asym_rel": ("taller than", "older than", "faster than", "stronger than",
                 "heavier than", "smarter than", "richer than", "younger than"),
    "cities": ("paris", "tokyo", "berlin", "cairo", "sydney", "lima",
               "oslo", "madrid", "rome", "dublin"),
    "city_verb": ("visit", "move to", "study in", "work in"),
    "padj": ("honest", "reliable", "patient", "cheerful", "organized",
             "punctual", "creative", "generous"),
    "padj_syn": ("truthful", "dependable", "calm", "upbeat", "tidy",
                 "prompt", "imaginative", "giving"),
    "hobby": ("kitesurfing", "calligraphy", "origami", "juggling",
              "beekeeping", "archery", "pottery", "skating"),
    "pair_filler": ("by the way", "just wondering", "quick question",
                    "out of curiosity"),
    "pad": ("thanks in advance", "please advise", "any help is appreciated",
            "asking for a friend"),
}


def _duplicate_suite_spec(cases_per_functionality: int = 300) -> SuiteSpec:
    mft = TestType.MFT
    inv = TestType.INV
    dirt = TestType.DIR
    n = cases_per_functionality
    classes = (
        ClassSpec("relations", (
            FunctionalitySpec("symmetric-order-swap", mft, "mft_pair", n, {
                "templates": (("is {person} {sym_rel} {person2}",
                               "is {person2} {sym_rel} {person}"),),
                "label": LabelSpec.hard(1)}),
            FunctionalitySpec("asymmetric-order-swap", mft, "mft_pair", n, {
                "templates": (("is {person} {asym_rel} {person2}",
                               "is {person2} {asym_rel} {person}"),),
                "label": LabelSpec.hard(0)}),
            FunctionalitySpec("relation-synonym-rewording", mft, "mft_pair", n, {
                "templates": (("is {person} {sym_rel} {person2}",
                               "is {person} {sym_rel_syn} {person2}"),),
                "label": LabelSpec.hard(1)}),
        )),
        ClassSpec("locations", (
            FunctionalitySpec("changed-location-not-duplicate", dirt, "dir_label_pair", n, {
                "templates": (("do people like to {city_verb} {cities}",
                               "is it nice to {city_verb} {cities}"),),
                "swap_key": "cities", "n_perturbed": 2, "label": LabelSpec.hard(0)}),
            FunctionalitySpec("same-location-rephrase", mft, "mft_pair", n, {
                "templates": (("do people like to {city_verb} {cities}",
                               "is it nice to {city_verb} {cities}"),),
                "label": LabelSpec.hard(1)}),
            FunctionalitySpec("location-entity-invariance", inv, "inv_entity_pair", n, {
                "templates": (("do people like to {city_verb} {cities}",
                               "is it nice to {city_verb} {cities}"),),
                "entity_key": "cities", "n_perturbed": 2, "label_record": 1}),
        )),
        ClassSpec("negation", (
            FunctionalitySpec("negated-question", mft, "mft_pair", n, {
                "templates": (("is {person} {padj}", "is {person} not {padj}"),),
                "label": LabelSpec.hard(0)}),
            FunctionalitySpec("negation-both-sides", mft, "mft_pair", n, {
                "templates": (("is {person} not {padj}",
                               "would you say {person} is not {padj}"),),
                "label": LabelSpec.hard(1)}),
            FunctionalitySpec("synonym-rewording", mft, "mft_pair", n, {
                "templates": (("is {person} {padj}", "is {person} {padj_syn}"),),
                "label": LabelSpec.hard(1)}),
        )),
        ClassSpec("robustness", (
            FunctionalitySpec("question-typo-invariance", inv, "inv_typo_pair", n, {
                "templates": (("how do i learn {hobby} quickly",
                               "what is the best way to learn {hobby}"),),
                "typo_key": "hobby", "n_perturbed": 2, "label_record": 1}),
            FunctionalitySpec("filler-phrase-invariance", inv, "inv_filler_pair", n, {
                "templates": (("how do i learn {hobby} quickly",
                               "what is the best way to learn {hobby}"),),
                "filler_pool": "pair_filler", "n_perturbed": 2, "label_record": 1}),
            FunctionalitySpec("padding-confidence", dirt, "dir_pad_pair", n, {
                "templates": (("how do i learn {hobby} quickly",
                               "what is the best way to learn {hobby}"),),
                "pad_pool": "pad", "n_perturbed": 2,
                "delta": DeltaKind.NOT_MORE_CONFIDENT}),
        )),
    )
    return SuiteSpec(
        name="question-duplicate-suite",
        task="pair",
        pools=dict(_DUPLICATE_POOLS),
        classes=classes,
        contrastive_pairs=(("symmetric-order-swap", "asymmetric-order-swap"),),
        planted_cues=(
            {"feature": "token 'than' marks non-duplicate reorder pairs in the "
                        "i.i.d. data", "token": "than", "label": 0},
        ),
    )


def _duplicate_iid_spec(sample_count: int = 2400) -> IidSpec:
    return IidSpec(
        name="question-duplicates",
        task="pair",
        sample_count=sample_count,
        pools={
            "subject": ("guitar", "python", "chess", "yoga", "baking", "spanish",
                        "photography", "investing", "gardening", "drawing",
                        "coding", "cooking"),
            "comparative": ("better", "cheaper", "healthier", "nicer"),
            "compare_item": ("coffee", "tea", "summer", "winter", "cats", "dogs",
                             "rain", "snow", "cities", "villages"),
        },
        params={
            "paraphrase_pairs": (
                ("how do i learn {subject} quickly", "what is the best way to learn {subject}"),
                ("how can i get better at {subject}", "what helps to improve at {subject}"),
                ("why is {subject} so popular", "what makes {subject} so popular"),
                ("is {subject} hard to master", "is it difficult to master {subject}"),
            ),
            "subject_pool": "subject",
            "negative_mix": (("unrelated", 0.4), ("minimal_edit", 0.3), ("reorder", 0.3)),
            "comparative_pool": "comparative",
            "compare_pool": "compare_item",
        },
        balance=0.5,
        noise_rate=0.02,
    )


def default_experiment_spec() -> dict:
    """The canonical two-task experiment: a sentiment analogue and a
    question-pair duplicate analogue, keyed by task name."""
    return {
        "sentiment": (_sentiment_iid_spec(), _sentiment_suite_spec()),
        "duplicate": (_duplicate_iid_spec(), _duplicate_suite_spec()),
    }


def default_task_spec(task: str):
    specs = default_experiment_spec()
    if task not in specs:
        raise InvalidInputError(f"unknown task {task!r}; expected one of {sorted(specs)}")
    return specs[task]
