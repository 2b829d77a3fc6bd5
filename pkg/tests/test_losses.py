"""Behaviour losses: frozen hand-computed values, analytic gradients against
central finite differences, batching, and token alignment."""

import math

import numpy as np
import pytest

from behavgen.errors import DegenerateInputError, InvalidInputError
from behavgen.losses import (
    AlignmentMap,
    BatchKind,
    common_ground_alignment,
    dir_loss,
    dir_loss_from_logits,
    entropy,
    inv_loss,
    inv_loss_from_logits,
    make_batches,
    mft_loss,
    mft_loss_from_logits,
    softmax,
    span_inv_loss,
    span_inv_loss_from_logits,
)
from behavgen.suite import DeltaKind, DirCase, InvCase, LabelSpec, MftCase, TestCase

ALL_KINDS = list(DeltaKind)


def rel_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)


def fd_grad(fn, logits, step=1e-5):
    """Central finite differences of a scalar function of the logits."""
    z = np.asarray(logits, dtype=float)
    grad = np.zeros_like(z)
    for i in range(z.size):
        up = z.copy()
        up[i] += step
        down = z.copy()
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2 * step)
    return grad


def random_probs(rng, size=2):
    v = rng.random(size) + 1e-3
    return v / v.sum()


# ---------------------------------------------------------------------------
# loss values


def test_mft_loss_hard_uniform():
    assert mft_loss([0.5, 0.5], LabelSpec.hard(1)) == pytest.approx(math.log(2), abs=1e-9)


def test_mft_loss_not_negative_target():
    # -(1/3 ln 1/3 + 2/3 ln 2/3), the entropy of the [1/3, 2/3] target
    assert mft_loss([1 / 3, 2 / 3], LabelSpec.not_negative()) == pytest.approx(0.6365, abs=1e-4)


def test_mft_loss_one_hot_correct_is_clamped_zero():
    assert mft_loss([0.0, 1.0], LabelSpec.hard(1)) <= 1e-11


def test_inv_loss_fixed_points():
    assert inv_loss([1.0, 0.0], [1.0, 0.0]) <= 1e-11
    assert inv_loss([0.5, 0.5], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-9)


def test_inv_loss_hand_computed():
    # -(0.9 ln 0.6 + 0.1 ln 0.4)
    assert inv_loss([0.9, 0.1], [0.6, 0.4]) == pytest.approx(0.5514, abs=1e-4)


def test_inv_loss_gibbs_inequality():
    rng = np.random.default_rng(5)
    for _ in range(300):
        size = int(rng.integers(2, 5))
        y0 = random_probs(rng, size)
        yi = random_probs(rng, size)
        assert inv_loss(y0, yi) >= entropy(y0) - 1e-9
    y = random_probs(rng, 3)
    assert inv_loss(y, y) == pytest.approx(entropy(y), abs=1e-9)


def test_dir_loss_examples():
    for kind in ALL_KINDS:
        assert dir_loss([0.3, 0.7], [0.3, 0.7], kind) == 0.0
    assert dir_loss([0.3, 0.7], [0.2, 0.8], DeltaKind.NOT_MORE_CONFIDENT) == pytest.approx(
        0.1054, abs=1e-4)
    # epsilon 0.4: confidence dropped 0.7 -> 0.3 under "not less confident"
    assert dir_loss([0.3, 0.7], [0.7, 0.3], DeltaKind.NOT_LESS_CONFIDENT) == pytest.approx(
        0.5108, abs=1e-4)


def test_dir_loss_zero_iff_test_passes():
    from behavgen.suite import delta

    rng = np.random.default_rng(9)
    for _ in range(400):
        y0 = random_probs(rng)
        yi = random_probs(rng)
        for kind in ALL_KINDS:
            loss = dir_loss(y0, yi, kind)
            assert loss >= 0.0
            assert (loss == 0.0) == delta(kind, y0, yi)


def test_all_losses_non_negative():
    rng = np.random.default_rng(13)
    for _ in range(200):
        y0 = random_probs(rng)
        yi = random_probs(rng)
        assert mft_loss(yi, LabelSpec.hard(0)) >= 0.0
        assert inv_loss(y0, yi) >= 0.0
        for kind in ALL_KINDS:
            assert dir_loss(y0, yi, kind) >= 0.0


# ---------------------------------------------------------------------------
# analytic gradients vs central finite differences


def test_mft_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    for _ in range(40):
        size = int(rng.integers(2, 5))
        z = rng.normal(0, 2, size)
        targets = [LabelSpec.hard(int(rng.integers(size)))]
        if size == 2:
            targets += [LabelSpec.soft((0.5, 0.5)), LabelSpec.not_negative()]
        for spec in targets:
            _, grad = mft_loss_from_logits(z, spec)
            fd = fd_grad(lambda zz: mft_loss_from_logits(zz, spec)[0], z)
            assert rel_error(grad, fd).max() < 1e-4


def test_inv_gradient_matches_finite_differences():
    rng = np.random.default_rng(22)
    for _ in range(40):
        size = int(rng.integers(2, 5))
        y0 = random_probs(rng, size)
        z = rng.normal(0, 2, size)
        _, grad = inv_loss_from_logits(y0, z)
        fd = fd_grad(lambda zz: inv_loss_from_logits(y0, zz)[0], z)
        assert rel_error(grad, fd).max() < 1e-4


def test_dir_gradient_matches_finite_differences():
    rng = np.random.default_rng(23)
    checked = 0
    while checked < 60:
        y0 = random_probs(rng)
        z = rng.normal(0, 1.5, 2)
        kind = ALL_KINDS[int(rng.integers(len(ALL_KINDS)))]
        probs = softmax(z)
        from behavgen.suite import epsilon

        # keep clear of the hinge so finite differences are well-defined
        if abs(epsilon(kind, y0, probs)) < 1e-3 and not np.allclose(probs, y0):
            continue
        loss, grad = dir_loss_from_logits(y0, z, kind)
        fd = fd_grad(lambda zz: dir_loss_from_logits(y0, zz, kind)[0], z)
        assert rel_error(grad, fd).max() < 1e-4
        checked += 1


def test_dir_gradient_zero_when_test_passes():
    _, grad = dir_loss_from_logits([0.3, 0.7], [0.0, 2.0], DeltaKind.NOT_LESS_CONFIDENT)
    assert np.all(grad == 0.0)


# ---------------------------------------------------------------------------
# common-ground alignment


def test_alignment_travel_example():
    orig = "Paul travelled from Chicago to New York".split()
    pert = "Paul travelled from Los Angeles to New York".split()
    amap = common_ground_alignment(orig, pert)
    assert amap.pairs == ((0, 0), (1, 1), (2, 2), (4, 5), (5, 6), (6, 7))


def test_alignment_identity():
    tokens = "a b c d".split()
    amap = common_ground_alignment(tokens, tokens)
    assert amap.pairs == tuple((i, i) for i in range(4))


def test_alignment_disjoint_vocabulary():
    assert common_ground_alignment(["a", "b"], ["c", "d"]).pairs == ()


def test_alignment_prefers_earliest_indices():
    assert common_ground_alignment(["a"], ["x", "a", "y", "a"]).pairs == ((0, 1),)
    assert common_ground_alignment(["a", "a"], ["a"]).pairs == ((0, 0),)
    assert common_ground_alignment(["a", "b"], ["b", "a"]).pairs == ((0, 1),)


def test_alignment_is_strictly_increasing_and_length_matches_dp():
    rng = np.random.default_rng(31)
    alphabet = list("abcde")
    for _ in range(100):
        orig = [alphabet[i] for i in rng.integers(0, 5, size=rng.integers(1, 10))]
        pert = [alphabet[i] for i in rng.integers(0, 5, size=rng.integers(1, 10))]
        amap = common_ground_alignment(orig, pert)
        for (i1, j1), (i2, j2) in zip(amap.pairs, amap.pairs[1:]):
            assert i1 < i2 and j1 < j2
        for i, j in amap.pairs:
            assert orig[i] == pert[j]
        # classic DP table as an independent length oracle
        n, m = len(orig), len(pert)
        table = [[0] * (m + 1) for _ in range(n + 1)]
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                if orig[i - 1] == pert[j - 1]:
                    table[i][j] = table[i - 1][j - 1] + 1
                else:
                    table[i][j] = max(table[i - 1][j], table[i][j - 1])
        assert len(amap.pairs) == table[n][m]


# ---------------------------------------------------------------------------
# span-invariance loss


def test_span_loss_identical_is_twice_restricted_entropy():
    dist = np.array([0.6, 0.3, 0.1])
    amap = AlignmentMap(((0, 0), (1, 1), (2, 2)))
    loss = span_inv_loss(dist, dist, dist, dist, amap)
    assert loss == pytest.approx(2 * entropy(dist), abs=1e-9)


def test_span_loss_point_mass_on_aligned_token():
    orig = np.array([1.0, 0.0, 0.0])
    pert = np.array([0.0, 1.0, 0.0])
    amap = AlignmentMap(((0, 1),))
    assert span_inv_loss(orig, orig, pert, pert, amap) <= 1e-9


def test_span_loss_hand_computed():
    # restricted start [0.9, 0.1] vs [0.6, 0.4]; end terms identical point masses
    orig_start = np.array([0.45, 0.05, 0.5])
    pert_start = np.array([0.3, 0.2, 0.5])
    orig_end = np.array([0.5, 0.0, 0.5])
    pert_end = np.array([0.5, 0.0, 0.5])
    amap = AlignmentMap(((0, 0), (1, 1)))
    loss = span_inv_loss(orig_start, orig_end, pert_start, pert_end, amap)
    assert loss == pytest.approx(0.5514, abs=1e-4)


def test_span_loss_empty_map_errors():
    with pytest.raises(DegenerateInputError):
        span_inv_loss([1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], AlignmentMap(()))


def test_span_gradient_matches_finite_differences():
    rng = np.random.default_rng(41)
    for _ in range(30):
        n = int(rng.integers(3, 7))
        m = int(rng.integers(3, 7))
        k = int(rng.integers(2, min(n, m) + 1))
        o_idx = np.sort(rng.choice(n, size=k, replace=False))
        p_idx = np.sort(rng.choice(m, size=k, replace=False))
        amap = AlignmentMap(tuple(zip(map(int, o_idx), map(int, p_idx))))
        orig_start = random_probs(rng, n)
        orig_end = random_probs(rng, n)
        zs = rng.normal(0, 1.5, m)
        ze = rng.normal(0, 1.5, m)
        _, grad_s, grad_e = span_inv_loss_from_logits(orig_start, orig_end, zs, ze, amap)
        fd_s = fd_grad(lambda z: span_inv_loss_from_logits(orig_start, orig_end, z, ze, amap)[0], zs)
        fd_e = fd_grad(lambda z: span_inv_loss_from_logits(orig_start, orig_end, zs, z, amap)[0], ze)
        assert rel_error(grad_s, fd_s).max() < 1e-4
        assert rel_error(grad_e, fd_e).max() < 1e-4


# ---------------------------------------------------------------------------
# batching


def mft_cases(count, start=0):
    return [TestCase(start + i, MftCase(f"text {i}", LabelSpec.hard(i % 2)))
            for i in range(count)]


def test_batch_sizes():
    batches = make_batches(mft_cases(10), 4, np.random.default_rng(0))
    assert sorted(len(b) for b in batches) == [2, 4, 4]


def test_batches_partition_the_input():
    cases = mft_cases(7)
    cases.append(TestCase(100, InvCase("orig", ("p1", "p2", "p3"))))
    cases.append(TestCase(101, DirCase("orig", ("p1", "p2"),
                                       delta=DeltaKind.NOT_MORE_CONFIDENT)))
    cases.append(TestCase(102, DirCase("orig", ("pa", "pb"), label=LabelSpec.hard(0))))
    batches = make_batches(cases, 3, np.random.default_rng(1))
    seen = {}
    for batch in batches:
        assert len({type(i) for i in batch.items}) == 1
        for item in batch.items:
            seen[item.case_id] = seen.get(item.case_id, 0) + 1
    expected = {c.id: 1 for c in cases}
    expected[102] = 2  # label-form DIR expands into one item per perturbation
    assert seen == expected


def test_batches_deterministic_per_seed():
    cases = mft_cases(20)
    a = make_batches(cases, 4, np.random.default_rng(7))
    b = make_batches(cases, 4, np.random.default_rng(7))
    assert a == b
    c = make_batches(cases, 4, np.random.default_rng(8))
    assert a != c


def test_perturbed_version_sampling_is_uniform():
    case = TestCase(0, InvCase("orig", ("p0", "p1", "p2")))
    rng = np.random.default_rng(12345)
    counts = np.zeros(3)
    epochs = 3000
    for _ in range(epochs):
        (batch,) = make_batches([case], 1, rng)
        counts[batch.items[0].chosen] += 1
    expected = epochs / 3
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # chi-square critical value at p = 0.01 with 2 degrees of freedom
    assert chi2 < 9.21


def test_make_batches_validates_inputs():
    with pytest.raises(InvalidInputError):
        make_batches([], 4, np.random.default_rng(0))
    with pytest.raises(InvalidInputError):
        make_batches(mft_cases(3), 0, np.random.default_rng(0))


def test_dir_label_batches_are_mft_style():
    case = TestCase(0, DirCase(("a", "b"), (("a", "c"), ("a", "d")), label=LabelSpec.hard(0)))
    (batch,) = make_batches([case], 4, np.random.default_rng(0))
    assert batch.kind is BatchKind.DIR_LABEL
    assert {item.x for item in batch.items} == {("a", "c"), ("a", "d")}
