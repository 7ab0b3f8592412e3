import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowseg_uda.errors import EmptyInput, ShapeError
from flowseg_uda.metrics import FrameScore, binarize, f_measure, j_statistics, jaccard, sequence_decay


def brute_boundary(m):
    h, w = m.shape
    out = np.zeros_like(m, dtype=bool)
    for y, x in itertools.product(range(h), range(w)):
        if not m[y, x]:
            continue
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            yy, xx = y + dy, x + dx
            if not (0 <= yy < h and 0 <= xx < w) or not m[yy, xx]:
                out[y, x] = True
    return out


def brute_f(pred, gt, r):
    """O(B^2) boundary matching by explicit pairwise distances."""
    bp = list(zip(*np.nonzero(brute_boundary(pred))))
    bg = list(zip(*np.nonzero(brute_boundary(gt))))
    if not bp and not bg:
        return 1.0
    if not bp or not bg:
        return 0.0

    def matched(src, dst):
        return sum(any(math.hypot(a - c, b - d) <= r for c, d in dst) for a, b in src)

    p = matched(bp, bg) / len(bp)
    rc = matched(bg, bp) / len(bg)
    return 0.0 if p + rc == 0 else 2 * p * rc / (p + rc)


def test_binarize():
    assert not binarize(np.full((3, 3), 0.4)).any()
    assert binarize(np.array([0.49, 0.51])).tolist() == [0, 1]
    b = np.array([[0, 1], [1, 0]])
    assert np.array_equal(binarize(binarize(b)), binarize(b))
    assert binarize(np.array([0.5])).tolist() == [0]


def test_jaccard_examples():
    gt = np.array([[1, 0], [1, 0]])
    pred = np.array([[1, 1], [0, 0]])
    assert jaccard(pred, gt) == 1 / 3
    assert jaccard(gt, gt) == 1.0
    assert jaccard(np.array([[1, 0]]), np.array([[0, 1]])) == 0.0
    assert jaccard(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
    with pytest.raises(ShapeError):
        jaccard(np.zeros((2, 2)), np.zeros((2, 3)))


def test_f_examples():
    gt = np.zeros((16, 16), bool)
    gt[3:13, 3:13] = True
    assert f_measure(gt, gt, 1) == 1.0
    assert f_measure(np.zeros_like(gt), gt, 1) == 0.0
    assert f_measure(np.zeros_like(gt), np.zeros_like(gt), 1) == 1.0
    shifted = np.roll(gt, 1, axis=1)
    expected = brute_f(shifted, gt, 1)
    assert abs(f_measure(shifted, gt, 1) - expected) < 1e-9
    assert expected == 1.0  # one-pixel shift is inside the tolerance
    far = np.roll(gt, 3, axis=1)
    assert abs(f_measure(far, gt, 1) - brute_f(far, gt, 1)) < 1e-9
    assert f_measure(far, gt, 1) < 1.0


masks = st.integers(1, 16).flatmap(
    lambda h: st.integers(1, 16).flatmap(
        lambda w: st.tuples(arrays(bool, (h, w)), arrays(bool, (h, w)), st.sampled_from([0, 1, 1.5, 2, 3]))
    )
)


@settings(max_examples=150, deadline=None)
@given(masks)
def test_f_matches_brute_force(case):
    pred, gt, r = case
    assert abs(f_measure(pred, gt, r) - brute_f(pred, gt, r)) < 1e-9


@settings(max_examples=100, deadline=None)
@given(masks, st.integers(0, 3), st.integers(0, 3))
def test_symmetry_translation_flip(case, dy, dx):
    pred, gt, r = case
    assert jaccard(pred, gt) == jaccard(gt, pred)
    assert f_measure(pred, gt, r) == f_measure(gt, pred, r)
    # translate both inside a padded canvas (no clipping), and mirror both
    h, w = pred.shape
    P = np.zeros((h + 6, w + 6), bool)
    G = np.zeros_like(P)
    P[dy:dy + h, dx:dx + w], G[dy:dy + h, dx:dx + w] = pred, gt
    P0 = np.zeros_like(P)
    G0 = np.zeros_like(P)
    P0[3:3 + h, 3:3 + w], G0[3:3 + h, 3:3 + w] = pred, gt
    assert jaccard(P, G) == jaccard(P0, G0)
    assert abs(f_measure(P, G, r) - f_measure(P0, G0, r)) < 1e-12
    assert jaccard(pred[:, ::-1], gt[:, ::-1]) == jaccard(pred, gt)
    assert abs(f_measure(pred[:, ::-1], gt[:, ::-1], r) - f_measure(pred, gt, r)) < 1e-12


def _frames(seq, scores):
    return [FrameScore(seq, i + 1, s, s) for i, s in enumerate(scores)]


def test_j_statistics_examples():
    assert j_statistics(_frames("a", [1.0] * 6)) == (1.0, 1.0, 0.0)
    mean, recall, decay = j_statistics(_frames("a", [1.0, 1.0, 0.8, 0.8, 0.6, 0.6, 0.4, 0.4]))
    assert abs(mean - 0.7) < 1e-12
    assert recall == 0.75
    assert abs(decay - 0.6) < 1e-12
    assert j_statistics(_frames("a", [0.3] * 9))[2] == 0.0
    with pytest.raises(EmptyInput):
        j_statistics([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1), min_size=1, max_size=12), min_size=1, max_size=5), st.randoms())
def test_aggregation_invariances(seqs, rnd):
    frames = [fs for k, s in enumerate(seqs) for fs in _frames(f"s{k}", s)]
    shuffled = frames[:]
    rnd.shuffle(shuffled)
    assert j_statistics(frames) == j_statistics(shuffled)
    for s in seqs:
        assert sequence_decay(s[::-1]) == -sequence_decay(s)
    means = [np.mean(s) for s in seqs]
    assert abs(j_statistics(frames)[0] - np.mean(means)) < 1e-12
