import numpy as np
import pytest

from flowseg_uda.data import (AugmentParams, FrameSample, apply_augmentation, augment,
                              pad_flow_channels, sample_augmentation)
from flowseg_uda.errors import CropTooLarge
from test_synthetic import bilinear


def _sample(h, w, rng, labeled=True):
    mask = (rng.random((h, w, 1)) > 0.5).astype(np.float32) if labeled else None
    return FrameSample(rng.random((h, w, 3), dtype=np.float32), rng.normal(size=(h, w, 2)).astype(np.float32),
                       mask, "s", 1)


def test_paper_crop_size(rng):
    out = augment(_sample(480, 854, rng), 384, rng)
    assert out.image.shape == (384, 384, 3)
    assert out.flow.shape == (384, 384, 2)
    assert out.mask.shape == (384, 384, 1)


def test_crop_too_large(rng):
    with pytest.raises(CropTooLarge):
        augment(_sample(20, 30, rng), 21, rng)


def test_same_window_and_flip_everywhere(rng):
    s = _sample(20, 30, rng)
    p = sample_augmentation(s.shape, 10, rng, flip_prob=1.0, jitter=False)
    out = apply_augmentation(s, p)
    win = (slice(p.top, p.top + 10), slice(p.left, p.left + 10))
    np.testing.assert_array_equal(out.image, s.image[win][:, ::-1])
    np.testing.assert_array_equal(out.mask, s.mask[win][:, ::-1])
    np.testing.assert_array_equal(out.flow[..., 0], -s.flow[win][:, ::-1, 0])
    np.testing.assert_array_equal(out.flow[..., 1], s.flow[win][:, ::-1, 1])


def test_flip_twice_is_identity(rng):
    s = _sample(12, 12, rng)
    p = AugmentParams(0, 0, 12, True)
    twice = apply_augmentation(apply_augmentation(s, p), p)
    for a, b in ((twice.image, s.image), (twice.flow, s.flow), (twice.mask, s.mask)):
        assert a.tobytes() == b.tobytes()


def test_jitter_touches_image_only(rng):
    s = _sample(12, 12, rng)
    p = AugmentParams(0, 0, 12, False, np.full(3, 1.2, np.float32), np.full(3, -0.05, np.float32))
    out = apply_augmentation(s, p)
    assert not np.array_equal(out.image, s.image)
    assert out.image.min() >= 0 and out.image.max() <= 1
    np.testing.assert_array_equal(out.flow, s.flow)
    np.testing.assert_array_equal(out.mask, s.mask)


def test_unlabeled_sample_passes_through(rng):
    out = augment(_sample(12, 12, rng, labeled=False), 8, rng)
    assert not out.has_label


def test_flipped_pair_warps_as_well_as_original():
    from flowseg_uda.data import Motion, SyntheticSpec, render_sequence

    seq = render_sequence(SyntheticSpec(height=48, width=48, motions=(Motion((1.5, 0.75)),),
                                        length=2, seed=4, object_size=(7, 9)))
    ys, xs = np.mgrid[0:48, 0:48].astype(np.float64)
    prev, cur, flow = seq.images[0], seq.images[1], seq.flows[1]

    def residual(prev, cur, flow):
        return np.abs(bilinear(cur, xs + flow[..., 0], ys + flow[..., 1]) - prev).mean()

    sample = FrameSample(cur, flow, seq.masks[1], "s", 1)
    p = AugmentParams(0, 0, 48, True)
    flipped = apply_augmentation(sample, p)
    prev_flipped = prev[:, ::-1]
    r0 = residual(prev, cur, flow)
    r1 = residual(prev_flipped, flipped.image, flipped.flow)
    wrong = flipped.flow * np.array([-1, 1], np.float32)  # mirrored but u not negated
    r_wrong = residual(prev_flipped, flipped.image, wrong)
    assert abs(r1 - r0) < 1e-6
    assert r_wrong > 2 * r0


def test_pad_flow_channels():
    z = pad_flow_channels(np.zeros((2, 3, 2), np.float32))
    assert z.shape == (2, 3, 3)
    assert np.all(z.reshape(-1, 3) == [0, 0, 1])
    f = np.random.default_rng(0).normal(size=(384, 384, 2)).astype(np.float32)
    out = pad_flow_channels(f)
    assert out.shape == (384, 384, 3)
    assert out[..., :2].tobytes() == f.tobytes()
    assert np.all(out[..., 2] == 1)
