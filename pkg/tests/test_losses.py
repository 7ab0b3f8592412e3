import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from flowseg_uda.errors import ShapeError
from flowseg_uda.losses import (LossWeights, confusion_loss, discriminator_loss, mask_loss, shared_loss,
                                supervised_loss, uda_loss)

EPS = 1e-6


def t(x):
    return torch.tensor(x, dtype=torch.float64)


def test_bce_hand_example():
    y = t([[1.0, 0.0], [0.0, 1.0]])
    p = t([[0.9, 0.2], [0.4, 0.6]])
    expected = -(math.log(0.9) + math.log(0.8) + math.log(0.6) + math.log(0.6)) / 4
    assert abs(expected - 0.33754) < 1e-5
    assert abs(float(mask_loss(y, p)) - expected) < 1e-12


def test_bce_perfect_and_uncertain():
    y = t([[1.0, 0.0], [0.0, 1.0]])
    assert abs(float(mask_loss(y, y)) + math.log(1 - EPS)) < 1e-12
    for labels in (y, 1 - y, torch.zeros(2, 2, dtype=torch.float64)):
        assert abs(float(mask_loss(labels, torch.full((2, 2), 0.5, dtype=torch.float64))) - math.log(2)) < 1e-12


def test_bce_shape_mismatch():
    with pytest.raises(ShapeError):
        mask_loss(torch.zeros(2, 2), torch.zeros(2, 3))


def test_supervised_weighting():
    y = torch.zeros(1, 1, dtype=torch.float64)
    # BCE(y=0, p) = -log(1-p); choose p so the components are 0.4 and 0.6
    p_main, p_flow = 1 - math.exp(-0.4), 1 - math.exp(-0.6)
    out = supervised_loss(y, t([[p_main]]), t([[p_flow]]), LossWeights(alpha1=0.5, alpha2=0.5))
    assert abs(float(out) - 0.5) < 1e-12


def test_flow_weight_zero_reduces_to_main(rng):
    y = torch.from_numpy((rng.random((4, 4)) > 0.5).astype(np.float64))
    a = torch.from_numpy(rng.uniform(0.01, 0.99, (4, 4)))
    b = torch.from_numpy(rng.uniform(0.01, 0.99, (4, 4))).requires_grad_()
    w = LossWeights(alpha1=0.7, alpha2=0.0)
    out = supervised_loss(y, a, b, w)
    assert out.item() == (0.7 * mask_loss(y, a)).item()
    out.backward()
    assert torch.all(b.grad == 0)
    b.grad = None
    supervised_loss(y, a, b, LossWeights(alpha2=0.5)).backward()
    assert torch.any(b.grad != 0)


def test_adversarial_examples():
    assert abs(float(confusion_loss(t([1 - EPS]))) - 1e-6) < 1e-9
    assert abs(float(confusion_loss(t([0.5]))) - math.log(2)) < 1e-12
    assert abs(float(confusion_loss(t([0.1]))) - 2.302585092994046) < 1e-12
    assert float(discriminator_loss(t([1 - EPS]), t([EPS]))) < 3e-6
    assert abs(float(discriminator_loss(t([0.5]), t([0.5]))) - 2 * math.log(2)) < 1e-12
    assert abs(float(discriminator_loss(t([0.8]), t([0.3]))) - (-math.log(0.8) - math.log(0.7))) < 1e-12
    assert abs(-math.log(0.8) - math.log(0.7) - 0.5798) < 1e-4


def test_combined_losses():
    w = LossWeights(beta1=1.0, beta2=0.5)
    assert abs(uda_loss(0.6931, 1.3863, w) - 1.3863) < 1e-4
    assert uda_loss(0.6931, 1.3863, LossWeights(beta2=0.0)) == 0.6931
    assert uda_loss(0.0, 0.0, w) == 0.0
    assert shared_loss(1.0, 2.0, 2.0, LossWeights(lambda1=1.0, lambda2=0.5)) == 4.0
    assert shared_loss(0.3, 2.0, 2.0, LossWeights(lambda1=0.0, lambda2=0.0)) == 0.3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=3, max_size=3), st.integers(0, 2), st.floats(0, 5),
       st.floats(0, 2), st.floats(0, 2))
def test_shared_loss_monotone(args, which, bump, l1, l2):
    w = LossWeights(lambda1=l1, lambda2=l2)
    bumped = list(args)
    bumped[which] += bump
    assert shared_loss(*bumped, w) >= shared_loss(*args, w)


def test_adversarial_gradient_signs(rng):
    d = torch.from_numpy(rng.uniform(0.05, 0.95, 16)).requires_grad_()
    confusion_loss(d).backward()
    assert torch.all(d.grad < 0)
    d_t = torch.from_numpy(rng.uniform(0.05, 0.95, 16)).requires_grad_()
    discriminator_loss(torch.full((16,), 0.5, dtype=torch.float64), d_t).backward()
    assert torch.all(d_t.grad > 0)


def test_label_flip_identity(rng):
    x = torch.from_numpy(rng.uniform(0.01, 0.99, 8))
    ones = torch.ones(8, dtype=torch.float64) * (1 - EPS)
    # with a perfectly confident "not target" term removed, L_D's source term is the confusion loss
    assert abs(float(discriminator_loss(x, 1 - ones)) - float(confusion_loss(x)) - (-math.log(1 - EPS))) < 1e-12


def test_single_pixel_perturbation_increases_bce(rng):
    y = torch.from_numpy((rng.random((4, 4)) > 0.5).astype(np.float64))
    base = float(mask_loss(y, y))
    for i in range(4):
        for j in range(4):
            p = y.clone()
            p[i, j] = 0.5
            assert float(mask_loss(y, p)) > base


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_losses_finite_nonnegative(seed):
    r = np.random.default_rng(seed)
    p = torch.from_numpy(r.choice([0.0, 1.0, 0.5, 1e-12, 1 - 1e-12], (4, 4)))
    y = torch.from_numpy((r.random((4, 4)) > 0.5).astype(np.float64))
    for v in (mask_loss(y, p), confusion_loss(p), discriminator_loss(p, p.flip(0))):
        assert math.isfinite(float(v)) and float(v) >= 0


def _loop_clamp(p):
    return min(max(p, EPS), 1 - EPS)


def loop_bce(y, p):
    total, n = 0.0, 0
    for i in range(len(y)):
        for j in range(len(y[0])):
            q = _loop_clamp(p[i][j])
            total += -(y[i][j] * math.log(q) + (1 - y[i][j]) * math.log(1 - q))
            n += 1
    return total / n


def loop_neg_log(values):
    total = 0.0
    for v in values:
        total += -math.log(_loop_clamp(v))
    return total / len(values)


def loop_oracles(r):
    """Draw one random 4x4 instance; return (library value, scalar-loop value) pairs."""
    y = (r.random((4, 4)) > 0.5).astype(np.float64)
    p1, p2, ds, dt = (r.uniform(0, 1, (4, 4)) for _ in range(4))
    a1, a2, b1, b2, l1, l2 = r.uniform(0, 2, 6)
    w = LossWeights(alpha1=a1, alpha2=a2, beta1=b1, beta2=b2, lambda1=l1, lambda2=l2)
    Y, P1, P2 = y.tolist(), p1.tolist(), p2.tolist()
    ds_flat, dt_flat = ds.ravel().tolist(), dt.ravel().tolist()
    l_ent = loop_neg_log(dt_flat)
    l_d = loop_neg_log(ds_flat) + loop_neg_log([1 - v for v in dt_flat])
    l_s = a1 * loop_bce(Y, P1) + a2 * loop_bce(Y, P2)
    T = torch.from_numpy
    return [
        (float(mask_loss(T(y), T(p1))), loop_bce(Y, P1)),
        (float(supervised_loss(T(y), T(p1), T(p2), w)), l_s),
        (float(confusion_loss(T(dt))), l_ent),
        (float(discriminator_loss(T(ds), T(dt))), l_d),
        (float(uda_loss(confusion_loss(T(dt)), discriminator_loss(T(ds), T(dt)), w)), b1 * l_ent + b2 * l_d),
        (float(shared_loss(supervised_loss(T(y), T(p1), T(p2), w), confusion_loss(T(dt)),
                           discriminator_loss(T(ds), T(dt)), w)), l_s + l1 * l_ent + l2 * l_d),
    ]


def test_straight_loop_oracle_200_instances():
    r = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(200):
        for got, want in loop_oracles(r):
            worst = max(worst, abs(got - want))
    assert worst < 1e-6
