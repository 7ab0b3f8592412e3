import numpy as np
import pytest
import torch

from flowseg_uda.errors import ShapeError
from flowseg_uda.gradcheck import check_gradients
from flowseg_uda.losses import confusion_loss, mask_loss
from flowseg_uda.model import (Decoder, Discriminator, Fusion, FusionMode, ModelConfig, SegmentationNet,
                               TwoStreamEncoder, canonical_parameters, checksum)

from helpers import grad_setup

DEFAULT = ModelConfig()


def test_stride_arithmetic():
    enc = TwoStreamEncoder(DEFAULT.widths)
    x_app, x_flow = enc(torch.zeros(1, 3, 384, 384), torch.zeros(1, 3, 384, 384))
    assert x_app.shape[-2:] == x_flow.shape[-2:] == (24, 24)
    with pytest.raises(ShapeError):
        enc(torch.zeros(1, 3, 100, 96), torch.zeros(1, 3, 100, 96))


def test_decoder_upsamples_to_input():
    de = Decoder(96, (96, 64, 32, 16))
    out = de(torch.randn(1, 96, 24, 24))
    assert out.shape == (1, 1, 384, 384)


@pytest.mark.parametrize("hw", [(384, 384), (97, 113), (480, 854)])
def test_resolution_closure(hw):
    model = SegmentationNet(ModelConfig(widths=(4, 4, 4, 4), disc_widths=(4, 4, 4))).eval()
    with torch.no_grad():
        out = model.segment(torch.rand(1, 3, *hw), torch.rand(1, 3, *hw))
    assert out.shape == (1, 1, *hw)
    assert torch.all((out > 0) & (out < 1))


def test_branch_isolation():
    model = SegmentationNet(ModelConfig(widths=(4, 4), disc_widths=(4, 4, 4))).double()
    image, flow = torch.rand(2, 3, 16, 16, dtype=torch.float64), torch.rand(2, 3, 16, 16, dtype=torch.float64)
    x_app, x_flow = model.encode(image, flow)
    x_app.sum().backward()
    assert all(p.grad is None or torch.all(p.grad == 0) for p in model.en_s.flow.parameters())
    model.zero_grad()
    _, x_flow = model.encode(image, flow)
    mask_loss(torch.ones(2, 1, 16, 16, dtype=torch.float64), model.decode_flow(x_flow)).backward()
    assert all(p.grad is None or torch.all(p.grad == 0) for p in model.en_s.app.parameters())
    assert any(p.grad is not None and torch.any(p.grad != 0) for p in model.en_s.flow.parameters())


def test_flow_weight_finite_difference():
    model = SegmentationNet(ModelConfig(widths=(4, 4), disc_widths=(4, 4, 4), init_seed=3)).double()
    image, flow = torch.rand(1, 3, 8, 8, dtype=torch.float64), torch.randn(1, 3, 8, 8, dtype=torch.float64)
    w = model.en_s.flow.stage1.conv.weight
    idx = (1, 2, 0, 1)

    def readout():
        return model.encode(image, flow)[1].sum()

    readout().backward()
    analytic = w.grad[idx].item()
    with torch.no_grad():
        orig = w[idx].item()
        w[idx] = orig + 1e-5
        up = readout().item()
        w[idx] = orig - 1e-5
        down = readout().item()
        w[idx] = orig
    numeric = (up - down) / 2e-5
    assert abs(analytic - numeric) <= 1e-3 * max(abs(analytic), abs(numeric))


@pytest.mark.parametrize("loss", ["L_S", "L_EnT", "L_D"])
def test_gradients_match_finite_differences(loss):
    model, losses = grad_setup(seed=11)
    report = check_gradients(model, losses[loss])
    assert report
    bad = [r for r in report if not r.ok(1e-3)]
    assert not bad, bad
    assert any(r.grad_norm > 0 for r in report)


def test_fusion_identities():
    x = torch.randn(2, 8, 6, 6)
    assert torch.equal(Fusion(FusionMode.ADDITION, 8, 8)(x, torch.zeros_like(x)), x)
    assert torch.equal(Fusion(FusionMode.PRODUCT, 8, 8)(x, torch.ones_like(x)), x)
    de = Decoder(8, (8, 8))
    for mode in FusionMode:
        out = Fusion(mode, 8, 8, 8)(x, torch.randn_like(x))
        assert out.shape == x.shape
        assert de(out).shape == (2, 1, 24, 24)
    with pytest.raises(ShapeError):
        Fusion(FusionMode.PRODUCT, 8, 4)


def test_flow_decoder_shares_no_parameters():
    model = SegmentationNet()
    assert not {id(p) for p in model.de.parameters()} & {id(p) for p in model.de_flow.parameters()}
    out = model.decode_flow(torch.randn(1, 96, 24, 24))
    assert out.shape == (1, 1, 384, 384)


def test_discriminator_range_and_batch():
    disc = Discriminator(8, (4, 4, 4))
    x = torch.randn(5, 8, 6, 6) * 100
    d = disc(x)
    assert d.shape == (5,)
    assert torch.all((d > 0) & (d < 1))
    assert torch.allclose(disc(x[2:3]), d[2:3])


def test_target_encoder_copy_semantics():
    model = SegmentationNet(ModelConfig(widths=(4, 4), disc_widths=(4, 4, 4)))
    en_t = model.init_target_encoder()
    image, flow = torch.rand(2, 3, 16, 16), torch.rand(2, 3, 16, 16)
    for a, b in zip(model.encode(image, flow, "s"), model.encode(image, flow, "t")):
        assert torch.equal(a, b)
    before = checksum(model.en_s)
    opt = torch.optim.SGD(en_t.parameters(), lr=0.1)
    confusion_loss(model.discriminate(model.features(image, flow, "t"))).backward()
    opt.step()
    assert checksum(model.en_s) == before
    assert any(not torch.equal(a, b) for a, b in zip(model.en_s.parameters(), en_t.parameters()))


def test_baseline_has_no_flow_modules():
    model = SegmentationNet(ModelConfig(widths=(4, 4), flow_branch=False, disc_widths=(4, 4, 4)))
    names = canonical_parameters(model)
    assert not any(n.startswith(("en_s.flow", "fuse", "de_flow")) for n in names)
    y, y_flow, _ = model(torch.rand(1, 3, 8, 8), None)
    assert y.shape == (1, 1, 8, 8) and y_flow is None


def test_canonical_names():
    names = canonical_parameters(SegmentationNet())
    assert "en_s.app.stage1.conv.w" in names
    assert "disc.conv2.b" in names
    assert all(n.rsplit(".", 1)[1] in ("w", "b") for n in names)


def test_init_is_seeded():
    a = SegmentationNet(ModelConfig(widths=(4,), disc_widths=(4, 4, 4), init_seed=1))
    b = SegmentationNet(ModelConfig(widths=(4,), disc_widths=(4, 4, 4), init_seed=1))
    c = SegmentationNet(ModelConfig(widths=(4,), disc_widths=(4, 4, 4), init_seed=2))
    assert checksum(a) == checksum(b) != checksum(c)


def test_fingerprint_tracks_architecture():
    assert ModelConfig().fingerprint() == ModelConfig(init_seed=9, flow_scale=1.0).fingerprint()
    assert ModelConfig().fingerprint() != ModelConfig(fusion="product").fingerprint()
