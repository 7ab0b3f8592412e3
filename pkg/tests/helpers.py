"""Shared builders for the test modules."""
import torch

from flowseg_uda.losses import confusion_loss, discriminator_loss, supervised_loss
from flowseg_uda.model import ModelConfig, SegmentationNet

GRAD_CONFIG = ModelConfig(widths=(3, 4), disc_widths=(3, 3, 3), flow_scale=2.0, init_seed=5)


def grad_setup(seed=0, size=8, n=2, config=GRAD_CONFIG):
    """Double-precision tiny model with a perturbed target encoder and random inputs."""
    g = torch.Generator().manual_seed(seed)
    model = SegmentationNet(config).double()
    model.init_target_encoder()
    with torch.no_grad():
        for p in model.en_t.parameters():
            p.add_(0.05 * torch.randn(p.shape, generator=g, dtype=p.dtype))
        # nonzero biases so every unit sits away from its ReLU kink on average
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.copy_(0.1 * torch.randn(p.shape, generator=g, dtype=p.dtype))

    def batch():
        image = torch.rand(n, 3, size, size, generator=g, dtype=torch.float64)
        flow = torch.randn(n, 3, size, size, generator=g, dtype=torch.float64)
        return image, flow

    src, tgt = batch(), batch()
    mask = (torch.rand(n, 1, size, size, generator=g) > 0.5).double()

    def l_s():
        y, y_flow, _ = model(*src)
        return supervised_loss(mask, y, y_flow)

    def l_ent():
        return confusion_loss(model.discriminate(model.features(*tgt, which="t")))

    def l_d():
        return discriminator_loss(model.discriminate(model.features(*src)),
                                  model.discriminate(model.features(*tgt, which="t")))

    return model, {"L_S": l_s, "L_EnT": l_ent, "L_D": l_d}
