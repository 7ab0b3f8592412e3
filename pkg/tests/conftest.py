import numpy as np
import pytest
import torch

from flowseg_uda.data import SyntheticSpec, flatten, generate_synthetic_dataset
from flowseg_uda.model import ModelConfig
from flowseg_uda.train import TrainConfig

TINY = ModelConfig(widths=(4, 4), disc_widths=(4, 4, 4), flow_scale=2.0)


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.set_num_threads(1)
    yield
    torch.use_deterministic_algorithms(False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_source():
    spec = SyntheticSpec(height=16, width=16, object_size=(2.0, 3.5), length=4, seed=3)
    return flatten(generate_synthetic_dataset(spec, 3, "src"))


@pytest.fixture(scope="session")
def small_target():
    from flowseg_uda.data import TARGET_STYLE, Domain

    spec = SyntheticSpec(height=16, width=16, object_size=(2.0, 3.5), length=4, seed=4,
                         style=TARGET_STYLE, domain=Domain.TARGET)
    return flatten(generate_synthetic_dataset(spec, 3, "tgt"))


@pytest.fixture
def tiny_config():
    return TrainConfig(epochs=2, steps_per_epoch=3, batch_size=2, crop=16, lr=0.01,
                       uda_epochs=2, uda_lr=0.01, m_iters=2, n_iters=2, model=TINY)
