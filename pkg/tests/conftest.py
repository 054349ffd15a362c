import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixpath import backbone as bb
from mixpath.kg import synth_kg
from mixpath.text import build_vocab


@pytest.fixture(scope="session")
def small_store():
    return synth_kg(4, (2, 3), seed=1)


@pytest.fixture(scope="session")
def small_model(small_store):
    vocab = build_vocab(small_store, k_latents=3)
    cfg = bb.BackboneConfig(
        vocab=vocab, embed_dim=10, hidden_dim=12, max_target_len=14, seed=5
    )
    return bb.init_model(cfg)


def zero_output_projection(model: bb.BackboneModel) -> bb.BackboneModel:
    model.params["out.w"].values[:] = 0.0
    model.params["out.b"].values[:] = 0.0
    return model
