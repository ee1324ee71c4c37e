import numpy as np
import pytest

from licodec import model as model_mod
from licodec.weights import load_weights, save_weights, weight_file_hash


@pytest.fixture(scope="session")
def toy_model(tmp_path_factory):
    """One toy model shared by the whole session (weights round-trip through
    the on-disk format so the container hash is exercised)."""
    d = tmp_path_factory.mktemp("toy-model")
    cfg = model_mod.make_toy_config()
    store = model_mod.make_toy_weights(cfg, seed=0, latent_gain=6.5)
    path = d / "weights_0.lwt"
    save_weights(store, path)
    m = model_mod.Model(
        config=cfg,
        weights=load_weights(path),
        weight_hash=weight_file_hash(path),
        lambda_index=0,
    )
    m.validate()
    return m


@pytest.fixture(scope="session")
def toy_model_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy-dir")
    model_mod.write_toy_model_dir(d, seed=3, n_lambdas=4)
    return d


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
