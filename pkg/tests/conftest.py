import numpy as np
import pytest

from covcast.market_data import CapPanel, PricePanel, fill_forward
from covcast.synth import generate_synthetic_market, write_synthetic_dataset


@pytest.fixture(scope="session")
def synth_market():
    return generate_synthetic_market(n_stock=3, n_crypto=3, n_days=600, seed=0)


@pytest.fixture(scope="session")
def synth_panel(synth_market):
    classes = dict(zip(synth_market.classes["ticker"], synth_market.classes["class"]))
    return PricePanel(prices=fill_forward(synth_market.prices), asset_class=classes)


@pytest.fixture(scope="session")
def synth_caps(synth_market):
    return CapPanel(caps=synth_market.caps)


@pytest.fixture(scope="session")
def synth_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth_data")
    write_synthetic_dataset(out, n_stock=3, n_crypto=3, n_days=600, seed=0)
    return out


def random_psd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n)) * scale
    return a @ a.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
