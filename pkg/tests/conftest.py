import os

import numpy as np
import pytest

from exoticnet import kernels
from exoticnet.dataset import FEATURE_NAMES

# path to the public challenge training file, when available
OFFICIAL_TRAIN = os.environ.get(
    "EXOTICNET_HIGGS_TRAIN",
    os.path.join(os.path.dirname(__file__), "..", "data", "training.csv"),
)


def official_train_path():
    if os.path.exists(OFFICIAL_TRAIN):
        return OFFICIAL_TRAIN
    pytest.skip(f"official challenge training file not found at {OFFICIAL_TRAIN}")


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    kernels.warmup()


@pytest.fixture
def write_train_csv(tmp_path):
    """Factory writing a minimal train-schema CSV and returning its path."""

    def _write(rows, name="train.csv"):
        path = tmp_path / name
        header = ["EventId", *FEATURE_NAMES, "Weight", "Label"]
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(str(v) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return _write


def make_train_row(event_id, features, weight, label):
    assert len(features) == len(FEATURE_NAMES)
    return [event_id, *features, weight, label]


@pytest.fixture
def rng_np():
    return np.random.default_rng(20240815)
