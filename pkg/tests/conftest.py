import dataclasses
from pathlib import Path

import pytest

from securefed.orchestrator import ExperimentConfig, MnistSource, Seeds, SyntheticSource

REPO_ROOT = Path(__file__).resolve().parent.parent
MNIST_DIR = REPO_ROOT / "data" / "mnist"


def mnist_source() -> MnistSource:
    return MnistSource(
        train_images=str(MNIST_DIR / "train-images-idx3-ubyte"),
        train_labels=str(MNIST_DIR / "train-labels-idx1-ubyte"),
        test_images=str(MNIST_DIR / "test-images-idx3-ubyte"),
        test_labels=str(MNIST_DIR / "test-labels-idx1-ubyte"),
    )


def synthetic_config(**overrides) -> ExperimentConfig:
    """Small, fast synthetic-data experiment used across integration tests."""
    base = dict(
        dataset=SyntheticSource(num_classes=3, per_class=60, test_per_class=60,
                                dim=12, separation=1.5),
        name="synthetic-test",
        num_clients=6,
        malicious_count=0,
        rounds=2,
        pca_k=3,
        hidden_dim=8,
        d_s_size=60,
        seeds=Seeds(data=1, model=2, clients=3, defense=4),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def mnist_config(**overrides) -> ExperimentConfig:
    base = dict(
        dataset=mnist_source(),
        name="mnist-test",
        num_clients=20,
        malicious_count=0,
        rounds=3,
        d_s_size=1000,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="session")
def mnist_available() -> bool:
    return MNIST_DIR.is_dir() and (MNIST_DIR / "train-images-idx3-ubyte").is_file()


def replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(cfg, **changes)
