#!/usr/bin/env python3
"""Convert the `mnist` npm package's digit JSON files into IDX files.

The npm package (https://www.npmjs.com/package/mnist, MIT license) bundles
10,000 real MNIST digits as per-class JSON arrays of 784 grayscale values
normalized to [0, 1] and rounded to 3 decimals. Since adjacent uint8 pixel
levels are 1/255 ~ 0.0039 apart, round(v * 255) recovers the original bytes
exactly.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python scripts/make_mnist_idx.py package/src/digits data/mnist

Produces train/test IDX pairs (8,000 / 2,000 split, seeded shuffle) in the
standard big-endian IDX format readable by securefed.dataset.load_mnist_idx.
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np

SHUFFLE_SEED = 13
TRAIN_COUNT = 8000


def load_digit_jsons(digits_dir: Path) -> tuple[np.ndarray, np.ndarray]:
    images = []
    labels = []
    for digit in range(10):
        with open(digits_dir / f"{digit}.json") as f:
            flat = np.asarray(json.load(f)["data"], dtype=np.float64)
        per_class = flat.reshape(-1, 784)
        pixels = np.round(per_class * 255.0)
        if np.abs(per_class * 255.0 - pixels).max() >= 0.5:
            raise ValueError(f"digit {digit}: values are not 1/255-quantized")
        images.append(pixels.astype(np.uint8))
        labels.append(np.full(per_class.shape[0], digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def write_idx_pair(images: np.ndarray, labels: np.ndarray, image_path: Path, label_path: Path) -> None:
    n = images.shape[0]
    with open(image_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(images.tobytes())
    with open(label_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} <digits-json-dir> <output-dir>")
    digits_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    images, labels = load_digit_jsons(digits_dir)
    order = np.random.Generator(np.random.PCG64(SHUFFLE_SEED)).permutation(images.shape[0])
    images, labels = images[order], labels[order]

    write_idx_pair(
        images[:TRAIN_COUNT], labels[:TRAIN_COUNT],
        out_dir / "train-images-idx3-ubyte", out_dir / "train-labels-idx1-ubyte",
    )
    write_idx_pair(
        images[TRAIN_COUNT:], labels[TRAIN_COUNT:],
        out_dir / "test-images-idx3-ubyte", out_dir / "test-labels-idx1-ubyte",
    )
    print(f"wrote {TRAIN_COUNT} train / {images.shape[0] - TRAIN_COUNT} test samples to {out_dir}")


if __name__ == "__main__":
    main()
