#!/usr/bin/env python3
"""Regenerate the bundled MNIST sample under data/mnist/.

The fixture is a 10,000-image sample of the MNIST handwritten digits,
taken from the `mnist` npm package (v1.1.0), which ships the pixel data
as JSON arrays of x/255 values rounded to three decimals. That rounding
is injective for the 256 gray levels, so the original bytes are
recovered exactly with round(v * 255).

The sample is split 8,000 / 2,000 into train/test files (stratified,
fixed seed) and written in the standard IDX container, gzip-compressed:

    train-images-idx3-ubyte.gz   train-labels-idx1-ubyte.gz
    t10k-images-idx3-ubyte.gz    t10k-labels-idx1-ubyte.gz

Pointing the CLI's --data-dir at a directory holding the full official
MNIST files (same names, with or without .gz) works identically.

Usage: python3 tools/make_mnist_fixture.py [--out data/mnist]
Requires `npm` with access to a registry that serves the mnist package.
"""

import argparse
import gzip
import json
import pathlib
import random
import struct
import subprocess
import sys
import tarfile
import tempfile

SPLIT_SEED = 74025031
TRAIN_FRACTION = 0.8


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        ["npm", "pack", "mnist@1.1.0"],
        cwd=workdir,
        check=True,
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    tarball = next(workdir.glob("mnist-*.tgz"))
    with tarfile.open(tarball) as tf:
        tf.extractall(workdir)
    return workdir / "package" / "src" / "digits"


def load_digits(digits_dir: pathlib.Path):
    # Sanity: 3-decimal rounding of k/255 must be reversible for all k.
    for k in range(256):
        assert round(round(k / 255, 3) * 255) == k
    images, labels = [], []
    for digit in range(10):
        data = json.loads((digits_dir / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for i in range(0, len(data), 784):
            images.append(bytes(round(v * 255) for v in data[i : i + 784]))
            labels.append(digit)
    return images, labels


def write_idx_images(path: pathlib.Path, images) -> None:
    payload = struct.pack(">IIII", 0x803, len(images), 28, 28) + b"".join(images)
    with gzip.open(path, "wb", compresslevel=9) as f:
        f.write(payload)


def write_idx_labels(path: pathlib.Path, labels) -> None:
    payload = struct.pack(">II", 0x801, len(labels)) + bytes(labels)
    with gzip.open(path, "wb", compresslevel=9) as f:
        f.write(payload)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/mnist")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        digits_dir = fetch_package(pathlib.Path(tmp))
        images, labels = load_digits(digits_dir)

    rng = random.Random(SPLIT_SEED)
    by_class = [[] for _ in range(10)]
    for idx, label in enumerate(labels):
        by_class[label].append(idx)

    train_idx, test_idx = [], []
    for cls in range(10):
        members = by_class[cls]
        rng.shuffle(members)
        n_train = round(TRAIN_FRACTION * len(members))
        train_idx.extend(members[:n_train])
        test_idx.extend(members[n_train:])
    rng.shuffle(train_idx)
    rng.shuffle(test_idx)

    write_idx_images(out / "train-images-idx3-ubyte.gz", [images[i] for i in train_idx])
    write_idx_labels(out / "train-labels-idx1-ubyte.gz", [labels[i] for i in train_idx])
    write_idx_images(out / "t10k-images-idx3-ubyte.gz", [images[i] for i in test_idx])
    write_idx_labels(out / "t10k-labels-idx1-ubyte.gz", [labels[i] for i in test_idx])

    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
