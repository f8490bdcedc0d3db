#!/usr/bin/env python3
"""Build the bundled MNIST subset (IDX, gzip) from the 5000-sample CSV that
ships inside the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz).

    pip download --no-deps mlxtend
    python -m zipfile -e mlxtend-*.whl /tmp/mlx
    python tools/make_mnist_subset.py /tmp/mlx/mlxtend/data/data/mnist_5k.csv.gz data/mnist5k

The CSV is sorted by label, so rows are shuffled with a fixed seed before the
4000/1000 train/test split.
"""
import argparse
import gzip
import pathlib
import struct

import numpy as np


def write_idx_images(path, images):
    n, h, w = images.shape
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("outdir")
    ap.add_argument("--seed", type=int, default=20201206)
    ap.add_argument("--train", type=int, default=4000)
    args = ap.parse_args()

    with gzip.open(args.csv, "rt") as f:
        data = np.loadtxt(f, delimiter=",")
    pixels = data[:, :-1].reshape(-1, 28, 28)
    labels = data[:, -1].astype(np.int64)

    order = np.random.default_rng(args.seed).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]

    out = pathlib.Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    split = args.train
    write_idx_images(out / "train-images-idx3-ubyte.gz", pixels[:split])
    write_idx_labels(out / "train-labels-idx1-ubyte.gz", labels[:split])
    write_idx_images(out / "test-images-idx3-ubyte.gz", pixels[split:])
    write_idx_labels(out / "test-labels-idx1-ubyte.gz", labels[split:])
    print(f"wrote {split} train / {len(labels) - split} test images to {out}")


if __name__ == "__main__":
    main()
