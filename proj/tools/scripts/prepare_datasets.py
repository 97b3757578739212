#!/usr/bin/env python3
"""Builds the on-disk dataset layout from the npm-mirrored copies.

Output layout under <root>:
  mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
  fashion-mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
  cifar10/data_batch_{1..5}.bin, cifar10/test_batch.bin

Fashion-MNIST ships as ~7000 images per class (a few malformed rows are
dropped) with no split marker; the
first 6000 of each class become train, the next 1000 become test.
CIFAR-10 ships as PNG strips (one 32x32x3 image per row, RGB interleaved)
which are rewritten into the canonical label+planar binary records.
"""
import argparse
import json
import os
import shutil
import struct
import subprocess
import tarfile
import tempfile

import numpy as np
from PIL import Image


def npm_pack(pkg, dest):
    out = subprocess.run(["npm", "pack", pkg], cwd=dest, check=True,
                         capture_output=True, text=True).stdout.strip().splitlines()[-1]
    d = os.path.join(dest, pkg)
    with tarfile.open(os.path.join(dest, out)) as tf:
        tf.extractall(d)
    return os.path.join(d, "package")


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def prepare_mnist(work, root):
    pkg = npm_pack("mnist-data", work)
    out = os.path.join(root, "mnist")
    os.makedirs(out, exist_ok=True)
    for name in ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                 "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]:
        shutil.copy(os.path.join(pkg, "data", name), os.path.join(out, name))


def prepare_fashion(work, root):
    pkg = npm_pack("fashion-mnist", work)
    out = os.path.join(root, "fashion-mnist")
    os.makedirs(out, exist_ok=True)
    tr_x, tr_y, te_x, te_y = [], [], [], []
    for c in range(10):
        with open(os.path.join(pkg, "src", "clothes", f"{c}.json")) as f:
            rows = [r for r in json.load(f)["data"] if len(r) == 784]
        data = np.asarray(rows, dtype=np.uint8)
        tr_x.append(data[:6000]); tr_y += [c] * 6000
        te_x.append(data[6000:7000]); te_y += [c] * 1000
    # Interleave classes deterministically so the files are not class-sorted.
    rng = np.random.default_rng(0)
    for prefix, xs, ys in [("train", tr_x, tr_y), ("t10k", te_x, te_y)]:
        x = np.concatenate(xs); y = np.asarray(ys)
        perm = rng.permutation(len(y))
        write_idx_images(os.path.join(out, f"{prefix}-images-idx3-ubyte"), x[perm])
        write_idx_labels(os.path.join(out, f"{prefix}-labels-idx1-ubyte"), y[perm])


def prepare_cifar(work, root):
    pkg = npm_pack("tfjs-cifar10", work)
    out = os.path.join(root, "cifar10")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(pkg, "train_lables.json")) as f:
        train_labels = json.load(f)
    with open(os.path.join(pkg, "test_lables.json")) as f:
        test_labels = json.load(f)
    batches = [(f"data_batch_{i}", train_labels[(i - 1) * 10000:i * 10000]) for i in range(1, 6)]
    batches.append(("test_batch", test_labels))
    for name, labels in batches:
        px = np.asarray(Image.open(os.path.join(pkg, name + ".png")).convert("RGB"))
        px = px.reshape(10000, 1024, 3).transpose(0, 2, 1).reshape(10000, 3072)
        rec = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], px], axis=1)
        with open(os.path.join(out, name + ".bin"), "wb") as f:
            f.write(rec.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("root", help="destination directory (e.g. $SOMREPLAY_DATA)")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as work:
        prepare_mnist(work, args.root)
        prepare_fashion(work, args.root)
        prepare_cifar(work, args.root)


if __name__ == "__main__":
    main()
