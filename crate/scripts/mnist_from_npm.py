#!/usr/bin/env python3
"""Convert the 10,000 MNIST digits bundled in the npm `mnist` package to IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist

Every fifth sample of each digit goes to the validation split; the rest go to
the training split. Pixels are stored as round(value * 255).
"""
import json
import os
import struct
import sys


def write_idx(path, magic, dims, payload):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main():
    src, dst = sys.argv[1], sys.argv[2]
    os.makedirs(dst, exist_ok=True)
    splits = {"train": [], "val": []}
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as f:
            flat = json.load(f)["data"]
        count = len(flat) // 784
        for i in range(count):
            pixels = bytes(round(v * 255) for v in flat[i * 784:(i + 1) * 784])
            split = "val" if i % 5 == 4 else "train"
            splits[split].append((i, digit, pixels))
    for name, rows in splits.items():
        # interleave classes so files are not sorted by label
        rows.sort(key=lambda r: (r[0], r[1]))
        write_idx(os.path.join(dst, f"{name}-images-idx3-ubyte"), 0x00000803,
                  [len(rows), 28, 28], b"".join(r[2] for r in rows))
        write_idx(os.path.join(dst, f"{name}-labels-idx1-ubyte"), 0x00000801,
                  [len(rows)], bytes(r[1] for r in rows))
        print(f"{name}: {len(rows)} samples")


if __name__ == "__main__":
    main()
