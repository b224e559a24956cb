#!/usr/bin/env python3
"""Build data/mnist10k/*.idx.gz from the 10k-digit subset shipped in the `mnist` npm package.

Usage:
    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist10k.py package/src/digits data/mnist10k

Pixels in the package are stored as round(v / 255, 3); they are mapped back to bytes with
round(p * 255). Samples are interleaved with a fixed shuffle so any prefix is class balanced.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main(src: str, dst: str) -> None:
    samples = []
    for digit in range(10):
        data = json.loads(Path(src, f"{digit}.json").read_text())["data"]
        for i in range(len(data) // 784):
            px = bytes(min(255, max(0, round(v * 255))) for v in data[i * 784:(i + 1) * 784])
            samples.append((px, digit))
    random.Random(20240601).shuffle(samples)
    out = Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(out / "images.idx3.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
        for px, _ in samples:
            f.write(px)
    with gzip.GzipFile(out / "labels.idx1.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(label for _, label in samples))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
