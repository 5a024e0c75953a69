#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package (v1.1.0)
into IDX files.

The package stores every 28x28 digit as floats rounded to three decimals
(byte / 255), which maps back to the original byte without loss.

Usage: convert_npm_mnist.py <package/src/digits> <out_dir> [train_per_class] [test_per_class]
"""
import json
import struct
import sys
from pathlib import Path


def load_digits(src: Path):
    out = {}
    for d in range(10):
        flat = json.loads((src / f"{d}.json").read_text())["data"]
        raw = bytes(round(v * 255) for v in flat)
        assert len(raw) % 784 == 0
        out[d] = [raw[i:i + 784] for i in range(0, len(raw), 784)]
    return out


def write_idx(out: Path, prefix: str, samples):
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for img, _ in samples:
            f.write(img)
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for _, label in samples))


def interleave(digits, start, count):
    # round-robin over classes so the file is not sorted by label
    return [(digits[d][start + i], d) for i in range(count) for d in range(10)]


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    train_n = int(sys.argv[3]) if len(sys.argv) > 3 else 100
    test_n = int(sys.argv[4]) if len(sys.argv) > 4 else 50
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits(src)
    write_idx(out, "train", interleave(digits, 0, train_n))
    write_idx(out, "t10k", interleave(digits, train_n, test_n))


if __name__ == "__main__":
    main()
