#!/usr/bin/env python3
"""Write the 5,000-image MNIST subset bundled with mlxtend as IDX files.

The subset holds 500 images per digit. Usage:

    pip download --no-deps -d /tmp/whl mlxtend
    python3 tools/make_mnist_subset.py /tmp/whl/mlxtend-*.whl data/mnist5k
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    with zipfile.ZipFile(wheel) as z:
        rows = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode().splitlines()
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        fields = [int(float(v)) for v in row.split(",")]
        pixels.extend(fields[:784])
        labels.append(fields[784])
    out.mkdir(parents=True, exist_ok=True)
    n = len(rows)
    (out / "train-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels))
    (out / "train-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + bytes(labels))
    print(f"wrote {n} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
