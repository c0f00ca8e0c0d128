"""Writes the two-image IDX fixture used by the dataset tests."""
import gzip
import struct
from pathlib import Path

HERE = Path(__file__).parent
ROWS = COLS = 28
LABELS = [7, 2]


def pixel(k, r, c):
    return (r * COLS + c + 37 * k) % 256


def images_bytes():
    out = struct.pack(">IIII", 0x00000803, len(LABELS), ROWS, COLS)
    for k in range(len(LABELS)):
        out += bytes(pixel(k, r, c) for r in range(ROWS) for c in range(COLS))
    return out


def labels_bytes(magic=0x00000801):
    return struct.pack(">II", magic, len(LABELS)) + bytes(LABELS)


def main():
    (HERE / "two-images-idx3-ubyte").write_bytes(images_bytes())
    (HERE / "two-labels-idx1-ubyte").write_bytes(labels_bytes())
    (HERE / "two-images-idx3-ubyte.gz").write_bytes(gzip.compress(images_bytes(), mtime=0))
    (HERE / "bad-magic-labels-idx1-ubyte").write_bytes(labels_bytes(0x00000803))
    (HERE / "three-labels-idx1-ubyte").write_bytes(
        struct.pack(">II", 0x00000801, 3) + bytes([1, 2, 3]))


if __name__ == "__main__":
    main()
