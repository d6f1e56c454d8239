"""Write the scikit-learn 8x8 handwritten digits set as IDX files.

Produces data/digits/{train,test}-{images-idx3,labels-idx1}-ubyte with pixels
rescaled from 0..16 to 0..255. The split is a seeded 80/20 shuffle.
"""
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "digits"


def write_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    digits = load_digits()
    images = np.rint(digits.images * 255.0 / 16.0).clip(0, 255)
    labels = digits.target
    order = np.random.default_rng(0).permutation(len(labels))
    n_train = int(round(0.8 * len(labels)))
    train, test = order[:n_train], order[n_train:]
    OUT.mkdir(parents=True, exist_ok=True)
    write_images(OUT / "train-images-idx3-ubyte", images[train])
    write_labels(OUT / "train-labels-idx1-ubyte", labels[train])
    write_images(OUT / "test-images-idx3-ubyte", images[test])
    write_labels(OUT / "test-labels-idx1-ubyte", labels[test])
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()
