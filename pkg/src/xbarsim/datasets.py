"""Built-in synthetic dataset and text-file ingestion.

The synthetic set is a deterministic ten-class collection of 8x8 "digit-like"
images: each class has a fixed binary template drawn once from a seeded
stream, and samples add Gaussian pixel noise, clipped to [0, 1]. Loading
from disk expects one sample per line, feature values then an integer label,
with an optional header line.
"""

from __future__ import annotations

import numpy as np

from .core import RandomStream
from .errors import DataError

SYNTHETIC_SEED = 1202
SYNTHETIC_SIDE = 8
SYNTHETIC_CLASSES = 10


def synthetic_digits(n_train: int = 600, n_test: int = 200, noise: float = 0.5,
                     seed: int = SYNTHETIC_SEED):
    """Deterministic class-template images: (x_train, y_train, x_test, y_test).

    Counts are split evenly over the ten classes (remainders go to the low
    classes). Pixels live in [0, 1], so they encode directly as read voltages.
    """
    stream = RandomStream(seed, "synthetic-digits")
    n_pixels = SYNTHETIC_SIDE * SYNTHETIC_SIDE
    templates = (
        stream.substream("templates").uniform(size=(SYNTHETIC_CLASSES, n_pixels)) > 0.5
    ).astype(np.float64)

    def make_split(count, tag):
        per_class = [count // SYNTHETIC_CLASSES] * SYNTHETIC_CLASSES
        for c in range(count % SYNTHETIC_CLASSES):
            per_class[c] += 1
        labels = np.repeat(np.arange(SYNTHETIC_CLASSES), per_class)
        noise_draws = stream.substream(tag).normal(size=(count, n_pixels))
        x = np.clip(templates[labels] + noise * noise_draws, 0.0, 1.0)
        return x, labels

    x_train, y_train = make_split(n_train, "train")
    x_test, y_test = make_split(n_test, "test")
    return x_train, y_train, x_test, y_test


def load_dataset(path):
    """Parse delimiter-separated text: features then an integer label per line.

    The delimiter is sniffed (comma, semicolon, or whitespace); a first line
    that does not parse as numbers is treated as a header.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    rows = []
    labels = []
    n_features = None
    for lineno, line in enumerate(lines, start=1):
        if not line or line.startswith("#"):
            continue
        for delim in (",", ";", None):
            tokens = [t for t in line.split(delim) if t]
            if len(tokens) > 1:
                break
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            if not rows and lineno == next(
                i for i, ln in enumerate(lines, start=1) if ln.strip()
            ):
                continue  # header
            raise DataError(f"{path}:{lineno}: could not parse {line!r}")
        if len(values) < 2:
            raise DataError(f"{path}:{lineno}: need features plus a label")
        label = values[-1]
        if label != int(label):
            raise DataError(f"{path}:{lineno}: label {label} is not an integer")
        if n_features is None:
            n_features = len(values) - 1
        elif len(values) - 1 != n_features:
            raise DataError(
                f"{path}:{lineno}: expected {n_features} features, got {len(values) - 1}"
            )
        rows.append(values[:-1])
        labels.append(int(label))
    if not rows:
        raise DataError(f"{path}: no samples found")
    return np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int64)
