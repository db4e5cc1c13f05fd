"""Dataset ingestion: IDX containers, CSV, synthetic generators, label games.

All loaders are pure functions of bytes and seeds; re-loading is
bit-identical.  Label shuffling preserves the class marginals (it permutes
the existing labels) unless the iid variant is requested explicitly.
"""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import ConfigError, CsvFormatError, IdxCountMismatch, IdxMagicError, IdxTruncatedFile
from .rng import derive_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_be32(f, path) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise IdxTruncatedFile(f"{path}: truncated header")
    return struct.unpack(">i", raw)[0]


def load_idx(images_path, labels_path, n_classes: int = 10) -> LabeledDataset:
    """Load an IDX image/label pair (the MNIST container format).

    Pixels are scaled to [0, 1] and flattened row-major; dimensions are
    big-endian per the format.  Gzipped files are handled transparently.
    """
    with _open_maybe_gzip(images_path) as f:
        magic = _read_be32(f, images_path)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxMagicError(
                f"{images_path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        count = _read_be32(f, images_path)
        rows = _read_be32(f, images_path)
        cols = _read_be32(f, images_path)
        raw = f.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise IdxTruncatedFile(
                f"{images_path}: expected {count * rows * cols} pixel bytes, got {len(raw)}"
            )
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)

    with _open_maybe_gzip(labels_path) as f:
        magic = _read_be32(f, labels_path)
        if magic != IDX_LABELS_MAGIC:
            raise IdxMagicError(
                f"{labels_path}: magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        label_count = _read_be32(f, labels_path)
        raw = f.read(label_count)
        if len(raw) != label_count:
            raise IdxTruncatedFile(
                f"{labels_path}: expected {label_count} label bytes, got {len(raw)}"
            )
        labels = np.frombuffer(raw, dtype=np.uint8)

    if label_count != count:
        raise IdxCountMismatch(f"{count} images but {label_count} labels")
    if labels.size and labels.max() >= n_classes:
        raise ConfigError(
            f"{labels_path}: label {int(labels.max())} outside [0, {n_classes})"
        )
    return LabeledDataset(pixels.astype(np.float64) / 255.0, labels.astype(np.int64), n_classes)


def write_idx(images_path, labels_path, pixels: np.ndarray, labels: np.ndarray) -> None:
    """Write a (n, rows, cols) uint8 image stack and labels as IDX files."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">ii", IDX_LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


def shuffle_labels(data: LabeledDataset, seed: int, mode: str = "permute") -> LabeledDataset:
    """Replace labels for fake-label experiments.

    permute: a seeded permutation of the existing labels (preserves the class
    histogram, the default for random-label training practice).
    iid: labels resampled uniformly over the classes, the setting under which
    the labels are provably incompressible beyond n*log2(K) - delta bits.
    """
    rng = derive_rng(seed, "shuffle-labels")
    if mode == "permute":
        labels = data.labels[rng.permutation(data.n)]
    elif mode == "iid":
        labels = rng.integers(0, data.n_classes, size=data.n, dtype=np.int64)
    else:
        raise ConfigError(f"mode must be permute or iid, got {mode!r}")
    return data.with_labels(labels)


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded synthetic classification data.

    gaussian-blobs: K unit-covariance clusters with seeded centers scaled by
    `separation`.  logistic-teacher: x ~ N(0, I), binary labels sampled from
    sigmoid(w.x) with a seeded teacher w of dimension d_x (the identifiable
    d-parameter model used for the BIC-shape check).
    """

    generator: str
    n: int
    d_x: int
    n_classes: int = 2
    seed: int = 0
    separation: float = 4.0
    teacher_scale: float = 3.0

    def __post_init__(self):
        if self.generator not in ("gaussian-blobs", "logistic-teacher"):
            raise ConfigError(f"unknown generator {self.generator!r}")
        if self.n < 1 or self.d_x < 1:
            raise ConfigError("n and d_x must be positive")
        if self.generator == "logistic-teacher" and self.n_classes != 2:
            raise ConfigError("logistic-teacher is a binary generator")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")

    def as_dict(self) -> dict:
        return {
            "generator": self.generator,
            "n": self.n,
            "d_x": self.d_x,
            "n_classes": self.n_classes,
            "seed": self.seed,
            "separation": self.separation,
            "teacher_scale": self.teacher_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(
            d["generator"], int(d["n"]), int(d["d_x"]),
            n_classes=int(d.get("n_classes", 2)),
            seed=int(d.get("seed", 0)),
            separation=float(d.get("separation", 4.0)),
            teacher_scale=float(d.get("teacher_scale", 3.0)),
        )


def teacher_weights(spec: SyntheticSpec) -> np.ndarray:
    rng = derive_rng(spec.seed, "teacher")
    w = rng.standard_normal(spec.d_x)
    return w * (spec.teacher_scale / math.sqrt(spec.d_x))


def teacher_label_probs(spec: SyntheticSpec, inputs: np.ndarray) -> np.ndarray:
    """(n, 2) class probabilities of the logistic teacher on given inputs."""
    w = teacher_weights(spec)
    p1 = 1.0 / (1.0 + np.exp(-(inputs @ w)))
    return np.stack([1.0 - p1, p1], axis=1)


def generate(spec: SyntheticSpec) -> LabeledDataset:
    if spec.generator == "gaussian-blobs":
        rng = derive_rng(spec.seed, "blobs")
        centers = rng.standard_normal((spec.n_classes, spec.d_x)) * spec.separation
        labels = rng.integers(0, spec.n_classes, size=spec.n, dtype=np.int64)
        inputs = centers[labels] + rng.standard_normal((spec.n, spec.d_x))
        return LabeledDataset(inputs, labels, spec.n_classes)
    # logistic-teacher
    rng = derive_rng(spec.seed, "teacher-data")
    inputs = rng.standard_normal((spec.n, spec.d_x))
    probs = teacher_label_probs(spec, inputs)
    labels = (rng.random(spec.n) < probs[:, 1]).astype(np.int64)
    return LabeledDataset(inputs, labels, 2)


@dataclass(frozen=True)
class CsvSchema:
    """Header-driven CSV layout: named feature columns plus one integer label column."""

    feature_columns: tuple[str, ...]
    label_column: str
    n_classes: int | None = None


def load_csv(path, schema: CsvSchema) -> LabeledDataset:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(1, "empty file") from None
        try:
            feat_idx = [header.index(c) for c in schema.feature_columns]
            label_idx = header.index(schema.label_column)
        except ValueError as e:
            raise CsvFormatError(1, f"missing column: {e}") from None
        features, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                features.append([float(row[i]) for i in feat_idx])
                label = int(row[label_idx])
            except (ValueError, IndexError) as e:
                raise CsvFormatError(line_no, str(e)) from None
            if label < 0:
                raise CsvFormatError(line_no, f"negative label {label}")
            labels.append(label)
    if not labels:
        raise CsvFormatError(2, "no data rows")
    n_classes = schema.n_classes if schema.n_classes is not None else max(labels) + 1
    return LabeledDataset(np.array(features), np.array(labels), max(n_classes, 2))


def split(data: LabeledDataset, fractions, seed: int) -> list[LabeledDataset]:
    """Deterministic shuffled partition into len(fractions) datasets.

    A single fraction of 1.0 is the identity split (no reordering).
    """
    fractions = [float(f) for f in fractions]
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must be positive and sum to 1, got {fractions}")
    if len(fractions) == 1:
        return [data]
    order = derive_rng(seed, "split").permutation(data.n)
    sizes = [int(round(f * data.n)) for f in fractions[:-1]]
    sizes.append(data.n - sum(sizes))
    if any(s < 1 for s in sizes):
        raise ConfigError(f"split sizes {sizes} leave an empty part")
    parts, off = [], 0
    for s in sizes:
        idx = order[off : off + s]
        parts.append(LabeledDataset(data.inputs[idx], data.labels[idx], data.n_classes))
        off += s
    return parts
