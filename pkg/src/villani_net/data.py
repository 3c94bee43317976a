"""Dataset plumbing: synthetic margin data and MNIST-style IDX ingestion.

The synthetic generator samples standard-normal rows, unit-normalizes them,
and labels by the sign of the last coordinate outside a +/-margin band (rows
inside the band are discarded). IDX files are the big-endian binary container
used by the canonical MNIST distribution; parsing is bit-exact and
round-trippable.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .net_loss import LabeledDataset

IDX_MAGIC_IMAGES = 2051  # 0x00000803: ubyte payload, 3 axes
IDX_MAGIC_LABELS = 2049  # 0x00000801: ubyte payload, 1 axis
PIXEL_SCALES = ("unit_interval", "normalize_by_max_norm")


@dataclass(frozen=True)
class SyntheticSpec:
    """Margin-dataset parameters; n_raw rows are sampled before filtering."""

    n_raw: int
    dim_d: int
    margin: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_raw < 1 or self.dim_d < 1:
            raise ValueError("n_raw and dim_d must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie strictly between 0 and 1")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")


def gen_synthetic(spec: SyntheticSpec):
    """Sample, filter, and split the margin dataset.

    Returns (train, test) LabeledDatasets. Rows are unit-normalized so the
    data radius is exactly 1; the +/-margin band around the last coordinate
    is discarded. The split is stratified per class so both shares contain
    both labels, and together they exhaust the survivors.
    """
    rng = np.random.default_rng(spec.seed)
    raw = rng.standard_normal((spec.n_raw, spec.dim_d))
    norms = np.linalg.norm(raw, axis=1)
    rows = raw[norms > 0] / norms[norms > 0, None]
    last = rows[:, -1]
    pos = rows[last > spec.margin]
    neg = rows[last < -spec.margin]
    if len(pos) < 2 or len(neg) < 2:
        raise ValueError(
            f"margin filter left too few rows per class "
            f"(+1: {len(pos)}, -1: {len(neg)}); raise n_raw"
        )

    train_parts, test_parts = [], []
    for rows_c, label in ((pos, 1.0), (neg, -1.0)):
        k = len(rows_c)
        n_test = min(k - 1, max(1, int(round(k * spec.test_fraction))))
        order = rng.permutation(k)
        test_rows = rows_c[order[:n_test]]
        train_rows = rows_c[order[n_test:]]
        train_parts.append((train_rows, np.full(len(train_rows), label)))
        test_parts.append((test_rows, np.full(len(test_rows), label)))

    def assemble(parts):
        x = np.concatenate([p[0] for p in parts])
        y = np.concatenate([p[1] for p in parts])
        return LabeledDataset(features=x, labels=y)

    return assemble(train_parts), assemble(test_parts)


def dataset_to_csv(data: LabeledDataset) -> str:
    """Feature columns then the label, one row per sample, with a header."""
    cols = [f"x{j}" for j in range(data.d)] + ["label"]
    lines = [",".join(cols)]
    for i in range(data.n):
        vals = [repr(float(v)) for v in data.features[i]]
        vals.append(repr(float(data.labels[i])))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def dataset_from_csv(text: str) -> LabeledDataset:
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    if header[-1] != "label":
        raise ValueError("expected a trailing 'label' column")
    body = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return LabeledDataset(features=body[:, :-1], labels=body[:, -1])


@dataclass(frozen=True)
class IdxFile:
    """Parsed IDX container: magic, per-axis sizes, raw ubyte payload."""

    magic: int
    dims: tuple
    payload: bytes

    def __post_init__(self):
        if self.magic not in (IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS):
            raise ValueError(f"unsupported IDX magic {self.magic}")
        want_axes = self.magic & 0xFF
        if len(self.dims) != want_axes:
            raise ValueError(
                f"magic {self.magic} implies {want_axes} axes, got {len(self.dims)}"
            )
        count = 1
        for d in self.dims:
            if d < 0:
                raise ValueError("negative axis size")
            count *= d
        if count != len(self.payload):
            raise ValueError(
                f"payload holds {len(self.payload)} bytes, header promises {count}"
            )

    def to_bytes(self) -> bytes:
        head = struct.pack(">i", self.magic)
        head += b"".join(struct.pack(">i", d) for d in self.dims)
        return head + self.payload

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.payload, dtype=np.uint8).reshape(self.dims)


def load_idx(path) -> IdxFile:
    """Parse an IDX file (big-endian header, unsigned-byte payload)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    return parse_idx(blob)


def parse_idx(blob: bytes) -> IdxFile:
    if len(blob) < 4:
        raise ValueError("truncated IDX header")
    (magic,) = struct.unpack(">i", blob[:4])
    if magic not in (IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS):
        raise ValueError(f"unsupported IDX magic {magic}")
    n_axes = magic & 0xFF
    header_len = 4 + 4 * n_axes
    if len(blob) < header_len:
        raise ValueError("truncated IDX dimension header")
    dims = struct.unpack(f">{n_axes}i", blob[4:header_len])
    count = 1
    for d in dims:
        if d < 0 or (count and d > (1 << 40) // max(count, 1)):
            raise ValueError(f"axis sizes {dims} overflow a sane payload")
        count *= d
    payload = blob[header_len:]
    if len(payload) != count:
        raise ValueError(
            f"payload holds {len(payload)} bytes, header promises {count}"
        )
    return IdxFile(magic=magic, dims=dims, payload=payload)


def binary_pair(images: IdxFile, labels: IdxFile, digit_a: int, digit_b: int,
                scale: str = "normalize_by_max_norm") -> LabeledDataset:
    """Two-digit subset as a +/-1 classification set.

    Pixels are flattened and mapped to [0,1]; digit_a becomes +1 and digit_b
    becomes -1. With scale="normalize_by_max_norm" every vector is further
    divided by the largest norm in the retained set, so the data radius is 1.
    """
    if digit_a == digit_b or not (0 <= digit_a <= 9 and 0 <= digit_b <= 9):
        raise ValueError("need two distinct digits in 0..9")
    if scale not in PIXEL_SCALES:
        raise ValueError(f"scale must be one of {PIXEL_SCALES}")
    if images.magic != IDX_MAGIC_IMAGES or labels.magic != IDX_MAGIC_LABELS:
        raise ValueError("pass an image file and a label file, in that order")
    if images.dims[0] != labels.dims[0]:
        raise ValueError("image and label counts differ")

    y_all = labels.as_array()
    for digit in (digit_a, digit_b):
        if not np.any(y_all == digit):
            raise ValueError(f"digit {digit} absent from the label file")
    mask = (y_all == digit_a) | (y_all == digit_b)
    x = images.as_array()[mask].reshape(int(mask.sum()), -1).astype(float) / 255.0
    y = np.where(y_all[mask] == digit_a, 1.0, -1.0)
    if scale == "normalize_by_max_norm":
        x = x / np.max(np.linalg.norm(x, axis=1))
    return LabeledDataset(features=x, labels=y)


def save_idx(idx: IdxFile, path) -> None:
    with open(path, "wb") as fh:
        fh.write(idx.to_bytes())


def train_test_split_mnist(data: LabeledDataset, test_fraction: float, seed: int):
    """Stratified split helper for IDX-derived sets lacking a canonical test file."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in (1.0, -1.0):
        idx = np.flatnonzero(data.labels == label)
        order = rng.permutation(len(idx))
        n_test = min(len(idx) - 1, max(1, int(round(len(idx) * test_fraction))))
        test_idx.append(idx[order[:n_test]])
        train_idx.append(idx[order[n_test:]])
    tr = np.concatenate(train_idx)
    te = np.concatenate(test_idx)
    return (
        LabeledDataset(features=data.features[tr], labels=data.labels[tr]),
        LabeledDataset(features=data.features[te], labels=data.labels[te]),
    )
