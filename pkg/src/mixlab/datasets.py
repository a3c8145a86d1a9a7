"""Finite labeled datasets: constructive families, CSV and IDX loaders.

Points carry 1-based class labels and uniform mass 1/m.  Class supports must
be disjoint as point sets.  The +/-1 labels used by the linear-model analysis
are a view over a two-class dataset (class 1 <-> +1, class 2 <-> -1).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DatasetError",
    "FormatError",
    "LabeledDataset",
    "alternating_line",
    "four_point_cross",
    "gaussian_binary",
    "load_csv",
    "load_idx",
    "save_csv",
    "signed_labels",
    "two_moons",
]


class DatasetError(ValueError):
    """Invalid dataset construction (empty class, duplicate point across classes...)."""


class FormatError(ValueError):
    """Malformed external file (CSV row, IDX header...)."""


@dataclass(frozen=True)
class LabeledDataset:
    """m points in R^n with class labels in {1..k} and uniform measure."""

    points: np.ndarray
    labels: np.ndarray
    k: int
    name: str = ""
    _class_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        labs = np.asarray(self.labels, dtype=int)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] < 1:
            raise DatasetError("points must form a nonempty m x n array")
        if labs.shape != (pts.shape[0],):
            raise DatasetError("labels must be one per point")
        if labs.min(initial=1) < 1 or (labs.max(initial=0) > self.k):
            raise DatasetError(f"labels must lie in 1..{self.k}")
        index = {}
        for i in range(1, self.k + 1):
            idx = np.flatnonzero(labs == i)
            if idx.size == 0:
                raise DatasetError(f"class {i} empty")
            index[i] = idx
        # disjoint supports: the same point may not carry two different labels
        seen = {}
        for j in range(pts.shape[0]):
            key = pts[j].tobytes()
            if key in seen and labs[seen[key]] != labs[j]:
                raise DatasetError(
                    f"point {j} duplicates point {seen[key]} with a different label"
                )
            seen.setdefault(key, j)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)
        object.__setattr__(self, "_class_index", index)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def class_indices(self, i: int) -> np.ndarray:
        return self._class_index[i]

    def class_points(self, i: int) -> np.ndarray:
        return self.points[self._class_index[i]]

    def diameter(self) -> float:
        """Largest pairwise distance; scale reference for geometric tolerances."""
        diffs = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt((diffs**2).sum(-1)).max())


def signed_labels(ds: LabeledDataset) -> np.ndarray:
    """+1 for class 1, -1 for class 2; only defined for two-class data."""
    if ds.k != 2:
        raise DatasetError(f"signed labels need k=2, got k={ds.k}")
    return np.where(ds.labels == 1, 1.0, -1.0)


# ---------------------------------------------------------------------- #
# constructive families
# ---------------------------------------------------------------------- #


def alternating_line(m: int, k: int) -> LabeledDataset:
    """Integers 0..m-1 on the real line, labeled cyclically (i mod k) + 1."""
    if k < 2 or m < 2:
        raise DatasetError("need m >= 2 and k >= 2")
    if k > m:
        raise DatasetError(f"k={k} > m={m} leaves empty classes")
    pts = np.arange(m, dtype=float)[:, None]
    labs = (np.arange(m) % k) + 1
    return LabeledDataset(pts, labs, k=k, name=f"x{m}k{k}")


def four_point_cross() -> LabeledDataset:
    """Two points on the y-axis (class 1) against two on the x-axis (class 2)."""
    pts = np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]])
    labs = np.array([1, 1, 2, 2])
    return LabeledDataset(pts, labs, k=2, name="cross")


def two_moons(n_per_class: int, separation: float, noise_sd: float, seed: int) -> LabeledDataset:
    """Two noisy semicircle arcs; the second is reflected and shifted down.

    Class 1: (cos t, sin t) + eta with t ~ U[0, pi].
    Class 2: (1 - cos t, -sin t - separation) + eta, eta ~ N(0, noise_sd^2 I).
    """
    if n_per_class < 1:
        raise DatasetError("n_per_class must be >= 1")
    if noise_sd < 0:
        raise DatasetError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    t1 = rng.uniform(0.0, math.pi, n_per_class)
    t2 = rng.uniform(0.0, math.pi, n_per_class)
    c1 = np.column_stack([np.cos(t1), np.sin(t1)])
    c2 = np.column_stack([1.0 - np.cos(t2), -np.sin(t2) - separation])
    pts = np.vstack([c1, c2])
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    labs = np.concatenate([np.ones(n_per_class, int), np.full(n_per_class, 2)])
    return LabeledDataset(pts, labs, k=2, name="moons")


def gaussian_binary(n: int, d: int, seed: int) -> LabeledDataset:
    """n standard-normal points in R^d, labels alternating +1/-1 (classes 1/2)."""
    if n < 2 or d < 1:
        raise DatasetError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, d))
    labs = np.where(np.arange(n) % 2 == 0, 1, 2)
    return LabeledDataset(pts, labs, k=2, name=f"gauss_n{n}_d{d}")


# ---------------------------------------------------------------------- #
# CSV
# ---------------------------------------------------------------------- #


def load_csv(path) -> LabeledDataset:
    """Read `label,f0,f1,...` rows; k is the largest label seen."""
    rows, labs = [], []
    ncols = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if ncols is None:
                ncols = len(row)
            if len(row) != ncols:
                raise FormatError(f"{path}:{lineno}: ragged row ({len(row)} fields, expected {ncols})")
            try:
                lab = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric field in {row!r}") from exc
            if lab < 1:
                raise FormatError(f"{path}:{lineno}: labels must be positive integers")
            labs.append(lab)
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), np.array(labs), k=max(labs), name=str(path))


def save_csv(ds: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
        for lab, pt in zip(ds.labels, ds.points):
            writer.writerow([int(lab)] + [repr(float(v)) for v in pt])


# ---------------------------------------------------------------------- #
# IDX (big-endian image/label pairs)
# ---------------------------------------------------------------------- #

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _read_idx_header(data: bytes, path, magic: int, ndims: int):
    if len(data) < 4 * (1 + ndims):
        raise FormatError(f"{path}: truncated IDX header")
    got = struct.unpack(">i", data[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad IDX magic {got:#010x}, expected {magic:#010x}")
    dims = struct.unpack(f">{ndims}i", data[4 : 4 + 4 * ndims])
    return dims, 4 + 4 * ndims


def load_idx(images_path, labels_path, fraction: float, seed: int) -> LabeledDataset:
    """Load an IDX image/label pair, rescale pixels by 1/255 and flatten.

    Classes are digit+1.  The dataset is downsampled without replacement to
    ceil(fraction * N) points under the given seed.
    """
    if not 0.0 < fraction <= 1.0:
        raise DatasetError(f"fraction must be in (0, 1], got {fraction}")
    with open(images_path, "rb") as fh:
        img_data = fh.read()
    with open(labels_path, "rb") as fh:
        lab_data = fh.read()
    (n_img, rows, cols), img_off = _read_idx_header(img_data, images_path, _IDX_IMAGES_MAGIC, 3)
    (n_lab,), lab_off = _read_idx_header(lab_data, labels_path, _IDX_LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise FormatError(f"count mismatch: {n_img} images vs {n_lab} labels")
    need = n_img * rows * cols
    if len(img_data) - img_off < need:
        raise FormatError(f"{images_path}: truncated pixel data")
    if len(lab_data) - lab_off < n_lab:
        raise FormatError(f"{labels_path}: truncated label data")
    imgs = np.frombuffer(img_data, dtype=np.uint8, count=need, offset=img_off)
    imgs = imgs.reshape(n_img, rows * cols).astype(float) / 255.0
    labs = np.frombuffer(lab_data, dtype=np.uint8, count=n_lab, offset=lab_off).astype(int) + 1
    n_keep = math.ceil(fraction * n_img)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n_img, size=n_keep, replace=False))
    return LabeledDataset(
        imgs[keep], labs[keep], k=int(labs[keep].max()), name=f"idx_{n_keep}"
    )
