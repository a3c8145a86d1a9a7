"""Closed-form Mixup-optimal classification on finite datasets.

For a probe point x and radius eps, every ordered pair of data points
contributes the mixing-law mass of the lambda interval whose mixtures land in
the eps-ball around x.  Those per-class-pair masses (and their lambda-weighted
versions) are the coefficients of the optimal class probabilities; the eps->0
limit replaces interval masses with density weights of segments passing
exactly through x.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset
from .mixing import MixingDistribution

__all__ = [
    "GridSpec",
    "MixMassTable",
    "OutsideMixSupportError",
    "SegmentHit",
    "argmax_class",
    "boundary_grid",
    "mix_mass_table",
    "mixture_limit_probs",
    "mixture_optimal_probs",
    "mixture_optimal_probs_symmetric",
    "save_grid_csv",
    "segment_ball_interval",
]


class OutsideMixSupportError(ValueError):
    """Probe point receives no mixture mass at the requested radius."""


@dataclass(frozen=True)
class SegmentHit:
    """One ordered pair whose segment meets the probe neighborhood."""

    p_index: int
    q_index: int
    classes: tuple
    lam_interval: tuple
    lam_star: float | None
    pair_norm: float


@dataclass(frozen=True)
class MixMassTable:
    """Per-class-pair mixture masses around a probe point at fixed radius.

    ``mass[i-1, j-1]`` is the measure of (s, t, lambda) triples with s in
    class i, t in class j and the mixture inside the eps-ball; ``lam_mass``
    weights the same set by lambda.
    """

    mass: np.ndarray
    lam_mass: np.ndarray
    eps: float
    probe: np.ndarray

    @property
    def in_mix_support(self) -> bool:
        return bool(self.mass.sum() > 0.0)


def segment_ball_interval(p, q, x, eps: float):
    """Lambda interval where lam*p + (1-lam)*q lies within eps of x, or None.

    Solves ||q - x + lam (p - q)||^2 <= eps^2 on [0, 1].  A degenerate pair
    p == q yields [0, 1] when ||p - x|| <= eps.
    """
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    x = np.asarray(x, float)
    if p.shape != q.shape or p.shape != x.shape:
        raise ValueError(f"dimension mismatch: {p.shape}, {q.shape}, {x.shape}")
    d = p - q
    w = q - x
    a = float(d @ d)
    if a == 0.0:
        return (0.0, 1.0) if float(w @ w) <= eps * eps else None
    b = 2.0 * float(w @ d)
    c = float(w @ w) - eps * eps
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    root = np.sqrt(disc)
    lo = max((-b - root) / (2.0 * a), 0.0)
    hi = min((-b + root) / (2.0 * a), 1.0)
    if hi < lo:
        return None
    return (lo, hi)


def _pair_intervals(points: np.ndarray, x: np.ndarray, eps: float):
    """Vectorized lambda intervals for all m^2 ordered pairs (p_idx, q_idx)."""
    m = points.shape[0]
    pi, qi = np.divmod(np.arange(m * m), m)
    d = points[pi] - points[qi]
    w = points[qi] - x[None, :]
    a = (d * d).sum(1)
    b = 2.0 * (w * d).sum(1)
    c = (w * w).sum(1) - eps * eps
    lo = np.zeros(m * m)
    hi = np.full(m * m, -1.0)  # hi < lo encodes "empty"
    degen = a == 0.0
    inside_degen = degen & (c <= 0.0)
    hi[inside_degen] = 1.0
    nd = ~degen
    disc = b * b - 4.0 * a * c
    ok = nd & (disc >= 0.0)
    root = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lo_raw = (-b - root) / (2.0 * a)
        hi_raw = (-b + root) / (2.0 * a)
    lo[ok] = np.maximum(lo_raw[ok], 0.0)
    hi[ok] = np.minimum(hi_raw[ok], 1.0)
    return pi, qi, lo, hi


def mix_mass_table(
    ds: LabeledDataset, dist: MixingDistribution, x, eps: float
) -> MixMassTable:
    """Exact per-class-pair masses over all ordered point pairs (diagonal included).

    Each ordered pair (p, q) in classes (i, j) adds interval_mass / m^2 to
    ``mass[i, j]`` and interval_first_moment / m^2 to ``lam_mass[i, j]`` over
    its lambda interval.  The p == q diagonal is what pins data points to
    their own class in the eps -> 0 limit, so it must not be dropped.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, float)
    if x.shape != (ds.dim,):
        raise ValueError(f"probe has dimension {x.shape}, dataset has {ds.dim}")
    k, m = ds.k, ds.m
    mass = np.zeros((k, k))
    lam_mass = np.zeros((k, k))
    pi, qi, lo, hi = _pair_intervals(ds.points, x, eps)
    inv_m2 = 1.0 / (m * m)
    for idx in np.flatnonzero(hi >= lo):
        i = ds.labels[pi[idx]] - 1
        j = ds.labels[qi[idx]] - 1
        mass[i, j] += inv_m2 * dist.interval_mass(lo[idx], hi[idx])
        lam_mass[i, j] += inv_m2 * dist.interval_first_moment(lo[idx], hi[idx])
    return MixMassTable(mass=mass, lam_mass=lam_mass, eps=eps, probe=x)


def _probs_from_table(mass: np.ndarray, lam_mass: np.ndarray) -> np.ndarray:
    """Optimal class probabilities from (possibly limit-scaled) mass tables.

    Coefficient of class i: mass[i, i] plus, over j != i, the lambda-weighted
    mass of (i, j) mixtures and the complementary weight of (j, i) mixtures.
    Classes with zero coefficient get probability zero.
    """
    k = mass.shape[0]
    num = np.empty(k)
    for i in range(k):
        cross = 0.0
        for j in range(k):
            if j == i:
                continue
            cross += lam_mass[i, j] + (mass[j, i] - lam_mass[j, i])
        num[i] = mass[i, i] + cross
    total = num.sum()
    if total <= 0.0:
        raise OutsideMixSupportError("probe is outside the eps-inflated mixture support")
    return num / total


def mixture_optimal_probs(
    ds: LabeledDataset, dist: MixingDistribution, x, eps: float
) -> np.ndarray:
    """Class probabilities of the Mixup-optimal classifier at radius eps."""
    table = mix_mass_table(ds, dist, x, eps)
    return _probs_from_table(table.mass, table.lam_mass)


def mixture_optimal_probs_symmetric(
    ds: LabeledDataset, dist: MixingDistribution, x, eps: float
) -> np.ndarray:
    """Simplified form for symmetric mixing laws: coeff_i = mass[i,i] + 2*sum lam_mass[i,j]."""
    if not dist.is_symmetric:
        raise ValueError("symmetric form requires a symmetric mixing distribution")
    table = mix_mass_table(ds, dist, x, eps)
    k = ds.k
    num = np.empty(k)
    for i in range(k):
        num[i] = table.mass[i, i] + 2.0 * sum(
            table.lam_mass[i, j] for j in range(k) if j != i
        )
    total = num.sum()
    if total <= 0.0:
        raise OutsideMixSupportError("probe is outside the eps-inflated mixture support")
    return num / total


def default_line_tolerance(ds: LabeledDataset) -> float:
    """Exact-incidence tolerance, scaled to the dataset's diameter."""
    return 1e-9 * max(ds.diameter(), 1.0)


def mixture_limit_probs(
    ds: LabeledDataset,
    dist: MixingDistribution,
    x,
    tol_line: float | None = None,
    return_hits: bool = False,
):
    """eps -> 0 limit of the optimal class probabilities, or None off-support.

    At a data point of class i the diagonal term dominates and the answer is
    the one-hot vector e_i.  Elsewhere, each ordered pair (p, q) whose open
    segment passes within tol_line of x contributes weight
    f(lam*) / (m^2 ||p - q||) at the through-x parameter lam*; the common
    2*eps factor of all interval masses cancels in the probability ratio.
    """
    x = np.asarray(x, float)
    if x.shape != (ds.dim,):
        raise ValueError(f"probe has dimension {x.shape}, dataset has {ds.dim}")
    if tol_line is None:
        tol_line = default_line_tolerance(ds)
    pts, labs, m, k = ds.points, ds.labels, ds.m, ds.k

    dists_to_points = np.sqrt(((pts - x[None, :]) ** 2).sum(1))
    on_point = np.flatnonzero(dists_to_points <= tol_line)
    if on_point.size:
        probs = np.zeros(k)
        probs[labs[on_point[0]] - 1] = 1.0
        return (probs, []) if return_hits else probs

    mass = np.zeros((k, k))
    lam_mass = np.zeros((k, k))
    hits = []
    inv_m2 = 1.0 / (m * m)
    for p_idx in range(m):
        d = pts[p_idx] - pts  # p - q for all q
        nrm2 = (d * d).sum(1)
        w = pts - x[None, :]  # q - x
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = -(w * d).sum(1) / nrm2
        z = lam[:, None] * pts[p_idx][None, :] + (1.0 - lam)[:, None] * pts
        resid = np.sqrt(((z - x[None, :]) ** 2).sum(1))
        good = (
            (np.arange(m) != p_idx)
            & (nrm2 > 0.0)
            & (lam > 0.0)
            & (lam < 1.0)
            & (resid <= tol_line)
        )
        for q_idx in np.flatnonzero(good):
            lam_star = float(lam[q_idx])
            nrm = float(np.sqrt(nrm2[q_idx]))
            wgt = inv_m2 * dist.density(lam_star) / nrm
            i, j = labs[p_idx] - 1, labs[q_idx] - 1
            mass[i, j] += wgt
            lam_mass[i, j] += lam_star * wgt
            hits.append(
                SegmentHit(
                    p_index=p_idx,
                    q_index=int(q_idx),
                    classes=(i + 1, j + 1),
                    lam_interval=(lam_star, lam_star),
                    lam_star=lam_star,
                    pair_norm=nrm,
                )
            )
    if mass.sum() <= 0.0:
        return (None, hits) if return_hits else None
    probs = _probs_from_table(mass, lam_mass)
    return (probs, hits) if return_hits else probs


def argmax_class(probs: np.ndarray) -> int:
    """1-based argmax class; exact ties break toward the lowest class index."""
    return int(np.argmax(probs)) + 1


@dataclass(frozen=True)
class GridSpec:
    """Rectangle and resolution for 2-D decision-region rasters."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int

    def xs(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.ymin, self.ymax, self.ny)


def boundary_grid(
    ds: LabeledDataset,
    dist: MixingDistribution,
    grid: GridSpec,
    eps: float | None = None,
    limit: bool = False,
    tol_line: float | None = None,
):
    """Argmax class per grid cell (0 where undefined) plus the full probabilities.

    Returns (labels, probs) with labels shaped (ny, nx) and probs
    (ny, nx, k).  Exactly one of eps / limit selects the evaluation mode.
    """
    if ds.dim != 2:
        raise ValueError("decision-region grids require a 2-D dataset")
    if limit == (eps is not None):
        raise ValueError("choose either a fixed eps or limit mode")
    labels = np.zeros((grid.ny, grid.nx), dtype=int)
    probs = np.zeros((grid.ny, grid.nx, ds.k))
    for iy, y in enumerate(grid.ys()):
        for ix, xv in enumerate(grid.xs()):
            pt = np.array([xv, y])
            if limit:
                p = mixture_limit_probs(ds, dist, pt, tol_line=tol_line)
            else:
                table = mix_mass_table(ds, dist, pt, eps)
                p = (
                    _probs_from_table(table.mass, table.lam_mass)
                    if table.in_mix_support
                    else None
                )
            if p is None:
                continue
            probs[iy, ix] = p
            labels[iy, ix] = argmax_class(p)
    return labels, probs


def save_grid_csv(path, grid: GridSpec, labels: np.ndarray, probs: np.ndarray) -> None:
    """Write `x,y,label,p1..pk` rows in row-major (y outer) order."""
    k = probs.shape[2]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "label"] + [f"p{i+1}" for i in range(k)])
        for iy, y in enumerate(grid.ys()):
            for ix, xv in enumerate(grid.xs()):
                writer.writerow(
                    [repr(float(xv)), repr(float(y)), int(labels[iy, ix])]
                    + [repr(float(v)) for v in probs[iy, ix]]
                )
