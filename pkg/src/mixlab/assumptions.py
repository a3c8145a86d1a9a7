"""Collinearity and margin audits for finite datasets.

Checks the two geometric conditions that govern whether mixture training can
pin down (and extend) the original labels: no support point may sit strictly
inside a segment ending in a foreign class, and off-support probe points must
sit near the friendly end of every segment through their neighborhood.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset
from .mixing import MixingDistribution
from .oracle import SegmentHit, _pair_intervals, mix_mass_table

__all__ = [
    "CollinearityViolation",
    "MarginConditionResult",
    "check_margin_condition",
    "collinearity_violations",
    "margin_radius",
    "min_mix_clearance",
    "save_violations_csv",
]


@dataclass(frozen=True)
class CollinearityViolation:
    """Support point x_index sits inside the (u_index, v_index) segment."""

    x_index: int
    u_index: int
    v_index: int
    lam: float
    residual: float


def collinearity_violations(ds: LabeledDataset, tol: float = 1e-9):
    """All triples (x, u, v) with x within tol of a segment ending in a foreign class.

    x ranges over the support; u over all points except x itself; v over
    points whose class differs from x's.  Only interior parameters
    lam in (0, 1) count: lam = 1 would make x = u trivially and lam = 0 would
    put x inside a foreign class, contradicting disjoint supports.  An empty
    result means the no-collinearity condition holds at this tolerance.
    """
    pts, labs, m = ds.points, ds.labels, ds.m
    out = []
    for xi in range(m):
        x = pts[xi]
        foreign = labs != labs[xi]
        for ui in range(m):
            if ui == xi:
                continue
            u = pts[ui]
            d = u - pts  # u - v for all candidate v
            nrm2 = (d * d).sum(1)
            w = pts - x[None, :]  # v - x
            with np.errstate(divide="ignore", invalid="ignore"):
                lam = -(w * d).sum(1) / nrm2
            z = lam[:, None] * u[None, :] + (1.0 - lam)[:, None] * pts
            resid = np.sqrt(((z - x[None, :]) ** 2).sum(1))
            good = foreign & (nrm2 > 0) & (lam > 0.0) & (lam < 1.0) & (resid <= tol)
            good[xi] = False
            for vi in np.flatnonzero(good):
                out.append(
                    CollinearityViolation(
                        x_index=xi,
                        u_index=ui,
                        v_index=int(vi),
                        lam=float(lam[vi]),
                        residual=float(resid[vi]),
                    )
                )
    return out


def save_violations_csv(path, violations) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_idx", "u_idx", "v_idx", "lambda", "residual"])
        for v in violations:
            writer.writerow([v.x_index, v.u_index, v.v_index, repr(v.lam), repr(v.residual)])


def min_mix_clearance(
    ds_train: LabeledDataset,
    dist: MixingDistribution,
    n_samples: int,
    reference: LabeledDataset,
    seed: int,
):
    """Minimum distance from sampled mixture points to foreign-class reference points.

    Draws n_samples mixtures z = lam*s + (1-lam)*t with (s, t) uniform ordered
    pairs and lam from the mixing law, then measures each z against reference
    points whose class is neither s's nor t's.  Returns (min_distance,
    n_contributing); min_distance is +inf when no sample had an eligible
    reference class (e.g. two-class data mixed across classes only).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if reference.dim != ds_train.dim:
        raise ValueError("reference dimension mismatch")
    rng = np.random.default_rng(seed)
    m = ds_train.m
    s_idx = rng.integers(m, size=n_samples)
    t_idx = rng.integers(m, size=n_samples)
    lam = dist.sample(rng, size=n_samples)
    z = lam[:, None] * ds_train.points[s_idx] + (1.0 - lam)[:, None] * ds_train.points[t_idx]
    cls_s = ds_train.labels[s_idx]
    cls_t = ds_train.labels[t_idx]

    best = math.inf
    contributing = 0
    ref_by_class = {i: reference.class_points(i) for i in range(1, reference.k + 1)}
    for n in range(n_samples):
        excluded = (cls_s[n], cls_t[n])
        dmin = math.inf
        for i, ref_pts in ref_by_class.items():
            if i in excluded:
                continue
            d = np.sqrt(((ref_pts - z[n][None, :]) ** 2).sum(1)).min()
            dmin = min(dmin, float(d))
        if math.isfinite(dmin):
            contributing += 1
            best = min(best, dmin)
    return best, contributing


@dataclass(frozen=True)
class MarginConditionResult:
    """Outcome of the pointwise margin audit for one (probe, class) pair."""

    holds: bool
    witnesses: list
    in_mix_support: bool
    mass_ordering_ok: bool


def check_margin_condition(
    ds: LabeledDataset,
    x,
    cls: int,
    eps: float,
    delta: float,
    tol_line: float | None = None,
    dist: MixingDistribution | None = None,
) -> MarginConditionResult:
    """Audit the margin condition for class ``cls`` at probe x and scale eps.

    Requires, for lambda intervals computed exactly at radius eps:
      (a) every segment from class cls to a foreign class that meets the
          eps-ball does so only with lambda > 1 - delta (x hugs the cls end);
      (b) no segment between two foreign classes meets the ball;
      (c) mass(cls, j) >= mass(j, cls) for every foreign j.
    Zero-length (tangent) intervals have measure zero and never violate;
    tol_line sets the spatial scale below which a hit counts as tangent.
    A probe meeting no segments at all passes vacuously with
    in_mix_support=False.  ``dist`` defaults to the uniform law, which makes
    the measure ordering in (c) a plain comparison of interval lengths.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if dist is None:
        dist = MixingDistribution.uniform()
    if tol_line is None:
        tol_line = 1e-9 * max(ds.diameter(), 1.0)
    x = np.asarray(x, float)
    pts, labs = ds.points, ds.labels
    pi, qi, lo, hi = _pair_intervals(pts, x, eps)
    witnesses = []
    ci = cls
    for idx in np.flatnonzero(hi >= lo):
        a, b = pts[pi[idx]], pts[qi[idx]]
        nrm = float(np.linalg.norm(a - b))
        min_len = tol_line / nrm if nrm > 0 else 0.0
        i, j = int(labs[pi[idx]]), int(labs[qi[idx]])
        if i == ci and j != ci:
            bad = min(hi[idx], 1.0 - delta) - lo[idx] > min_len
        elif i != ci and j != ci:
            bad = hi[idx] - lo[idx] > min_len
        else:
            bad = False
        if bad:
            witnesses.append(
                SegmentHit(
                    p_index=int(pi[idx]),
                    q_index=int(qi[idx]),
                    classes=(i, j),
                    lam_interval=(float(lo[idx]), float(hi[idx])),
                    lam_star=None,
                    pair_norm=nrm,
                )
            )
    table = mix_mass_table(ds, dist, x, eps)
    mass_ok = all(
        table.mass[ci - 1, j] >= table.mass[j, ci - 1] - 1e-12
        for j in range(ds.k)
        if j != ci - 1
    )
    holds = (not witnesses) and mass_ok
    return MarginConditionResult(
        holds=holds,
        witnesses=witnesses,
        in_mix_support=table.in_mix_support,
        mass_ordering_ok=mass_ok,
    )


def margin_radius(ds: LabeledDataset, cls: int) -> float:
    """Half the smallest distance from class ``cls`` to any other class."""
    if ds.k < 2:
        raise ValueError("margin radius needs at least two classes")
    own = ds.class_points(cls)
    best = math.inf
    for j in range(1, ds.k + 1):
        if j == cls:
            continue
        other = ds.class_points(j)
        d = np.sqrt(((own[:, None, :] - other[None, :, :]) ** 2).sum(-1)).min()
        best = min(best, float(d))
    return 0.5 * best
