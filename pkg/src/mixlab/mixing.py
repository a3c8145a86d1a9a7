"""Mixing distributions on [0, 1]: density, CDF, interval moments, sampling.

Three kinds are supported: the symmetric Beta(alpha, alpha) family, the
uniform distribution, and user-supplied tabulated densities interpreted as
piecewise-linear (trapezoid) interpolants.  Beta CDF values come from the
regularized incomplete beta function evaluated by a modified-Lentz continued
fraction, so interval masses stay accurate even when alpha is large and the
mass is sharply concentrated around 1/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "InvalidDistributionError",
    "MixingDistribution",
    "alpha_threshold",
    "expectation_rule",
    "regularized_incomplete_beta",
]

_BETACF_MAX_ITERS = 400
_BETACF_EPS = 1e-15
_FPMIN = 1e-300

# alpha below 1/2 gives densities so singular at the endpoints that the
# interval queries lose the accuracy the oracle needs; rejected up front.
_MIN_ALPHA = 0.5


class InvalidDistributionError(ValueError):
    """Raised for unusable mixing distributions (bad alpha, negative table...)."""


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITERS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise InvalidDistributionError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to ~1e-13 absolute over the supported range.

    Uses the symmetry switch at x = (a+1)/(a+b+2) so the continued fraction
    is always evaluated in its fast-converging regime.
    """
    if a <= 0.0 or b <= 0.0:
        raise InvalidDistributionError(f"beta parameters must be positive, got ({a}, {b})")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def alpha_threshold(eps: float) -> float:
    """Alpha above which Beta(a, a) puts more than half its mass in [1/2-eps, 1/2+eps].

    Returns (ln(4)/eps^2 - 1)/2, the sub-gaussian concentration threshold.
    It is conservative: the actual central mass at this alpha is well above 1/2.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return 0.5 * (math.log(4.0) / eps**2 - 1.0)


def _clamp_unit(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


@dataclass(frozen=True)
class MixingDistribution:
    """Immutable mixing law for the coefficient lambda on [0, 1].

    Construct via the ``beta``, ``uniform`` or ``tabulated`` classmethods.
    All queries are pure; instances are safe to share across threads.
    """

    kind: str
    alpha: float | None = None
    grid: np.ndarray | None = field(default=None, repr=False)
    dens: np.ndarray | None = field(default=None, repr=False)
    renorm_factor: float = 1.0

    # ------------------------------------------------------------------ #
    # constructors
    # ------------------------------------------------------------------ #

    @classmethod
    def beta(cls, alpha: float) -> "MixingDistribution":
        if alpha <= 0:
            raise InvalidDistributionError(f"alpha must be positive, got {alpha}")
        if alpha < _MIN_ALPHA:
            raise InvalidDistributionError(
                f"alpha < {_MIN_ALPHA} is unsupported (endpoint-singular density), got {alpha}"
            )
        return cls(kind="beta", alpha=float(alpha))

    @classmethod
    def uniform(cls) -> "MixingDistribution":
        return cls(kind="uniform")

    @classmethod
    def tabulated(cls, lam: np.ndarray, dens: np.ndarray) -> "MixingDistribution":
        """Piecewise-linear density from (lambda, density) samples.

        The grid must be strictly increasing, start at 0 and end at 1; the
        density is renormalized to integrate to 1 and the factor recorded.
        """
        lam = np.asarray(lam, dtype=float)
        dens = np.asarray(dens, dtype=float)
        if lam.ndim != 1 or lam.shape != dens.shape or lam.size < 2:
            raise InvalidDistributionError("tabulated grid needs >= 2 matching (lambda, density) pairs")
        if np.any(np.diff(lam) <= 0):
            raise InvalidDistributionError("tabulated lambda grid must be strictly increasing")
        if lam[0] != 0.0 or lam[-1] != 1.0:
            raise InvalidDistributionError("tabulated grid must span [0, 1] exactly")
        if np.any(dens < 0):
            raise InvalidDistributionError("tabulated density has negative entries")
        total = float(np.trapezoid(dens, lam))
        if total <= 0:
            raise InvalidDistributionError("tabulated density integrates to zero")
        return cls(
            kind="tabulated",
            grid=lam.copy(),
            dens=dens / total,
            renorm_factor=total,
        )

    @classmethod
    def tabulated_from_csv(cls, path) -> "MixingDistribution":
        """Load a `lambda,density` CSV table."""
        lams, denss = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["lambda", "density"]:
                raise InvalidDistributionError(f"{path}: expected header 'lambda,density'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    lams.append(float(row[0]))
                    denss.append(float(row[1]))
                except (ValueError, IndexError) as exc:
                    raise InvalidDistributionError(f"{path}:{lineno}: bad row {row!r}") from exc
        return cls.tabulated(np.array(lams), np.array(denss))

    # ------------------------------------------------------------------ #
    # pointwise queries
    # ------------------------------------------------------------------ #

    @property
    def is_symmetric(self) -> bool:
        if self.kind in ("beta", "uniform"):
            return True
        mirrored = self.density(1.0 - self.grid)
        return bool(np.allclose(mirrored, self.dens, atol=1e-9, rtol=0))

    def density(self, x):
        """Density f(x); vectorized over x."""
        scalar = np.isscalar(x) or np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "uniform":
            out = np.where((x >= 0) & (x <= 1), 1.0, 0.0)
        elif self.kind == "beta":
            a = self.alpha
            if a == 1.0:
                out = np.where((x >= 0) & (x <= 1), 1.0, 0.0)
            else:
                ln_norm = math.lgamma(2 * a) - 2 * math.lgamma(a)
                inside = (x > 0) & (x < 1)
                out = np.zeros_like(x)
                xs = np.clip(x, 1e-300, 1 - 1e-16)
                vals = np.exp(ln_norm + (a - 1) * (np.log(xs) + np.log1p(-xs)))
                out[inside] = vals[inside]
        else:
            out = np.interp(x, self.grid, self.dens, left=0.0, right=0.0)
        return float(out[0]) if scalar else out

    def cdf(self, x: float) -> float:
        """P(lambda <= x) for x in [0, 1]."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"cdf argument must lie in [0, 1], got {x}")
        if self.kind == "uniform":
            return x
        if self.kind == "beta":
            return regularized_incomplete_beta(self.alpha, self.alpha, x)
        return self._tab_integral(0.0, x, power=0)

    def interval_mass(self, a: float, b: float) -> float:
        """P(lambda in [a, b]); endpoints are clamped to [0, 1]."""
        a, b = _clamp_unit(a), _clamp_unit(b)
        if b <= a:
            return 0.0
        return max(self.cdf(b) - self.cdf(a), 0.0)

    def interval_first_moment(self, a: float, b: float) -> float:
        """Integral of lambda * f(lambda) over [a, b] (clamped)."""
        a, b = _clamp_unit(a), _clamp_unit(b)
        if b <= a:
            return 0.0
        if self.kind == "uniform":
            return 0.5 * (b * b - a * a)
        if self.kind == "beta":
            # lambda * beta(lambda; a, a) = (1/2) beta(lambda; a+1, a)
            al = self.alpha
            return 0.5 * (
                regularized_incomplete_beta(al + 1.0, al, b)
                - regularized_incomplete_beta(al + 1.0, al, a)
            )
        return self._tab_integral(a, b, power=1)

    @property
    def mean(self) -> float:
        return self.interval_first_moment(0.0, 1.0)

    @property
    def variance(self) -> float:
        """Var(lambda).  Beta(a, a) has variance 1/(8a + 4); uniform 1/12."""
        if self.kind == "uniform":
            return 1.0 / 12.0
        if self.kind == "beta":
            return 1.0 / (8.0 * self.alpha + 4.0)
        second = self._tab_integral(0.0, 1.0, power=2)
        mu = self.mean
        return second - mu * mu

    # ------------------------------------------------------------------ #
    # sampling
    # ------------------------------------------------------------------ #

    def sample(self, rng: np.random.Generator, size=None):
        """Seed-reproducible draws; Beta uses two gamma variates per draw."""
        if self.kind == "uniform":
            return rng.uniform(0.0, 1.0, size=size)
        if self.kind == "beta":
            g1 = rng.standard_gamma(self.alpha, size=size)
            g2 = rng.standard_gamma(self.alpha, size=size)
            return g1 / (g1 + g2)
        u = rng.uniform(0.0, 1.0, size=size)
        return self._tab_ppf(np.atleast_1d(u)) if size is not None else float(self._tab_ppf(np.array([u]))[0])

    # ------------------------------------------------------------------ #
    # tabulated helpers
    # ------------------------------------------------------------------ #

    def _tab_integral(self, a: float, b: float, power: int) -> float:
        """Exact integral of lambda^power * f over [a, b] for the trapezoid density.

        The integrand is polynomial of degree power+1 on each grid cell, so a
        2-point (power <= 2: 3-point) Gauss rule per overlapped cell is exact.
        """
        npts = 2 if power <= 1 else 3
        gx, gw = np.polynomial.legendre.leggauss(npts)
        lo = np.searchsorted(self.grid, a, side="right") - 1
        hi = np.searchsorted(self.grid, b, side="left")
        total = 0.0
        for seg in range(max(lo, 0), min(hi, self.grid.size - 1)):
            s0, s1 = max(self.grid[seg], a), min(self.grid[seg + 1], b)
            if s1 <= s0:
                continue
            mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
            xs = mid + half * gx
            total += half * float(np.sum(gw * xs**power * self.density(xs)))
        return total

    def _tab_ppf(self, u: np.ndarray) -> np.ndarray:
        node_cdf = self._tab_node_cdf()
        seg = np.clip(np.searchsorted(node_cdf, u, side="right") - 1, 0, self.grid.size - 2)
        x0, x1 = self.grid[seg], self.grid[seg + 1]
        f0, f1 = self.dens[seg], self.dens[seg + 1]
        rem = u - node_cdf[seg]
        slope = (f1 - f0) / (x1 - x0)
        out = np.empty_like(u)
        lin = np.abs(slope) < 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            out[lin] = np.where(f0[lin] > 0, rem[lin] / np.maximum(f0[lin], 1e-300), 0.0)
            disc = np.maximum(f0**2 + 2.0 * slope * rem, 0.0)
            out[~lin] = ((-f0 + np.sqrt(disc)) / slope)[~lin]
        return np.clip(x0 + out, 0.0, 1.0)

    def _tab_node_cdf(self) -> np.ndarray:
        cell = 0.5 * (self.dens[:-1] + self.dens[1:]) * np.diff(self.grid)
        return np.concatenate([[0.0], np.cumsum(cell)])


@lru_cache(maxsize=64)
def _cached_leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def expectation_rule(dist: MixingDistribution, nodes: int = 64):
    """Quadrature rule (points, weights) with E[g(lambda)] ~= sum(w * g(points)).

    Gauss-Legendre against the density.  For Beta(a, a) with integer-ish a the
    density is a polynomial of degree 2a-2, so the node count is bumped to
    keep the rule effectively exact at large alpha.
    """
    if nodes < 16:
        raise ValueError("need at least 16 quadrature nodes")
    if dist.kind == "tabulated":
        gx, gw = _cached_leggauss(16)
        pts, wts = [], []
        for seg in range(dist.grid.size - 1):
            s0, s1 = dist.grid[seg], dist.grid[seg + 1]
            if s1 <= s0:
                continue
            mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
            xs = mid + half * gx
            pts.append(xs)
            wts.append(half * gw * dist.density(xs))
        return np.concatenate(pts), np.concatenate(wts)
    n_eff = nodes
    if dist.kind == "beta":
        n_eff = max(nodes, int(math.ceil(dist.alpha)) + 16)
    gx, gw = _cached_leggauss(n_eff)
    lam = 0.5 * (gx + 1.0)
    w = 0.5 * gw * dist.density(lam)
    return lam, w
