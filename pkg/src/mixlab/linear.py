"""Linear models on separable data: interpolators, max-margin certificates,
and the mixture logistic loss whose span-restricted minimizer recovers the
max-margin direction for symmetric mixing laws.

The loss depends on theta only through the per-point margins, so all pair and
quadrature sums run in margin space and a single d-dimensional matmul maps
gradients back to parameter space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset, signed_labels
from .mixing import MixingDistribution, expectation_rule

__all__ = [
    "DegenerateMixError",
    "InterpolationCertificate",
    "LinearClassifier",
    "MinimizeResult",
    "SingularGramError",
    "cosine",
    "min_norm_interpolator",
    "minimize_mixup_linear",
    "mixup_linear_loss",
    "optimal_margin_constant",
    "save_trials_csv",
]


class SingularGramError(ValueError):
    """Points are not linearly independent; the interpolation system is singular."""


class DegenerateMixError(ValueError):
    """Mixing law concentrated at 1/2 leaves the margin objective flat."""


@dataclass(frozen=True)
class LinearClassifier:
    """Weight vector constrained to the span of the data matrix."""

    theta: np.ndarray
    span_basis: np.ndarray

    def margins(self, y: np.ndarray) -> np.ndarray:
        return y * (self.span_basis @ self.theta)

    def off_span_norm(self) -> float:
        """Norm of the component outside the data span (should be ~0)."""
        X = self.span_basis
        coef, *_ = np.linalg.lstsq(X.T, self.theta, rcond=None)
        return float(np.linalg.norm(self.theta - X.T @ coef))


@dataclass(frozen=True)
class InterpolationCertificate:
    """Common margin k, Gram dual coefficients, and the support-vector check."""

    k: float
    dual_coeffs: np.ndarray
    is_max_margin: bool


def min_norm_interpolator(ds: LabeledDataset):
    """Equality interpolator with unit margins via the Gram system.

    Solves (X X^T) beta = y and sets theta = X^T beta, so y_i theta^T x_i = 1
    for every point.  This equals the hard-margin solution exactly when all
    dual coefficients y_i beta_i are positive (every point a support vector),
    which is what ``is_max_margin`` certifies.
    """
    X = ds.points
    y = signed_labels(ds)
    G = X @ X.T
    try:
        beta = np.linalg.solve(G, y)
    except np.linalg.LinAlgError as exc:
        raise SingularGramError("Gram matrix is singular; points must be independent") from exc
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularGramError(f"Gram matrix is numerically singular (cond={cond:.3g})")
    theta = X.T @ beta
    cert = InterpolationCertificate(
        k=1.0, dual_coeffs=beta, is_max_margin=bool(np.all(y * beta > 0.0))
    )
    return LinearClassifier(theta=theta, span_basis=X), cert


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _pair_arrays(ds: LabeledDataset, include_same_class: bool):
    m = ds.m
    s, t = np.divmod(np.arange(m * m), m)
    if not include_same_class:
        keep = ds.labels[s] != ds.labels[t]
        s, t = s[keep], t[keep]
    return s, t


def mixup_linear_loss(
    theta: np.ndarray,
    ds: LabeledDataset,
    dist: MixingDistribution,
    quadrature_nodes: int = 64,
    include_same_class: bool = True,
):
    """Mixture logistic loss and gradient for a linear scorer theta^T x.

    Averages over ordered point pairs; each pair's lambda-expectation is a
    Gauss quadrature against the mixing density.  Same-class pairs (diagonal
    included) reduce to plain logistic terms with a one-hot label and can be
    excluded to isolate the cross-class part of the objective, whose
    minimizer has margins exactly ``optimal_margin_constant(dist)``.
    """
    theta = np.asarray(theta, float)
    X, y = ds.points, signed_labels(ds)
    lam, w = expectation_rule(dist, quadrature_nodes)
    s, t = _pair_arrays(ds, include_same_class)
    n_pairs = s.size
    u = X @ theta
    A = u[s][:, None] * lam[None, :] + u[t][:, None] * (1.0 - lam)[None, :]
    ys, yt = y[s][:, None], y[t][:, None]
    terms = lam[None, :] * np.logaddexp(0.0, -ys * A) + (1.0 - lam)[None, :] * np.logaddexp(
        0.0, -yt * A
    )
    loss = float((terms * w[None, :]).sum() / n_pairs)
    dA = (
        -(lam[None, :] * ys * _sigmoid(-ys * A))
        - (1.0 - lam)[None, :] * yt * _sigmoid(-yt * A)
    ) * w[None, :] / n_pairs
    du = np.zeros(ds.m)
    np.add.at(du, s, (dA * lam[None, :]).sum(axis=1))
    np.add.at(du, t, (dA * (1.0 - lam)[None, :]).sum(axis=1))
    grad = X.T @ du
    return loss, grad


@dataclass(frozen=True)
class MinimizeResult:
    classifier: LinearClassifier
    loss: float
    grad_norm: float
    iters: int
    converged: bool


def minimize_mixup_linear(
    ds: LabeledDataset,
    dist: MixingDistribution,
    max_iters: int = 20000,
    grad_tol: float = 1e-6,
    quadrature_nodes: int = 64,
    include_same_class: bool = True,
) -> MinimizeResult:
    """Gradient descent with backtracking on the mixture logistic loss.

    Requires a symmetric mixing law.  Iterates stay in the span of the data
    automatically because the gradient is X^T (margin-space gradient); the
    start point is the origin.  Non-convergence is reported, not raised.
    """
    if not dist.is_symmetric:
        raise ValueError("the margin equivalence requires a symmetric mixing distribution")
    theta = np.zeros(ds.dim)
    step = 1.0
    loss, grad = mixup_linear_loss(theta, ds, dist, quadrature_nodes, include_same_class)
    iters = 0
    for iters in range(1, max_iters + 1):
        gnorm2 = float(grad @ grad)
        if math.sqrt(gnorm2) <= grad_tol:
            break
        step = min(step * 2.0, 1e8)
        while True:
            cand = theta - step * grad
            cand_loss, cand_grad = mixup_linear_loss(
                cand, ds, dist, quadrature_nodes, include_same_class
            )
            if cand_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-18:
                break
        if step < 1e-18:
            break
        theta, loss, grad = cand, cand_loss, cand_grad
    gnorm = float(np.linalg.norm(grad))
    return MinimizeResult(
        classifier=LinearClassifier(theta=theta, span_basis=ds.points),
        loss=loss,
        grad_norm=gnorm,
        iters=iters,
        converged=gnorm <= grad_tol,
    )


def optimal_margin_constant(
    dist: MixingDistribution, tol: float = 1e-12, quadrature_nodes: int = 64
) -> float:
    """The common margin minimizing the cross-class mixture objective.

    Minimizes phi(u) = E[lam*log(1+e^((1-2lam)u)) + (1-lam)*log(1+e^((2lam-1)u)))]
    by safeguarded Newton.  phi'(0) = -E[(1-2lam)^2]/2 < 0 for any
    non-degenerate symmetric law, and phi' turns positive for large u, so the
    minimizer is a positive root of phi'.
    """
    if not dist.is_symmetric:
        raise ValueError("margin constant is defined for symmetric mixing distributions")
    lam, w = expectation_rule(dist, quadrature_nodes)
    spread = float(np.sum(w * (1.0 - 2.0 * lam) ** 2))
    if spread < 1e-9:
        raise DegenerateMixError(
            "mixing law is concentrated at 1/2; the margin objective is flat"
        )
    c1 = 1.0 - 2.0 * lam
    c2 = 2.0 * lam - 1.0

    def dphi(u):
        return float(np.sum(w * (lam * c1 * _sigmoid(c1 * u) + (1 - lam) * c2 * _sigmoid(c2 * u))))

    def d2phi(u):
        s1 = _sigmoid(c1 * u)
        s2 = _sigmoid(c2 * u)
        return float(
            np.sum(w * (lam * c1**2 * s1 * (1 - s1) + (1 - lam) * c2**2 * s2 * (1 - s2)))
        )

    lo, hi = 0.0, 1.0
    while dphi(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise DegenerateMixError("margin objective has no interior minimum")
    u = 0.5 * (lo + hi)
    for _ in range(200):
        f = dphi(u)
        if abs(f) < 1e-15 or hi - lo < tol:
            break
        if f > 0:
            hi = u
        else:
            lo = u
        fp = d2phi(u)
        nxt = u - f / fp if fp > 0 else 0.5 * (lo + hi)
        u = nxt if lo < nxt < hi else 0.5 * (lo + hi)
    return u


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def save_trials_csv(path, rows) -> None:
    """Rows of (seed, is_max_margin, cosine, k_mixup, grad_norm, iters)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "is_max_margin", "cosine", "k_mixup", "grad_norm", "iters"])
        for row in rows:
            writer.writerow(
                [row[0], int(row[1])] + [repr(float(v)) for v in row[2:5]] + [int(row[5])]
            )
