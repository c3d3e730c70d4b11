"""Sigma-node construction and weight algebra for the unscented transform.

A weight set bundles everything the filters consume: the scaled offset
vectors, the mean/covariance weight vectors, the full weight matrix ``W``,
the factor ``|W|^{1/2}`` with its signature vector (so indefinite weights can
ride through array algorithms), and the node ordering.

Two orderings exist.  ``standard`` puts the center node first.  ``neg_last``
cycles the center node to the last column, so the one possibly-negative
covariance weight sits at the end - exactly the layout the J-orthogonal
triangularizations need.  The ordering is applied consistently to the offset
columns and both weight vectors, so weighted sums are ordering-invariant.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParams

ORDERINGS = ("standard", "neg_last")


@dataclass(frozen=True)
class UtParams:
    """Sigma-point scaling parameters (alpha, beta, kappa) for dimension n.

    ``kappa=None`` selects ``3 - n``, the classical choice that makes the
    center weights negative for n > 3.
    """

    n: int
    alpha: float = 1.0
    beta: float = 0.0
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParams("state dimension must be >= 1")
        if self.alpha == 0.0:
            raise InvalidParams("alpha must be nonzero")
        if self.n + self.lam <= 0.0:
            raise InvalidParams(f"n + lambda = {self.n + self.lam} must be positive")

    @property
    def kappa_value(self) -> float:
        return 3.0 - self.n if self.kappa is None else self.kappa

    @property
    def lam(self) -> float:
        return self.alpha**2 * (self.kappa_value + self.n) - self.n


@dataclass(frozen=True)
class UtWeights:
    """Immutable sigma-node weight set; shareable across threads and runs."""

    params: UtParams
    ordering: str
    xi: np.ndarray  # (n, 2n+1) scaled offsets, ordering applied
    wm: np.ndarray  # (2n+1,) mean weights
    wc: np.ndarray  # (2n+1,) covariance weights
    w_mat: np.ndarray  # (2n+1, 2n+1) weight matrix W
    w_sqrt_abs: np.ndarray  # |W|^{1/2} with W = |W|^{1/2} diag(signs) |W|^{T/2}
    signs: np.ndarray  # (2n+1,) signature, +/-1, sign(0) := +1
    center: int  # column index of the center node
    plus_cols: np.ndarray = field(repr=False)  # columns of the +offset nodes
    minus_cols: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def n_nodes(self) -> int:
        return 2 * self.params.n + 1

    @property
    def noncenter_cols(self) -> np.ndarray:
        return np.concatenate([self.plus_cols, self.minus_cols])


def make_weights(params: UtParams, ordering: str = "standard") -> UtWeights:
    """Build the full weight set for the given scaling parameters."""
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    n = params.n
    lam = params.lam
    nn = 2 * n + 1
    spread = math.sqrt(n + lam)

    xi = np.zeros((n, nn))
    xi[:, 1 : n + 1] = spread * np.eye(n)
    xi[:, n + 1 :] = -spread * np.eye(n)

    wm = np.full(nn, 1.0 / (2.0 * (n + lam)))
    wm[0] = lam / (n + lam)
    wc = wm.copy()
    wc[0] = lam / (n + lam) + 1.0 - params.alpha**2 + params.beta

    if ordering == "neg_last":
        perm = np.r_[1:nn, 0]
        xi = xi[:, perm]
        wm = wm[perm]
        wc = wc[perm]
        center = nn - 1
        plus_cols = np.arange(0, n)
        minus_cols = np.arange(n, 2 * n)
    else:
        center = 0
        plus_cols = np.arange(1, n + 1)
        minus_cols = np.arange(n + 1, nn)

    dev = np.eye(nn) - np.outer(wm, np.ones(nn))
    w_mat = dev @ np.diag(wc) @ dev.T
    w_sqrt_abs = dev @ np.diag(np.sqrt(np.abs(wc)))
    signs = np.where(wc < 0.0, -1.0, 1.0)

    return UtWeights(
        params=params,
        ordering=ordering,
        xi=xi,
        wm=wm,
        wc=wc,
        w_mat=w_mat,
        w_sqrt_abs=w_sqrt_abs,
        signs=signs,
        center=center,
        plus_cols=plus_cols,
        minus_cols=minus_cols,
    )


def sigma_matrix(mean: np.ndarray, factor: np.ndarray, weights: UtWeights) -> np.ndarray:
    """Node matrix with column i equal to ``mean + factor @ xi_i``."""
    return mean[:, None] + factor @ weights.xi


def recover_sqrt_from_sigma(
    nodes: np.ndarray, mean: np.ndarray, weights: UtWeights
) -> np.ndarray:
    """Covariance factor back out of a propagated node matrix.

    Takes the +offset columns, removes the mean, rescales, and projects onto
    the lower triangle; the projection discards roundoff that leaked above
    the diagonal during integration.
    """
    dev = nodes[:, weights.plus_cols] - mean[:, None]
    return np.tril(dev) / math.sqrt(weights.n + weights.lam)
