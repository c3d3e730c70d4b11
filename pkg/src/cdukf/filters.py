"""Continuous-discrete sigma-point filters: fourteen variants, one interface.

A variant pairs a time update with a measurement update:

* time update ``mde``  - integrate the mean together with either the full
  covariance (conventional update) or its lower Cholesky factor (square-root
  updates) between sampling instants;
* time update ``spde`` - integrate all 2n+1 sigma nodes directly and read the
  predicted mean/factor back off the node matrix, which removes the
  per-evaluation factorization from the right-hand side;

* measurement update ``conventional`` - full-covariance update;
* ``pseudo-a/b/c``      - array square-root updates that finish with rank-one
  Cholesky updates (m+1, 2 and 1 of them per step respectively), so an
  infeasible downdate remains a failure mode;
* ``true-a/b/c``        - the same array algebra with every rank-one update
  replaced by a J-orthogonal triangularization, leaving the initial-prior
  factorization as the only Cholesky decomposition in the filter's lifetime.

All failure modes surface as typed exceptions; :func:`run_filter` converts
them into a failure record naming the step, instant and cause, because the
benchmark treats estimator shutoff as data.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (
    CholeskyFailureInRhs,
    FilterMathError,
    HyperbolicBreakdown,
    IntegrationError,
    NotPositiveDefinite,
    ResidualCovSingular,
    ShapeMismatch,
)
from .linalg import (
    chol_update_rank1,
    cholesky_lower,
    jqr_r_factor,
    phi_map,
    qr_r_factor,
    tri_solve,
)
from .model import SamplingSchedule, SystemModel
from .ode import OdeOptions, integrate
from .ut import UtWeights, recover_sqrt_from_sigma, sigma_matrix

TIME_UPDATES = ("mde", "spde")
MEASUREMENT_UPDATES = (
    "conventional",
    "pseudo-a",
    "pseudo-b",
    "pseudo-c",
    "true-a",
    "true-b",
    "true-c",
)


@dataclass(frozen=True)
class FilterVariant:
    """A (time update, measurement update) pair; see the module docstring."""

    time_update: str
    measurement_update: str

    def __post_init__(self):
        if self.time_update not in TIME_UPDATES:
            raise ValueError(f"unknown time update {self.time_update!r}")
        if self.measurement_update not in MEASUREMENT_UPDATES:
            raise ValueError(f"unknown measurement update {self.measurement_update!r}")

    @property
    def name(self) -> str:
        return f"{self.time_update}-{self.measurement_update}"

    @property
    def is_square_root(self) -> bool:
        return self.measurement_update != "conventional"

    @property
    def needs_neg_last(self) -> bool:
        return self.measurement_update.startswith("true")

    @property
    def time_update_kind(self) -> str:
        """``mde`` (full covariance), ``mde_sr`` (factor ODE) or ``spde``."""
        if self.time_update == "spde":
            return "spde"
        return "mde_sr" if self.is_square_root else "mde"

    @classmethod
    def parse(cls, name: str) -> "FilterVariant":
        head, _, tail = name.partition("-")
        return cls(head, tail)


ALL_VARIANT_NAMES = tuple(
    f"{tu}-{mu}" for mu in MEASUREMENT_UPDATES for tu in TIME_UPDATES
)


def weights_ordering_for(variant: FilterVariant) -> str:
    return "neg_last" if variant.needs_neg_last else "standard"


@dataclass(frozen=True)
class Estimate:
    """Filtered state: mean plus full covariance or its lower factor."""

    t: float
    mean: np.ndarray
    cov: Optional[np.ndarray] = None
    cov_factor: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.cov is None) == (self.cov_factor is None):
            raise ValueError("exactly one of cov / cov_factor must be given")

    @property
    def is_factored(self) -> bool:
        return self.cov_factor is not None

    def covariance(self) -> np.ndarray:
        if self.cov is not None:
            return self.cov
        return self.cov_factor @ self.cov_factor.T


@dataclass
class InnovationData:
    """Measurement-update internals kept for diagnostics and cross-checks."""

    z_pred: np.ndarray
    gain: np.ndarray
    re_full: Optional[np.ndarray] = None
    re_factor: Optional[np.ndarray] = None  # lower triangular
    cross: Optional[np.ndarray] = None  # P_xz
    cross_norm: Optional[np.ndarray] = None  # P_xz scaled by the inverse factor


@dataclass(frozen=True)
class FilterFailure:
    """Where and why a run shut off."""

    step: str
    k: int
    t: float
    cause: str
    detail: str = ""


@dataclass
class FilterRunResult:
    estimates: List[Estimate]
    failure: Optional[FilterFailure] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def _gqg(model: SystemModel) -> np.ndarray:
    return model.G @ model.Q @ model.G.T


# ---------------------------------------------------------------------------
# time updates


def time_update_mde(
    est: Estimate, span, model: SystemModel, weights: UtWeights, opts: OdeOptions, gqg=None
) -> Estimate:
    """Propagate mean and full covariance through the moment ODEs.

    The flat ODE state packs ``[mean | covariance columns]`` (n^2 + n
    entries).  Every right-hand-side evaluation re-factorizes the current
    covariance to rebuild the node matrix, which is exactly the conventional
    filter's roundoff weakness: a failed factorization aborts the
    integration.
    """
    n = model.n
    xi, wm, w_mat = weights.xi, weights.wm, weights.w_mat
    gqg = _gqg(model) if gqg is None else gqg

    def rhs(t, y):
        x = y[:n]
        p = y[n:].reshape((n, n), order="F")
        try:
            l = cholesky_lower(p)
        except NotPositiveDefinite as exc:
            raise CholeskyFailureInRhs(str(exc)) from None
        nodes = x[:, None] + l @ xi
        fx = model.drift(t, nodes)
        cross = (nodes @ w_mat) @ fx.T
        dp = cross + cross.T + gqg
        out = np.empty_like(y)
        out[:n] = fx @ wm
        out[n:] = dp.ravel(order="F")
        return out

    y0 = np.concatenate([est.mean, np.asarray(est.cov).ravel(order="F")])
    res = integrate(rhs, y0, span, opts)
    x = res.y_end[:n]
    p = res.y_end[n:].reshape((n, n), order="F")
    return Estimate(t=float(span[1]), mean=x, cov=0.5 * (p + p.T))


def time_update_mde_sr(
    est: Estimate, span, model: SystemModel, weights: UtWeights, opts: OdeOptions, gqg=None
) -> Estimate:
    """Propagate mean and the lower covariance factor through the factor ODE.

    The factor derivative is ``L @ phi(M)`` with ``M = L^{-1} C L^{-T}``
    evaluated by two triangular solves; no factorization happens inside the
    right-hand side.  The endpoint factor is projected back onto the lower
    triangle to shed integrator roundoff.
    """
    n = model.n
    xi, wm, w_mat = weights.xi, weights.wm, weights.w_mat
    gqg = _gqg(model) if gqg is None else gqg

    def rhs(t, y):
        x = y[:n]
        l = y[n:].reshape((n, n), order="F")
        nodes = x[:, None] + l @ xi
        fx = model.drift(t, nodes)
        cross = (nodes @ w_mat) @ fx.T
        c = cross + cross.T + gqg
        m_mat = tri_solve(l, tri_solve(l, c).T).T
        dl = l @ phi_map(m_mat)
        out = np.empty_like(y)
        out[:n] = fx @ wm
        out[n:] = dl.ravel(order="F")
        return out

    y0 = np.concatenate([est.mean, np.asarray(est.cov_factor).ravel(order="F")])
    res = integrate(rhs, y0, span, opts)
    x = res.y_end[:n]
    l = np.tril(res.y_end[n:].reshape((n, n), order="F"))
    return Estimate(t=float(span[1]), mean=x, cov_factor=l)


def time_update_spde(
    nodes: np.ndarray, span, model: SystemModel, weights: UtWeights, opts: OdeOptions, gqg=None
) -> np.ndarray:
    """Propagate the sigma nodes themselves ((2n+1) * n flat ODE states).

    The covariance factor is recovered from the current nodes at every
    evaluation (mean = center column, factor = rescaled +offset columns), so
    no Cholesky factorization is ever needed along the way.
    """
    n = model.n
    nn = weights.n_nodes
    wm, w_mat = weights.wm, weights.w_mat
    center, plus, minus = weights.center, weights.plus_cols, weights.minus_cols
    sq = math.sqrt(n + weights.lam)
    gqg = _gqg(model) if gqg is None else gqg

    def rhs(t, y):
        nds = y.reshape((n, nn), order="F")
        x = nds[:, center]
        l = np.tril(nds[:, plus] - x[:, None]) / sq
        fx = model.drift(t, nds)
        cross = (nds @ w_mat) @ fx.T
        c = cross + cross.T + gqg
        m_mat = tri_solve(l, tri_solve(l, c).T).T
        d = sq * (l @ phi_map(m_mat))
        out = np.empty_like(nds)
        xdot = fx @ wm
        out[:, center] = xdot
        out[:, plus] = xdot[:, None] + d
        out[:, minus] = xdot[:, None] - d
        return out.ravel(order="F")

    res = integrate(rhs, np.asarray(nodes).ravel(order="F"), span, opts)
    return res.y_end.reshape((n, nn), order="F")


# ---------------------------------------------------------------------------
# measurement updates


def _measured_nodes(nodes, k, model, weights):
    zs = np.atleast_2d(model.measure(k, nodes))
    return zs, zs @ weights.wm


def _gain_from_factor(le: np.ndarray, pxz: np.ndarray) -> np.ndarray:
    """K = P_xz R_e^{-1} via two triangular solves against the lower factor."""
    a = tri_solve(le, pxz.T)
    return tri_solve(le, a, trans=True).T


def mu_conventional(t, nodes, x_pred, p_pred, z, k, model, weights):
    """Full-covariance update; the covariance is recomputed and symmetrized."""
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    zw = zs @ weights.w_mat
    re = zw @ zs.T + model.R(k)
    try:
        le = cholesky_lower(re)
    except NotPositiveDefinite as exc:
        raise ResidualCovSingular(str(exc)) from None
    pxz = nodes @ zw.T
    gain = _gain_from_factor(le, pxz)
    x_new = x_pred + gain @ (z - z_pred)
    p_new = p_pred - gain @ re @ gain.T
    p_new = 0.5 * (p_new + p_new.T)
    est = Estimate(t=t, mean=x_new, cov=p_new)
    return est, InnovationData(z_pred=z_pred, gain=gain, re_full=re, cross=pxz)


def mu_pseudo_a(t, nodes, x_pred, l_pred, z, k, model, weights):
    """Separate-factor update finishing with m covariance downdates.

    The residual factor comes from a QR over the positively weighted node
    deviations plus the noise factor, corrected by one rank-one update for
    the center column; the covariance factor is then downdated once per
    measurement component, which is the fragile part.
    """
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    bz = zs @ weights.w_sqrt_abs
    keep = weights.noncenter_cols
    center = weights.center
    r_half = cholesky_lower(model.R(k))
    s_tilde = qr_r_factor(np.hstack([bz[:, keep], r_half]).T)
    s_re = chol_update_rank1(s_tilde, bz[:, center], int(weights.signs[center]))
    le = s_re.T
    pxz = nodes @ (zs @ weights.w_mat).T
    gain = _gain_from_factor(le, pxz)
    x_new = x_pred + gain @ (z - z_pred)
    s_new = chol_update_rank1(l_pred.T, gain @ le, -1)
    est = Estimate(t=t, mean=x_new, cov_factor=s_new.T)
    return est, InnovationData(z_pred=z_pred, gain=gain, re_factor=le, cross=pxz)


def mu_pseudo_b(t, nodes, x_pred, z, k, model, weights):
    """Symmetric-form update: the covariance factor comes from a QR over the
    gain-deflated node deviations plus ``K R^{1/2}``, leaving two rank-one
    updates per step in total."""
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    bz = zs @ weights.w_sqrt_abs
    keep = weights.noncenter_cols
    center = weights.center
    sign = int(weights.signs[center])
    r_half = cholesky_lower(model.R(k))
    s_tilde = qr_r_factor(np.hstack([bz[:, keep], r_half]).T)
    s_re = chol_update_rank1(s_tilde, bz[:, center], sign)
    le = s_re.T
    pxz = nodes @ (zs @ weights.w_mat).T
    gain = _gain_from_factor(le, pxz)
    x_new = x_pred + gain @ (z - z_pred)
    bx = (nodes - gain @ zs) @ weights.w_sqrt_abs
    s_tilde_p = qr_r_factor(np.hstack([bx[:, keep], gain @ r_half]).T)
    s_new = chol_update_rank1(s_tilde_p, bx[:, center], sign)
    est = Estimate(t=t, mean=x_new, cov_factor=s_new.T)
    return est, InnovationData(z_pred=z_pred, gain=gain, re_factor=le, cross=pxz)


def mu_pseudo_c(t, nodes, x_pred, z, k, model, weights):
    """Extended-array update: one QR over the stacked (m+n)-row pre-array and
    a single rank-one update, then the residual factor, normalized gain and
    covariance factor are read off the post-array blocks."""
    m, n = model.m, model.n
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    bz = zs @ weights.w_sqrt_abs
    bx = nodes @ weights.w_sqrt_abs
    keep = weights.noncenter_cols
    center = weights.center
    r_half = cholesky_lower(model.R(k))
    pre = np.block([[bz[:, keep], r_half], [bx[:, keep], np.zeros((n, m))]])
    s_tilde = qr_r_factor(pre.T)
    stacked = np.concatenate([bz[:, center], bx[:, center]])
    s_all = chol_update_rank1(s_tilde, stacked, int(weights.signs[center]))
    post = s_all.T
    le = post[:m, :m]
    cross_norm = post[m:, :m]
    factor = post[m:, m:]
    gain = tri_solve(le, cross_norm.T, trans=True).T
    x_new = x_pred + gain @ (z - z_pred)
    est = Estimate(t=t, mean=x_new, cov_factor=factor)
    return est, InnovationData(
        z_pred=z_pred, gain=gain, re_factor=le, cross_norm=cross_norm
    )


def mu_true_a(t, nodes, x_pred, l_pred, z, k, model, weights):
    """Separate-factor update with both factors from J-orthogonal QR.

    Requires the ``neg_last`` weight ordering so the signature blocks are
    +1s followed by -1s.  The residual and covariance triangularizations can
    break down independently; the error message names the site.
    """
    n, m = model.n, model.m
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    bz = zs @ weights.w_sqrt_abs
    r_half = cholesky_lower(model.R(k))
    j_resid = np.concatenate([np.ones(m), weights.signs])
    try:
        s_re = jqr_r_factor(np.hstack([r_half, bz]).T, j_resid)
    except HyperbolicBreakdown as exc:
        raise HyperbolicBreakdown(f"residual factor: {exc}") from None
    le = s_re.T
    pxz = nodes @ (zs @ weights.w_mat).T
    gain = _gain_from_factor(le, pxz)
    x_new = x_pred + gain @ (z - z_pred)
    j_cov = np.concatenate([np.ones(n), -np.ones(m)])
    try:
        s_new = jqr_r_factor(np.hstack([l_pred, gain @ le]).T, j_cov)
    except HyperbolicBreakdown as exc:
        raise HyperbolicBreakdown(f"covariance factor: {exc}") from None
    est = Estimate(t=t, mean=x_new, cov_factor=s_new.T)
    return est, InnovationData(z_pred=z_pred, gain=gain, re_factor=le, cross=pxz)


def mu_true_b(t, nodes, x_pred, z, k, model, weights):
    """Symmetric-form update with both factors from J-orthogonal QR."""
    m = model.m
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    bz = zs @ weights.w_sqrt_abs
    r_half = cholesky_lower(model.R(k))
    j_sig = np.concatenate([np.ones(m), weights.signs])
    try:
        s_re = jqr_r_factor(np.hstack([r_half, bz]).T, j_sig)
    except HyperbolicBreakdown as exc:
        raise HyperbolicBreakdown(f"residual factor: {exc}") from None
    le = s_re.T
    pxz = nodes @ (zs @ weights.w_mat).T
    gain = _gain_from_factor(le, pxz)
    x_new = x_pred + gain @ (z - z_pred)
    bx = (nodes - gain @ zs) @ weights.w_sqrt_abs
    try:
        s_new = jqr_r_factor(np.hstack([gain @ r_half, bx]).T, j_sig)
    except HyperbolicBreakdown as exc:
        raise HyperbolicBreakdown(f"covariance factor: {exc}") from None
    est = Estimate(t=t, mean=x_new, cov_factor=s_new.T)
    return est, InnovationData(z_pred=z_pred, gain=gain, re_factor=le, cross=pxz)


def mu_true_c(t, nodes, x_pred, z, k, model, weights):
    """Extended-array update with a single J-orthogonal triangularization."""
    m, n = model.m, model.n
    zs, z_pred = _measured_nodes(nodes, k, model, weights)
    bz = zs @ weights.w_sqrt_abs
    bx = nodes @ weights.w_sqrt_abs
    r_half = cholesky_lower(model.R(k))
    pre = np.block([[r_half, bz], [np.zeros((n, m)), bx]])
    j_sig = np.concatenate([np.ones(m), weights.signs])
    s_all = jqr_r_factor(pre.T, j_sig)
    post = s_all.T
    le = post[:m, :m]
    cross_norm = post[m:, :m]
    factor = post[m:, m:]
    gain = tri_solve(le, cross_norm.T, trans=True).T
    x_new = x_pred + gain @ (z - z_pred)
    est = Estimate(t=t, mean=x_new, cov_factor=factor)
    return est, InnovationData(
        z_pred=z_pred, gain=gain, re_factor=le, cross_norm=cross_norm
    )


# ---------------------------------------------------------------------------
# full runs


def run_filter(
    variant,
    model: SystemModel,
    schedule: SamplingSchedule,
    measurements: np.ndarray,
    weights: UtWeights,
    opts: OdeOptions,
) -> FilterRunResult:
    """Alternate time and measurement updates over a sampling schedule.

    ``measurements`` must be aligned with the schedule, one row per instant.
    Node matrices propagated by the ``spde`` time update are reused by the
    measurement update without regeneration.  Any numerical failure halts the
    run and is returned as data; estimates up to the failing step are kept.
    """
    if isinstance(variant, str):
        variant = FilterVariant.parse(variant)
    z_all = np.asarray(measurements, dtype=float)
    if z_all.shape != (len(schedule), model.m):
        raise ShapeMismatch(
            f"measurements shape {z_all.shape} != {(len(schedule), model.m)}"
        )
    expected = weights_ordering_for(variant)
    if weights.ordering != expected:
        raise ValueError(f"{variant.name} needs {expected!r} weight ordering")
    if weights.n != model.n:
        raise ShapeMismatch("weight set dimension does not match the model")

    gqg = _gqg(model)
    sr = variant.is_square_root
    spde = variant.time_update == "spde"
    mu_kind = variant.measurement_update

    if sr:
        # the prior factorization; for the true-SR family it is the only one
        try:
            l0 = cholesky_lower(model.P0)
        except FilterMathError as exc:
            return FilterRunResult(
                [], FilterFailure("init", 0, 0.0, type(exc).__name__, str(exc))
            )
        current = Estimate(t=0.0, mean=model.x0_mean.copy(), cov_factor=l0)
    else:
        p0 = np.asarray(model.P0, dtype=float)
        current = Estimate(t=0.0, mean=model.x0_mean.copy(), cov=0.5 * (p0 + p0.T))
    estimates = [current]

    t_prev = 0.0
    for idx, t_k in enumerate(schedule.instants):
        k = idx + 1
        span = (t_prev, float(t_k))
        try:
            if spde:
                l_cur = current.cov_factor if sr else cholesky_lower(current.cov)
                nodes = sigma_matrix(current.mean, l_cur, weights)
                nodes = time_update_spde(nodes, span, model, weights, opts, gqg)
                x_pred = nodes[:, weights.center]
                l_pred = recover_sqrt_from_sigma(nodes, x_pred, weights)
                p_pred = None if sr else l_pred @ l_pred.T
            elif sr:
                pred = time_update_mde_sr(current, span, model, weights, opts, gqg)
                x_pred, l_pred, p_pred = pred.mean, pred.cov_factor, None
                nodes = sigma_matrix(x_pred, l_pred, weights)
            else:
                pred = time_update_mde(current, span, model, weights, opts, gqg)
                x_pred, l_pred, p_pred = pred.mean, None, pred.cov
                nodes = None
        except (FilterMathError, IntegrationError) as exc:
            return FilterRunResult(
                estimates,
                FilterFailure("time_update", k, float(t_k), type(exc).__name__, str(exc)),
            )

        try:
            if mu_kind == "conventional":
                if nodes is None:
                    l_pred = cholesky_lower(p_pred)
                    nodes = sigma_matrix(x_pred, l_pred, weights)
                current, _ = mu_conventional(
                    float(t_k), nodes, x_pred, p_pred, z_all[idx], k, model, weights
                )
            else:
                if mu_kind == "pseudo-a":
                    current, _ = mu_pseudo_a(
                        float(t_k), nodes, x_pred, l_pred, z_all[idx], k, model, weights
                    )
                elif mu_kind == "pseudo-b":
                    current, _ = mu_pseudo_b(
                        float(t_k), nodes, x_pred, z_all[idx], k, model, weights
                    )
                elif mu_kind == "pseudo-c":
                    current, _ = mu_pseudo_c(
                        float(t_k), nodes, x_pred, z_all[idx], k, model, weights
                    )
                elif mu_kind == "true-a":
                    current, _ = mu_true_a(
                        float(t_k), nodes, x_pred, l_pred, z_all[idx], k, model, weights
                    )
                elif mu_kind == "true-b":
                    current, _ = mu_true_b(
                        float(t_k), nodes, x_pred, z_all[idx], k, model, weights
                    )
                else:
                    current, _ = mu_true_c(
                        float(t_k), nodes, x_pred, z_all[idx], k, model, weights
                    )
                if not np.all(np.diag(current.cov_factor) > 0.0):
                    raise NotPositiveDefinite("updated factor lost a positive diagonal")
        except (FilterMathError, IntegrationError) as exc:
            return FilterRunResult(
                estimates,
                FilterFailure(
                    "measurement_update", k, float(t_k), type(exc).__name__, str(exc)
                ),
            )

        estimates.append(current)
        t_prev = float(t_k)

    return FilterRunResult(estimates, None)
