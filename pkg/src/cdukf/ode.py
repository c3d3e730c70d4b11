"""Adaptive explicit Runge-Kutta solver with local-error control.

Dormand-Prince 5(4) pair, seven stages with the first-same-as-last property.
The option surface is deliberately small: absolute tolerance, relative
tolerance, maximum step size, optional initial step.  Each accepted step
satisfies the componentwise scaled max-norm test

    max_i |e_i| / (abs_tol + rel_tol * |y_i|) <= 1

and the final step is clipped so the integration lands on the right endpoint
exactly.  Only the endpoint value is produced; the filters never need dense
output.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteValues, StepUnderflow

# Dormand-Prince 5(4) tableau.
_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_A = tuple(
    np.array(row)
    for row in (
        (0.2,),
        (3.0 / 40.0, 9.0 / 40.0),
        (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
        (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
        (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
        (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
    )
)
# Difference between the 5th-order propagating weights and the embedded
# 4th-order weights; h * (E . k) is the local error estimate.
_E = np.array(
    [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ]
)

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class OdeOptions:
    """Local-error control options: absolute/relative tolerance and max step."""

    abs_tol: float
    rel_tol: float
    max_step: float
    initial_step: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.abs_tol <= 1.0 and 0.0 < self.rel_tol <= 1.0):
            raise ValueError("abs_tol and rel_tol must lie in (0, 1]")
        if not self.max_step > 0.0:
            raise ValueError("max_step must be positive")
        if self.initial_step is not None and not self.initial_step > 0.0:
            raise ValueError("initial_step must be positive")


@dataclass
class OdeOutcome:
    """Endpoint state plus step/evaluation counters for one integration."""

    y_end: np.ndarray
    t_end: float
    steps_accepted: int
    steps_rejected: int
    rhs_evals: int
    max_step_taken: float
    mesh: Optional[list] = field(default=None, repr=False)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_span,
    opts: OdeOptions,
    record_mesh: bool = False,
) -> OdeOutcome:
    """Advance ``y' = rhs(t, y)`` from ``t_span[0]`` to exactly ``t_span[1]``.

    Exceptions raised by ``rhs`` propagate unchanged; a Cholesky breakdown
    inside a filter right-hand side aborts the integration with its own error.

    Raises:
        StepUnderflow: the controller pushed the step below ~1e3 ulps of the
            current time while still failing the error test.
        NonFiniteValues: a stage or error estimate went NaN/infinite.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    if not np.isfinite(y).all():
        raise NonFiniteValues("initial state has non-finite entries")

    h = opts.initial_step if opts.initial_step is not None else 0.01 * (t1 - t0)
    h = min(h, opts.max_step)

    k = np.empty((7, y.size))
    k[0] = rhs(t0, y)
    n_evals = 1
    n_acc = 0
    n_rej = 0
    h_max_taken = 0.0
    t = t0
    mesh = [t0] if record_mesh else None

    while t < t1:
        h = min(h, opts.max_step)
        last = h >= t1 - t
        if last:
            h = t1 - t

        with np.errstate(invalid="ignore", over="ignore"):
            for i in range(1, 7):
                yi = y + h * (k[:i].T @ _A[i - 1])
                k[i] = rhs(t + _C[i - 1] * h, yi)
            n_evals += 6
            y_new = yi  # seventh stage is evaluated at the 5th-order solution
            err_vec = h * (k.T @ _E)
            scale = opts.abs_tol + opts.rel_tol * np.abs(y_new)
            err = float(np.max(np.abs(err_vec) / scale))

        if not np.isfinite(err) or not np.isfinite(y_new).all():
            raise NonFiniteValues(f"non-finite values at t={t + h!r}")

        if err <= 1.0:
            t = t1 if last else t + h
            h_max_taken = max(h_max_taken, h)
            y = y_new
            k[0] = k[6]  # first-same-as-last
            n_acc += 1
            if mesh is not None:
                mesh.append(t)
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            )
            h = h * factor
        else:
            n_rej += 1
            h = h * max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            if h < 1e3 * _EPS * max(abs(t), abs(t1)):
                raise StepUnderflow(f"step collapsed to {h!r} at t={t!r}")

    return OdeOutcome(
        y_end=y,
        t_end=t,
        steps_accepted=n_acc,
        steps_rejected=n_rej,
        rhs_evals=n_evals,
        max_step_taken=h_max_taken,
        mesh=mesh,
    )
