import math

import numpy as np
import pytest

from cdukf.errors import NonFiniteValues, NotPositiveDefinite, StepUnderflow
from cdukf.ode import OdeOptions, OdeOutcome, integrate


def opts(tol=1e-4, max_step=10.0, **kw):
    return OdeOptions(abs_tol=tol, rel_tol=tol, max_step=max_step, **kw)


class TestOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            OdeOptions(abs_tol=0.0, rel_tol=1e-4, max_step=0.1)
        with pytest.raises(ValueError):
            OdeOptions(abs_tol=1e-4, rel_tol=2.0, max_step=0.1)
        with pytest.raises(ValueError):
            OdeOptions(abs_tol=1e-4, rel_tol=1e-4, max_step=-0.1)


class TestIntegrate:
    def test_exponential_decay(self):
        out = integrate(lambda t, y: -y, np.array([1.0]), (0.0, 1.0), opts(1e-4))
        assert abs(out.y_end[0] - math.exp(-1.0)) <= 1e-3

    def test_zero_field_is_exact(self):
        y0 = np.array([3.0, -2.0, 0.25])
        out = integrate(lambda t, y: np.zeros_like(y), y0, (0.0, 7.3), opts())
        np.testing.assert_array_equal(out.y_end, y0)

    def test_polynomial_exactness(self):
        out = integrate(lambda t, y: np.array([t]), np.array([0.0]), (0.0, 2.0), opts())
        assert abs(out.y_end[0] - 2.0) <= 1e-12

    def test_tolerance_monotonicity(self):
        errs = []
        for tol in [10.0**-p for p in range(2, 9)]:
            out = integrate(lambda t, y: -y, np.array([1.0]), (0.0, 1.0), opts(tol))
            errs.append(abs(out.y_end[0] - math.exp(-1.0)))
        for coarse, fine in zip(errs, errs[1:]):
            assert fine <= coarse

    def test_max_step_respected(self):
        out = integrate(
            lambda t, y: -y, np.array([1.0]), (0.0, 3.0), opts(1e-3, max_step=0.07)
        )
        assert out.max_step_taken <= 0.07

    def test_endpoint_time_exact(self):
        t1 = 1.7310000000000003
        out = integrate(lambda t, y: -y, np.array([1.0]), (0.3, t1), opts())
        assert out.t_end == t1

    def test_mesh_adapts_to_transient(self):
        rhs = lambda t, y: -50.0 * (y - math.cos(t))
        out = integrate(
            rhs, np.array([0.0]), (0.0, 1.0), opts(1e-6), record_mesh=True
        )
        steps = np.diff(out.mesh)
        # boundary-layer steps must be smaller than the smooth-phase steps
        assert steps[0] < steps[-2]

    def test_every_mesh_step_within_max_step(self):
        o = opts(1e-5, max_step=0.4)
        rhs = lambda t, y: np.array([-2.0 * y[0] + math.sin(3.0 * t)])
        out = integrate(rhs, np.array([1.0]), (0.0, 2.0), o, record_mesh=True)
        assert out.mesh[0] == 0.0 and out.mesh[-1] == 2.0
        for ta, tb in zip(out.mesh, out.mesh[1:]):
            assert tb - ta <= o.max_step + 1e-15

    def test_counters(self):
        out = integrate(lambda t, y: -y, np.array([1.0]), (0.0, 1.0), opts(1e-6))
        assert out.rhs_evals == 1 + 6 * (out.steps_accepted + out.steps_rejected)
        assert out.steps_accepted == len(
            integrate(
                lambda t, y: -y, np.array([1.0]), (0.0, 1.0), opts(1e-6), record_mesh=True
            ).mesh
        ) - 1

    def test_rhs_exception_propagates(self):
        def bad(t, y):
            if t > 0.5:
                raise NotPositiveDefinite("factorization failed mid-span")
            return -y

        with pytest.raises(NotPositiveDefinite):
            integrate(bad, np.array([1.0]), (0.0, 1.0), opts())

    def test_non_finite_detected(self):
        out_err = pytest.raises(
            NonFiniteValues,
            integrate,
            lambda t, y: np.array([np.inf]),
            np.array([1.0]),
            (0.0, 1.0),
            opts(),
        )
        assert out_err is not None

    def test_step_underflow_near_singularity(self):
        rhs = lambda t, y: np.array([1.0 / (0.5 - t)])
        with pytest.raises((StepUnderflow, NonFiniteValues)):
            integrate(rhs, np.array([0.0]), (0.0, 1.0), opts(1e-6))

    def test_invalid_span(self):
        with pytest.raises(ValueError):
            integrate(lambda t, y: -y, np.array([1.0]), (1.0, 1.0), opts())
