import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steklov_dumbbell import asymptotics, fem, geometry, meshgen
from steklov_dumbbell.asymptotics import SweepReport, TubeTrace
from steklov_dumbbell.errors import InvalidSpec, NonPositiveValue, OutsideTube, SteklovError, ZeroFunction

from conftest import dumbbell_spec


class TestFitRate:
    def test_linear(self):
        f = asymptotics.fit_rate([0.4, 0.2, 0.1], [1.2, 0.6, 0.3])
        assert f.gamma == pytest.approx(1.0, abs=1e-12)
        assert f.C == pytest.approx(3.0, rel=1e-12)
        assert f.residual <= 1e-12
        assert f.successive == pytest.approx((1.0, 1.0))

    def test_quadratic(self):
        eps = np.array([0.4, 0.2, 0.1, 0.05])
        f = asymptotics.fit_rate(eps, 2 * eps ** 2)
        assert f.gamma == pytest.approx(2.0, abs=1e-12) and f.C == pytest.approx(2.0, rel=1e-12)

    def test_too_few_points(self):
        with pytest.raises(InvalidSpec):
            asymptotics.fit_rate([0.2, 0.1], [1.0, 0.5])

    def test_nonpositive(self):
        with pytest.raises(NonPositiveValue):
            asymptotics.fit_rate([0.4, 0.2, 0.1], [1.0, 0.0, 0.5])

    def test_residual_reported_for_noisy_data(self):
        f = asymptotics.fit_rate([0.4, 0.2, 0.1], [1.0, 0.6, 0.2])
        assert f.residual > 0.01


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(0.2, 3.0), st.lists(st.floats(0.001, 1.0), min_size=3, max_size=8, unique=True))
def test_fit_recovers_power_laws(C, gamma, eps):
    eps = np.array(sorted(eps, reverse=True))
    if np.min(np.diff(np.log(eps[::-1]))) < 1e-3:
        return
    f = asymptotics.fit_rate(eps, C * eps ** gamma)
    assert f.gamma == pytest.approx(gamma, abs=1e-8)
    assert f.C == pytest.approx(C, rel=1e-7)
    assert f.residual <= 1e-10


class TestSweep:
    def test_records(self, default_sweep):
        rep = default_sweep
        assert not rep.aborted and len(rep.records) == 4
        for k in range(1, 4):
            s = rep.sigma(k)
            assert np.all(np.diff(s) < 0)

    def test_record_invariants(self, default_sweep):
        for r in default_sweep.records:
            assert abs(r.sigma[0]) <= 1e-9
            assert np.all(np.diff(r.sigma) >= 0)
            assert r.mu1 > 0 and r.area > 0 and r.perimeter > 0
            assert r.mesh_stats["n_y"] == 4 and r.mesh_stats["h"] == pytest.approx(4.0 / 60)

    def test_first_exponent_and_constant(self, default_sweep):
        f = default_sweep.fits()[1]
        assert 0.9 <= f.gamma <= 1.1
        assert f.C == pytest.approx(default_sweep.mu[1], rel=0.15)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_eigenfunction_errors_nonincreasing(self, default_sweep, k):
        # at most one increase, and no increase larger than 10%
        errs = [r.compare_errors[k] for r in default_sweep.records]
        excursions = sum(b > a for a, b in zip(errs, errs[1:]))
        assert excursions <= 1 and all(b <= 1.1 * a for a, b in zip(errs, errs[1:])), errs

    def test_first_mode_close_to_limit(self, default_sweep):
        assert default_sweep.records[-1].compare_errors[1] <= 0.15

    def test_plateaus_approach_endpoint_values(self, default_sweep):
        for k in (1, 2):
            gaps = [r.plateau_gaps[k] for r in default_sweep.records]
            assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_increasing_eps_rejected(self):
        with pytest.raises(InvalidSpec):
            asymptotics.sweep(dumbbell_spec(eps=0.2), [0.2, 0.4], 1)

    def test_invalid_eps_rejected_before_compute(self):
        with pytest.raises(InvalidSpec):
            asymptotics.sweep(dumbbell_spec(eps=0.1), [0.9, 0.1], 1)

    def test_single_eps(self):
        rep = asymptotics.sweep(dumbbell_spec(eps=0.2), [0.2], 1, h_rule=lambda e: 0.2)
        assert len(rep.records) == 1
        with pytest.raises(InvalidSpec):
            rep.fits()
        assert "error" in json.loads(rep.to_json())["fits"]

    def test_abort_keeps_partial_results(self):
        rep = asymptotics.sweep(dumbbell_spec(eps=0.2), [0.2, 0.1], 1, h_rule=lambda e: 0.2 if e > 0.15 else -1.0)
        assert rep.aborted and len(rep.records) == 1 and "eps=0.1" in rep.error

    def test_threads_do_not_change_results(self):
        args = (dumbbell_spec(eps=0.3), [0.3, 0.2, 0.1], 2)
        a = asymptotics.sweep(*args, h_rule=lambda e: 0.15)
        b = asymptotics.sweep(*args, h_rule=lambda e: 0.15, threads=3)
        assert a.to_csv() == b.to_csv()

    def test_records_must_decrease(self, default_sweep):
        with pytest.raises(InvalidSpec):
            SweepReport(default_sweep.spec_base, 3, default_sweep.records[::-1], default_sweep.limit)

    def test_exports(self, default_sweep):
        rows = default_sweep.to_csv().splitlines()
        assert rows[0] == "eps,sigma_0,sigma_1,sigma_2,sigma_3,mu1,area,perimeter"
        assert float(rows[1].split(",")[0]) == 0.4
        data = json.loads(default_sweep.to_json())
        assert set(data["fits"]) == {"1", "2", "3"} and len(data["records"]) == 4
        assert len(data["records"][0]["traces"]["1"]["values"]) == 128
        plot = default_sweep.plot_data_csv().splitlines()
        assert plot[0] == "eps,k,sigma_over_eps,mu_k" and len(plot) == 1 + 4 * 3


@pytest.fixture(scope="module")
def small_result():
    g = geometry.make_dumbbell(dumbbell_spec(L=4.0, eps=0.1, n_arc=24))
    return fem.solve_steklov(meshgen.mesh_dumbbell(g, 0.06, 4), 2)


class TestTrace:
    def test_constant_mode(self, small_result):
        tr = asymptotics.trace_tube(small_result, 0)
        assert np.ptp(tr.values) <= 1e-8 * np.max(np.abs(tr.values))

    def test_sample_count(self, small_result):
        tr = asymptotics.trace_tube(small_result, 2, 128)
        assert len(tr.values) == 128 and np.all(np.isfinite(tr.values))
        assert tr.x[0] == pytest.approx(-2.0) and tr.x[-1] == pytest.approx(2.0)

    def test_first_mode_is_odd(self, small_result):
        tr = asymptotics.trace_tube(small_result, 1, 201)
        v = tr.values
        assert np.max(np.abs(v + v[::-1])) / 2 <= 0.05 * np.max(np.abs(v))

    def test_trace_interpolates_grid_nodes(self, small_result):
        grid = small_result.mesh.tube_grid
        row = grid[:, 2]
        n = len(row)
        tr = asymptotics.trace_tube(small_result, 1, n)
        np.testing.assert_allclose(tr.values, small_result.modes[row, 1], atol=1e-12)

    def test_needs_tube(self, disk_result):
        with pytest.raises(OutsideTube):
            asymptotics.trace_tube(disk_result, 1)

    def test_too_few_samples(self, small_result):
        with pytest.raises(InvalidSpec):
            asymptotics.trace_tube(small_result, 1, 10)

    def test_k_out_of_range(self, small_result):
        with pytest.raises(InvalidSpec):
            asymptotics.trace_tube(small_result, 5)


@pytest.fixture(scope="module")
def limit():
    return asymptotics.limit_for(dumbbell_spec(L=4.0), 2, N=1024)


class TestCompare:
    def trace_of(self, limit, k, sign=1.0, n=100):
        x = np.linspace(-2, 2, n)
        return TubeTrace(x=x, values=sign * 3.7 * np.interp(x, limit.grid, limit.functions[:, k]), k=k, L=4.0)

    def test_exact(self, limit):
        assert asymptotics.compare_eigenfunctions(self.trace_of(limit, 1), limit, 1) <= 1e-12

    def test_sign_resolved(self, limit):
        assert asymptotics.compare_eigenfunctions(self.trace_of(limit, 2, -1.0), limit, 2) <= 1e-12

    def test_different_modes(self, limit):
        assert asymptotics.compare_eigenfunctions(self.trace_of(limit, 1), limit, 2) > 0.5

    def test_zero_function(self, limit):
        tr = TubeTrace(x=np.linspace(-2, 2, 64), values=np.zeros(64), k=1, L=4.0)
        with pytest.raises(ZeroFunction):
            asymptotics.compare_eigenfunctions(tr, limit, 1)

    def test_length_mismatch(self, limit):
        tr = TubeTrace(x=np.linspace(-3, 3, 64), values=np.ones(64), k=1, L=6.0)
        with pytest.raises(InvalidSpec):
            asymptotics.compare_eigenfunctions(tr, limit, 1)


def test_errors_share_base_class():
    assert issubclass(OutsideTube, SteklovError) and issubclass(NonPositiveValue, ValueError)
    assert math.isfinite(asymptotics.default_h_rule(dumbbell_spec(L=12.0))(0.1))
