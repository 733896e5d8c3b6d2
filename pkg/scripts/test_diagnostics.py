"""
诊断服务测试 (合成时间序列)
"""
import math
import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.exceptions import ContractViolation
from app.models.fields import FieldState, SobolevConstant
from app.models.report import (
    CorollaryBranch,
    DeltaWeight,
    FTrend,
    FTrendVerdict,
    GrowthVerdict,
    MassIdentities,
    Theorem3Verdict,
)
from app.models.run_config import EIGHT_PI
from app.models.samples import CutoffSample, FunctionalSample, format_radius
from app.services.cutoff import build_cutoff
from app.services.diagnostic_service import (
    cauchy_distance,
    classify_growth,
    concentration_profile,
    corollary_branch,
    delta_weight_estimate,
    eightpi_check,
    eps_regularity,
    eps_threshold,
    f_trend,
    growup_locus,
    identity_checks,
    late_window,
    mass_identities,
    stationary_residuals,
    theorem3_verdict,
    weak_limit_defects,
)
from app.services.radial_grid import build_grid

RADII = (0.25, 0.05)
K = SobolevConstant(K_sob=1.5 / math.sqrt(math.pi), family_size=1, max_ratio_witness="constant",
                    max_ratio=1.0 / math.sqrt(math.pi))


def make_sample(t, linf=1.0, F=0.0, m_phi=(1.0, 0.5), balls=(1.0, 0.5), mass=10.0, D=1.0) -> FunctionalSample:
    """构造一个合成采样"""
    blocks = [
        CutoffSample(radius=r, M_phi=m, F_phi=0.0, D_phi=0.0, R_phi=0.0,
                     gradw_l2_phi=0.0, mt_ratio=0.0, jensen_gap=0.0)
        for r, m in zip(RADII, m_phi)
    ]
    return FunctionalSample(
        t=t, dt=1e-3, mass_u=mass, mass_v=0.0, mass_w=0.0, linf_u=linf, argmax_radius=0.001,
        entropy=0.0, F=F, D=D, wt_l2=0.0, cutoffs=blocks, ball_masses=list(balls), w_monitor=0.0,
    )


def series_from(linf=None, F=None, n=200, t_end=200.0):
    times = np.linspace(1.0, t_end, n)
    linf = np.ones(n) if linf is None else linf
    F = np.zeros(n) if F is None else F
    return [make_sample(float(t), linf=float(a), F=float(f)) for t, a, f in zip(times, linf, F)]


class TestClassifyGrowth:

    def test_requires_enough_samples(self):
        with pytest.raises(ContractViolation):
            classify_growth(series_from(n=50), 0.25)

    def test_bounded(self):
        assert classify_growth(series_from(linf=np.full(200, 5.0)), 0.25) == GrowthVerdict.BOUNDED

    def test_growing(self):
        linf = np.exp(0.05 * np.arange(200))
        assert classify_growth(series_from(linf=linf), 0.25) == GrowthVerdict.GROWING

    def test_collapsed_flag_wins(self):
        linf = np.full(200, 5.0)
        verdict = classify_growth(series_from(linf=linf), 0.25, collapsed=True)
        assert verdict == GrowthVerdict.NUMERICALLY_COLLAPSED

    def test_inconclusive(self):
        linf = 1.0 + 5.0 * (np.arange(200) % 2)
        assert classify_growth(series_from(linf=linf), 0.25) == GrowthVerdict.INCONCLUSIVE

    def test_invariant_under_time_relabelling(self):
        linf = np.exp(0.05 * np.arange(200))
        original = series_from(linf=linf)
        relabelled = series_from(linf=linf, t_end=5000.0)
        assert classify_growth(original, 0.25) == classify_growth(relabelled, 0.25)


class TestFTrend:

    def test_plateau_is_bounded_below(self):
        times = np.linspace(1.0, 200.0, 200)
        trend = f_trend(series_from(F=1.0 + np.exp(-times)))
        assert trend.verdict == FTrendVerdict.BOUNDED_BELOW

    def test_log_decrease_is_unbounded(self):
        times = np.linspace(1.0, 200.0, 200)
        trend = f_trend(series_from(F=-3.0 * np.log(times)))
        assert trend.verdict == FTrendVerdict.DECREASING_UNBOUNDED
        assert trend.slope == pytest.approx(-3.0)
        assert math.isfinite(trend.t_stat)
        assert trend.drop == pytest.approx(3.0 * math.log(200.0))

    def test_short_series_is_inconclusive(self):
        assert f_trend(series_from(n=20)).verdict == FTrendVerdict.INCONCLUSIVE


class TestConcentration:

    def test_late_window(self):
        series = series_from(n=101, t_end=101.0)
        window = late_window(series, 0.25)
        assert window[0].t >= 0.75 * 101.0
        assert window[-1] is series[-1]
        assert late_window([], 0.25) == []

    def test_delta_weight_estimate(self):
        window = [make_sample(float(t), m_phi=(20.0 + 0.01 * t, 18.0 + 0.01 * t)) for t in range(10)]
        delta = delta_weight_estimate(window, final_mass=30.0)
        assert [p.r for p in delta.curve] == [0.05, 0.25]
        assert delta.delta_weight == pytest.approx(18.09)
        assert delta.remainder_mass == pytest.approx(30.0 - 18.09)
        assert delta.monotone
        assert delta.window_size == 10

    def test_delta_weight_needs_window(self):
        with pytest.raises(ContractViolation):
            delta_weight_estimate([make_sample(1.0)] * 9, final_mass=1.0)

    def test_eps_regularity_gated_on_verdict(self):
        window = [make_sample(1.0, balls=(1.0, 0.5))]
        with pytest.raises(ContractViolation):
            eps_regularity(window, K, 0.05, GrowthVerdict.BOUNDED)
        record = eps_regularity(window, K, 0.05, GrowthVerdict.GROWING)
        assert record.late_max_ball_mass == 0.5
        assert record.attained == (0.5 >= eps_threshold(K))
        assert eps_threshold(K) == pytest.approx(math.pi / (200.0 * 2.25))

    def test_eightpi_check(self):
        window = [make_sample(1.0, m_phi=(30.0, 26.0)), make_sample(2.0, m_phi=(30.0, 20.0))]
        check = eightpi_check(window, GrowthVerdict.NUMERICALLY_COLLAPSED, 0.05)
        assert check.radius == 0.05
        assert check.late_max_M_phi == 26.0
        assert check.attained
        low = [make_sample(1.0, m_phi=(30.0, 23.0))]
        assert not eightpi_check(low, GrowthVerdict.GROWING, 0.05).attained
        with pytest.raises(ContractViolation):
            eightpi_check(window, GrowthVerdict.INCONCLUSIVE, 0.05)

    def test_growup_locus(self):
        grid = build_grid(1.0, 128)
        peaked = np.exp(-(grid.cell_centers / 0.05) ** 2)
        locus = growup_locus(grid, [peaked] * 3)
        assert locus.radius == grid.cell_centers[0]
        assert locus.consistent
        off_axis = np.exp(-((grid.cell_centers - 0.5) / 0.05) ** 2)
        assert not growup_locus(grid, [peaked, peaked, off_axis]).consistent
        with pytest.raises(ContractViolation):
            growup_locus(grid, [peaked, peaked])

    def test_concentration_profile_sorted(self):
        grid = build_grid(1.0, 512)
        u = np.exp(-(grid.cell_centers / 0.05) ** 2)
        points = concentration_profile(grid, u, [0.05, 0.25, 0.1], 8)
        assert [p.r for p in points] == [0.05, 0.1, 0.25]
        assert points[0].m <= points[1].m <= points[2].m

    def test_cauchy_distance(self):
        grid = build_grid(1.0, 64)
        a = np.ones(64)
        b = np.ones(64)
        b[0] = 100.0
        b[-1] = 1.5
        assert cauchy_distance(grid, [a, b], r_min=0.1) == pytest.approx(0.5)
        assert cauchy_distance(grid, [a], r_min=0.1) is None

    def test_weak_limit_defects_vanish_without_core(self):
        grid = build_grid(1.0, 512)
        cutoff = build_cutoff(grid, 0.1, 8)
        u = np.where(grid.cell_centers > 0.3, 1.0, 0.0)
        defects = weak_limit_defects(grid, u, cutoff, m_hat=0.0)
        assert [d.test_function for d in defects] == ["one", "one_minus_phi", "r_squared"]
        for d in defects:
            assert d.defect == pytest.approx(0.0, abs=1e-12)


class TestStationaryAndMass:

    def test_constant_state(self):
        grid = build_grid(1.0, 256)
        c = 0.8
        state = FieldState(u=np.full(256, c), v=np.full(256, c), w=np.full(256, c))
        res = stationary_residuals(grid, state, rho_cut=0.1)
        assert max(res.u_minus_v_inf, res.elliptic_l2, res.drift_norm, res.wt_l2) <= 1e-10

    def test_rho_cut_too_small(self):
        grid = build_grid(1.0, 256)
        state = FieldState(u=np.ones(256), v=np.ones(256), w=np.ones(256))
        with pytest.raises(ContractViolation):
            stationary_residuals(grid, state, rho_cut=2.0 * grid.dr)

    def test_mass_identities(self):
        grid = build_grid(1.0, 256)
        m = 2.0 * EIGHT_PI
        c = m / math.pi
        state = FieldState(u=np.full(256, c), v=np.full(256, c), w=np.full(256, c))
        ids = mass_identities(grid, state, m, rho_cut=0.1)
        assert ids.w_gap == pytest.approx(0.0, abs=1e-10)
        assert ids.annulus_mass == pytest.approx(m * 0.99, rel=1e-3)
        assert not ids.u_inf_bound_ok


class TestVerdicts:

    bounded_below = FTrend(verdict=FTrendVerdict.BOUNDED_BELOW)
    unbounded = FTrend(verdict=FTrendVerdict.DECREASING_UNBOUNDED)

    def test_theorem3_not_applicable_without_plateau(self):
        ids = MassIdentities(w_gap=0.0, annulus_mass=0.0, u_inf_bound_ok=True)
        verdict = theorem3_verdict(GrowthVerdict.BOUNDED, self.unbounded, ids, 10.0, 0.05)
        assert verdict == Theorem3Verdict.NOT_APPLICABLE

    def test_theorem3_bounded_branch(self):
        ok = MassIdentities(w_gap=0.1, annulus_mass=10.0, u_inf_bound_ok=False)
        bad = MassIdentities(w_gap=1.0, annulus_mass=10.0, u_inf_bound_ok=False)
        assert theorem3_verdict(GrowthVerdict.BOUNDED, self.bounded_below, ok, 10.0, 0.05) == Theorem3Verdict.CONSISTENT
        assert theorem3_verdict(GrowthVerdict.BOUNDED, self.bounded_below, bad, 10.0, 0.05) == Theorem3Verdict.INCONSISTENT

    def test_theorem3_concentrating_requires_full_mass(self):
        spread = MassIdentities(w_gap=0.1, annulus_mass=5.0, u_inf_bound_ok=True)
        full = MassIdentities(w_gap=0.1, annulus_mass=0.1, u_inf_bound_ok=True)
        growing = GrowthVerdict.GROWING
        assert theorem3_verdict(growing, self.bounded_below, spread, 10.0, 0.05) == Theorem3Verdict.INCONSISTENT
        assert theorem3_verdict(growing, self.bounded_below, full, 10.0, 0.05) == Theorem3Verdict.CONSISTENT

    def test_corollary_branches(self):
        m = 1.5 * EIGHT_PI
        heavy = DeltaWeight(delta_weight=0.9 * m, remainder_mass=0.1 * m, window_size=10, monotone=True)
        light = DeltaWeight(delta_weight=0.3 * m, remainder_mass=0.7 * m, window_size=10, monotone=True)
        growing = GrowthVerdict.GROWING
        assert corollary_branch(growing, self.bounded_below, heavy, m) == CorollaryBranch.FULL_CONCENTRATION
        assert corollary_branch(growing, self.unbounded, light, m) == CorollaryBranch.LYAPUNOV_UNBOUNDED
        assert corollary_branch(growing, self.bounded_below, light, m) == CorollaryBranch.UNDETERMINED
        assert corollary_branch(GrowthVerdict.BOUNDED, self.unbounded, light, m) == CorollaryBranch.NOT_APPLICABLE
        assert corollary_branch(growing, self.unbounded, heavy, 0.5 * EIGHT_PI) == CorollaryBranch.NOT_APPLICABLE


class TestIdentityChecks:

    def test_exact_v_law_has_no_defect(self):
        m_u = 10.0
        series = []
        for t in np.linspace(0.0, 5.0, 11):
            s = make_sample(float(t), mass=m_u)
            s.mass_v = -math.expm1(-t) * m_u
            s.mass_w = 0.5 * s.mass_v
            series.append(s)
        checks = identity_checks(series)
        assert checks.v_law_defect == pytest.approx(0.0, abs=1e-14)
        assert checks.l1_bound_excess_v <= 0.0
        assert checks.l1_bound_excess_w <= 0.0
        assert checks.f_monotonicity_excess == 0.0

    def test_localized_ratio_per_cutoff(self):
        earlier = make_sample(1.0)
        later = make_sample(2.0)
        later.cutoffs[0].F_phi = 100.0
        checks = identity_checks([earlier, later])
        assert set(checks.max_localized_ratio) == {format_radius(r) for r in RADII}
        # |ΔF_φ/dt| = 100, 分母 |F_φ| + D_φ + 1 = 101
        assert checks.max_localized_ratio[format_radius(0.25)] == pytest.approx(100.0 / 101.0)
        assert checks.max_localized_ratio[format_radius(0.05)] == 0.0

    def test_empty_series(self):
        assert identity_checks([]).max_lyapunov_ratio is None
        assert identity_checks([]).max_localized_ratio == {}
