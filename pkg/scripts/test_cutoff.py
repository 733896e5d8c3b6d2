"""
原点截断函数测试
"""
import os
import sys
from dataclasses import replace

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.exceptions import ResolutionError
from app.services.cutoff import (
    MIN_TRANSITION_CELLS,
    build_cutoff,
    build_cutoff_family,
    smoothstep_derivative,
    smoothstep_profile,
    transition_cell_count,
    verify_cutoff,
)
from app.services.radial_grid import build_grid


@pytest.fixture(scope="module")
def grid():
    return build_grid(1.0, 512)


class TestSmoothstep:

    def test_endpoints_and_midpoint(self):
        values = smoothstep_profile([-1.0, 0.0, 0.5, 1.0, 2.0])
        np.testing.assert_allclose(values, [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-15)

    def test_monotone_decreasing(self):
        s = np.linspace(0.0, 1.0, 201)
        assert np.all(np.diff(smoothstep_profile(s)) <= 0)

    def test_derivative_matches_finite_difference(self):
        s = np.linspace(0.05, 0.95, 19)
        h = 1e-6
        fd = (smoothstep_profile(s + h) - smoothstep_profile(s - h)) / (2 * h)
        np.testing.assert_allclose(smoothstep_derivative(s), fd, rtol=1e-6, atol=1e-9)
        assert smoothstep_derivative(1.5) == 0.0


class TestBuildCutoff:

    def test_profile_support(self, grid):
        c = build_cutoff(grid, 0.25, 8)
        r = grid.cell_centers
        assert np.all(c.phi[r <= 0.25] == 1.0)
        assert np.all(c.phi[r >= 0.5] == 0.0)
        assert np.all((c.phi >= 0) & (c.phi <= 1))
        assert c.phi_face.shape == (grid.N + 1,)

    def test_constants_verified(self, grid):
        for r in (0.25, 0.1, 0.05):
            c = build_cutoff(grid, r, 8)
            assert c.verified
            assert c.A > 0 and c.B > 0
            assert c.verification.max_gradient_ratio * 1.05 == pytest.approx(c.A)

    def test_smaller_radius_needs_larger_constants(self, grid):
        wide = build_cutoff(grid, 0.25, 8)
        narrow = build_cutoff(grid, 0.05, 8)
        assert narrow.A > wide.A
        assert narrow.B > wide.B

    def test_constants_stable_under_refinement(self):
        coarse = build_cutoff(build_grid(1.0, 512), 0.25, 8)
        fine = build_cutoff(build_grid(1.0, 1024), 0.25, 8)
        assert fine.A == pytest.approx(coarse.A, rel=0.1)
        assert fine.B == pytest.approx(coarse.B, rel=0.1)

    def test_gradient_constant_matches_dense_maximisation(self):
        r, n = 0.25, 8
        c = build_cutoff(build_grid(1.0, 1024), r, n)
        x = np.linspace(r, 2.0 * r, 100_000)
        psi = smoothstep_profile((x - r) / r)
        dphi = np.gradient(psi ** n, x)
        inside = psi > 0.0
        dense = float(np.max(np.abs(dphi[inside]) / psi[inside] ** (n - 1)))
        assert c.A == pytest.approx(dense, rel=0.05)

    def test_laplacian_constant_grows_with_exponent(self, grid):
        assert build_cutoff(grid, 0.25, 16).B >= build_cutoff(grid, 0.25, 8).B

    def test_rejects_unresolved_annulus(self, grid):
        r = 0.5 * MIN_TRANSITION_CELLS * grid.dr
        assert transition_cell_count(grid, r) < MIN_TRANSITION_CELLS
        with pytest.raises(ResolutionError):
            build_cutoff(grid, r, 8)

    @pytest.mark.parametrize("r, n", [(0.5, 8), (0.6, 8), (0.0, 8), (0.25, 3)])
    def test_rejects_bad_parameters(self, grid, r, n):
        with pytest.raises(ResolutionError):
            build_cutoff(grid, r, n)

    def test_verification_detects_shrunk_constant(self, grid):
        c = build_cutoff(grid, 0.1, 8)
        tampered = replace(c, A=0.5 * c.A)
        result = verify_cutoff(tampered, grid)
        assert not result.gradient_ok
        assert result.laplacian_ok
        assert not result.passed


class TestCutoffFamily:

    def test_sorted_and_filtered(self, grid):
        family = build_cutoff_family(grid, [0.05, 0.25, 0.005, 0.1], 8)
        assert [c.r for c in family] == [0.25, 0.1, 0.05]

    def test_phi_nested(self, grid):
        family = build_cutoff_family(grid, [0.25, 0.1, 0.05], 8)
        for outer, inner in zip(family, family[1:]):
            assert np.all(inner.phi <= outer.phi + 1e-15)
