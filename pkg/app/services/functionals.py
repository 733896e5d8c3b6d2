"""
全局与局部化泛函

F, D (Lyapunov 恒等式), F_φ, D_φ, 余项 R(u,w,φ), M_φ, 熵, 指数矩,
以及可验证的不等式 (Jensen, Young, 局部 Sobolev 不等式 (i))。
w_t 一律由方程残量 Δw − w + v 给出, 不做时间差分。
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy.special import logsumexp, xlogy

from app.core.exceptions import ContractViolation
from app.models.fields import Cutoff, FieldState, RadialGrid, SobolevConstant
from app.models.samples import CutoffSample, FunctionalSample
from app.services.cutoff import smoothstep_profile
from app.services.radial_grid import (
    ball_mask,
    face_average,
    face_gradient,
    integrate,
    integrate_faces,
)
from app.services.solver import compute_w_t, laplacian_radial

logger = logging.getLogger(__name__)

# 低于 max(u) 的这个比例的单元不参与 u|∇(log u − w)|²
LOG_FLOOR = 1e-30
SOBOLEV_SAFETY = 1.5


def _require_verified(cutoff: Cutoff) -> None:
    if not cutoff.verified:
        raise ContractViolation(f"cutoff r={cutoff.r}, n={cutoff.n} is not verified")


def entropy(grid: RadialGrid, u) -> float:
    """∫u log u, 约定 0·log 0 = 0"""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise ContractViolation("entropy requires u >= 0")
    return integrate(grid, xlogy(u, u))


def gradient_energy(grid: RadialGrid, z, weight=None) -> float:
    """∫|∇z|² (可选面权重)"""
    g = face_gradient(grid, z)
    return integrate_faces(grid, g * g, weight)


def log_drift_density(grid: RadialGrid, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """面上 ū·|∇(log u − w)|²; 与近零单元相邻的面记 0"""
    umax = float(np.max(u)) if u.size else 0.0
    active = u > LOG_FLOOR * umax
    logu = np.log(np.where(active, u, 1.0))
    g = face_gradient(grid, logu - w)
    usable = np.zeros(grid.N + 1, dtype=bool)
    usable[1:-1] = active[:-1] & active[1:]
    ubar = face_average(grid, u)
    return np.where(usable, ubar * g * g, 0.0)


def lyapunov_F(grid: RadialGrid, state: FieldState) -> float:
    """F = ∫u log u − ∫uw + ½(‖w_t‖² + ‖∇w‖² + ‖w‖²)"""
    wt = compute_w_t(grid, state)
    quadratic = integrate(grid, wt * wt) + gradient_energy(grid, state.w) + integrate(grid, state.w ** 2)
    return entropy(grid, state.u) - integrate(grid, state.u * state.w) + 0.5 * quadratic


def dissipation_D(grid: RadialGrid, state: FieldState) -> float:
    """D = ∫u|∇(log u − w)|² + 2‖w_t‖² + ‖∇w_t‖²"""
    wt = compute_w_t(grid, state)
    drift = integrate_faces(grid, log_drift_density(grid, state.u, state.w))
    return drift + 2.0 * integrate(grid, wt * wt) + gradient_energy(grid, wt)


def lyapunov_identity_residual(earlier: FunctionalSample, later: FunctionalSample) -> float:
    """|(F(t+dt) − F(t))/dt + (D(t) + D(t+dt))/2|"""
    dt = later.t - earlier.t
    if not dt > 0:
        raise ContractViolation("samples must be strictly ordered in time")
    return abs((later.F - earlier.F) / dt + 0.5 * (earlier.D + later.D))


def localized_identity_defect(earlier: CutoffSample, later: CutoffSample, dt: float) -> float:
    """|dF_φ/dt + D_φ − dM_φ/dt − R| 的离散形式 (D_φ 与 R 取两端平均)"""
    if not dt > 0:
        raise ContractViolation("samples must be strictly ordered in time")
    return abs(
        (later.F_phi - earlier.F_phi) / dt
        + 0.5 * (earlier.D_phi + later.D_phi)
        - (later.M_phi - earlier.M_phi) / dt
        - 0.5 * (earlier.R_phi + later.R_phi)
    )


def localized_F(grid: RadialGrid, state: FieldState, cutoff: Cutoff) -> float:
    """F_φ = ∫(u log u − uw)φ + ½∫(|w_t|² + |∇w|² + w²)φ"""
    _require_verified(cutoff)
    u, w, phi = state.u, state.w, cutoff.phi
    wt = compute_w_t(grid, state)
    cell_part = integrate(grid, (xlogy(u, u) - u * w) * phi)
    quadratic = integrate(grid, (wt * wt + w * w) * phi) + gradient_energy(grid, w, cutoff.phi_face)
    return cell_part + 0.5 * quadratic


def localized_D(grid: RadialGrid, state: FieldState, cutoff: Cutoff) -> float:
    """D_φ = ∫u|∇(log u − w)|²φ + ∫(2|w_t|² + |∇w_t|²)φ"""
    _require_verified(cutoff)
    wt = compute_w_t(grid, state)
    drift = integrate_faces(grid, log_drift_density(grid, state.u, state.w), cutoff.phi_face)
    return drift + 2.0 * integrate(grid, wt * wt * cutoff.phi) + gradient_energy(grid, wt, cutoff.phi_face)


def localized_remainder(grid: RadialGrid, state: FieldState, cutoff: Cutoff) -> float:
    """
    R(u,w,φ) = ∫(u log u)Δφ + ½∫|w_t|²Δφ
               + ∫{(1+w)∇u + (u log u − uw − w_t)∇w}·∇φ

    梯度项在面上求值, 标量因子取相邻单元算术平均。
    """
    _require_verified(cutoff)
    u, w = state.u, state.w
    wt = compute_w_t(grid, state)
    ulogu = xlogy(u, u)
    lap_phi = laplacian_radial(grid, cutoff.phi)
    grad_phi = face_gradient(grid, cutoff.phi)

    cell_part = integrate(grid, (ulogu + 0.5 * wt * wt) * lap_phi)
    coeff_u = 1.0 + face_average(grid, w)
    coeff_w = face_average(grid, ulogu - u * w - wt)
    face_part = integrate_faces(
        grid,
        (coeff_u * face_gradient(grid, u) + coeff_w * face_gradient(grid, w)) * grad_phi,
    )
    return cell_part + face_part


def mass_phi(grid: RadialGrid, u, cutoff: Cutoff) -> float:
    """M_φ = ∫uφ"""
    return integrate(grid, np.asarray(u) * cutoff.phi)


def ball_mass(grid: RadialGrid, u, radius: float) -> float:
    """∫_{B_r} u (中心在球内的单元)"""
    u = np.asarray(u, dtype=np.float64)
    mask = ball_mask(grid, radius)
    return float(np.dot(u[mask], grid.cell_areas[mask]))


def log_exp_moment(grid: RadialGrid, w, cutoff: Cutoff, a: float) -> float:
    """log ∫e^{aw}φ, 以 log-sum-exp 形式计算"""
    if not a > 0:
        raise ContractViolation("exponent a must be positive")
    weights = cutoff.phi * grid.cell_areas
    return float(logsumexp(a * np.asarray(w, dtype=np.float64), b=weights))


def exp_moment(grid: RadialGrid, w, cutoff: Cutoff, a: float) -> float:
    """∫e^{aw}φ"""
    log_value = log_exp_moment(grid, w, cutoff, a)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def mt_ratio(grid: RadialGrid, state: FieldState, cutoff: Cutoff, a: float) -> float:
    """log ∫e^{aw}φ − (a²/16π)∫|∇w|²φ"""
    penalty = a * a / (16.0 * math.pi) * gradient_energy(grid, state.w, cutoff.phi_face)
    return log_exp_moment(grid, state.w, cutoff, a) - penalty


def jensen_gap(grid: RadialGrid, state: FieldState, cutoff: Cutoff) -> float:
    """
    ∫(u log u)φ + M_φ log(∫e^wφ) − M_φ log M_φ − ∫uwφ

    M_φ = 0 时定义为 0。
    """
    u, w, phi = state.u, state.w, cutoff.phi
    m = mass_phi(grid, u, cutoff)
    if m <= 0.0:
        return 0.0
    lhs = integrate(grid, u * w * phi)
    rhs = integrate(grid, xlogy(u, u) * phi) + m * log_exp_moment(grid, w, cutoff, 1.0) - m * math.log(m)
    return rhs - lhs


def young_terms(grid: RadialGrid, state: FieldState, cutoff: Cutoff, a: float) -> tuple:
    """(a∫uwφ, e⁻¹∫e^{aw}φ + ∫(u log u)φ), 由逐点不等式 xy ≤ x log x + e^{y−1} 得到"""
    u, w, phi = state.u, state.w, cutoff.phi
    rhs = exp_moment(grid, w, cutoff, a) / math.e + integrate(grid, xlogy(u, u) * phi)
    return a * integrate(grid, u * w * phi), rhs


def young_gap(grid: RadialGrid, state: FieldState, cutoff: Cutoff, a: float) -> float:
    lhs, rhs = young_terms(grid, state, cutoff, a)
    return rhs - lhs


def sobolev_ratio(grid: RadialGrid, z) -> float:
    """‖z‖₂ / √(‖∇z‖₁² + ‖z‖₁²)"""
    z = np.asarray(z, dtype=np.float64)
    l2 = math.sqrt(integrate(grid, z * z))
    l1 = integrate(grid, np.abs(z))
    grad_l1 = integrate_faces(grid, np.abs(face_gradient(grid, z)))
    denom = math.hypot(grad_l1, l1)
    return l2 / denom if denom > 0 else 0.0


def sobolev_probe_family(grid: RadialGrid, seed: int, count: Optional[int] = None):
    """
    确定性的探测函数族

    Gaussian (σ ∈ logspace(10⁻³R, R, 40)), 磨光的环形指示函数,
    线性斜坡 (含常数)。count 给出时额外追加随机正场直到达到该数目。
    """
    R = grid.R
    r = grid.cell_centers
    rng = np.random.default_rng(seed)
    probes = []
    for k, sigma in enumerate(np.logspace(math.log10(1e-3 * R), math.log10(R), 40)):
        probes.append((f"gaussian[{k}]:sigma={sigma:.4g}", np.exp(-(r / sigma) ** 2)))
    for k in range(24):
        center = rng.uniform(0.05, 0.95) * R
        width = rng.uniform(0.02, 0.3) * R
        s = (np.abs(r - center) - width) / max(width, grid.dr)
        probes.append((f"annulus[{k}]:c={center:.4g},h={width:.4g}", smoothstep_profile(s)))
    for k, slope in enumerate(np.linspace(-0.9, 2.0, 8)):
        probes.append((f"ramp[{k}]:slope={slope:.3g}", 1.0 + slope * r / R))
    probes.append(("constant", np.ones(grid.N)))

    if count is not None:
        k = 0
        while len(probes) < count:
            amp = rng.uniform(0.1, 10.0, size=3)
            width = rng.uniform(0.01, 0.5, size=2) * R
            center = rng.uniform(0.0, 0.9) * R
            z = (amp[0] * np.exp(-(r / width[0]) ** 2)
                 + amp[1] * np.exp(-((r - center) / width[1]) ** 2)
                 + 1e-3 * amp[2])
            probes.append((f"random[{k}]", z))
            k += 1
        probes = probes[:count]
    return probes


def estimate_K_sob(grid: RadialGrid, probe_family_seed: int) -> SobolevConstant:
    """在探测族上最大化 Sobolev 比值, 乘以安全系数 1.5"""
    probes = sobolev_probe_family(grid, probe_family_seed)
    ratios = [sobolev_ratio(grid, z) for _, z in probes]
    best = int(np.argmax(ratios))
    logger.debug(f"K_sob witness {probes[best][0]} ratio={ratios[best]:.6g}")
    return SobolevConstant(
        K_sob=SOBOLEV_SAFETY * ratios[best],
        family_size=len(probes),
        max_ratio_witness=probes[best][0],
        max_ratio=ratios[best],
        ratios=ratios,
    )


def sobolev_check_i(grid: RadialGrid, z, cutoff: Cutoff, K: SobolevConstant) -> tuple:
    """
    局部 Sobolev 不等式 (i):
        ∫z²φ ≤ 2K²(∫_{B_2r} z)∫(|∇z|²/z)φ + K²(A²/2 + 1)(∫_{B_2r} z)²

    Returns:
        (passed, slack), slack = RHS − LHS
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ContractViolation("sobolev_check_i requires a positive field")
    lhs = integrate(grid, z * z * cutoff.phi)
    # 与 B_2r 相交的单元
    inner = grid.face_radii[:-1] < 2.0 * cutoff.r
    local_mass = float(np.dot(z[inner], grid.cell_areas[inner]))
    g = face_gradient(grid, z)
    fisher = integrate_faces(grid, g * g / face_average(grid, z), cutoff.phi_face)
    k2 = K.K_sob ** 2
    rhs = 2.0 * k2 * local_mass * fisher + k2 * (cutoff.A ** 2 / 2.0 + 1.0) * local_mass ** 2
    slack = rhs - lhs
    return slack >= 0.0, slack


def pointwise_w_monitor(grid: RadialGrid, state: FieldState, p: float) -> float:
    """max_{i≥1} w_i · r_i^{(2−p)/p}"""
    if not 1.0 < p < 2.0:
        raise ContractViolation("p must lie in (1, 2)")
    weight = grid.cell_centers[1:] ** ((2.0 - p) / p)
    return float(np.max(state.w[1:] * weight))


class FunctionalEvaluator:
    """对一个状态计算完整的 FunctionalSample"""

    def __init__(self, grid: RadialGrid, cutoffs, mt_exponent: float, pointwise_p: float):
        self.grid = grid
        self.cutoffs = list(cutoffs)
        self.mt_exponent = mt_exponent
        self.pointwise_p = pointwise_p

    def sample(self, state: FieldState, dt: float) -> FunctionalSample:
        grid = self.grid
        u = state.u
        wt = compute_w_t(grid, state)
        imax = int(np.argmax(u))
        blocks = []
        for c in self.cutoffs:
            blocks.append(CutoffSample(
                radius=c.r,
                M_phi=mass_phi(grid, u, c),
                F_phi=localized_F(grid, state, c),
                D_phi=localized_D(grid, state, c),
                R_phi=localized_remainder(grid, state, c),
                gradw_l2_phi=gradient_energy(grid, state.w, c.phi_face),
                mt_ratio=mt_ratio(grid, state, c, self.mt_exponent),
                jensen_gap=jensen_gap(grid, state, c),
            ))
        return FunctionalSample(
            t=state.t,
            dt=dt,
            mass_u=integrate(grid, u),
            mass_v=integrate(grid, state.v),
            mass_w=integrate(grid, state.w),
            linf_u=float(u[imax]),
            argmax_radius=float(grid.cell_centers[imax]),
            entropy=entropy(grid, u),
            F=lyapunov_F(grid, state),
            D=dissipation_D(grid, state),
            wt_l2=integrate(grid, wt * wt),
            cutoffs=blocks,
            ball_masses=[ball_mass(grid, u, c.r) for c in self.cutoffs],
            w_monitor=pointwise_w_monitor(grid, state, self.pointwise_p),
        )
