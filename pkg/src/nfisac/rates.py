"""Received-power decompositions, SINRs, and secrecy rates.

Column 0 of every beamformer matrix is the common stream; columns 1..K
are the per-user private streams.  All rates are base-2 (bits/s/Hz).
The clamp at zero is applied at reporting time only; unclamped values
are kept for the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import crb as crb_mod
from .geometry import ChannelSet, Scenario, SensingModel


class ContractError(ValueError):
    """Dimension or sign contract violated."""


@dataclass(frozen=True)
class BeamState:
    digital_full: np.ndarray  # N x (K+1), the auxiliary fully-digital focuser
    analog: np.ndarray  # N x L, unit modulus
    digital: np.ndarray  # L x (K+1)
    common_alloc: np.ndarray  # K non-negative rates

    @property
    def hybrid(self) -> np.ndarray:
        return self.analog @ self.digital


@dataclass(frozen=True)
class PowerDecomposition:
    s_kc: np.ndarray  # (K,)
    s_kp: np.ndarray
    i_kp: np.ndarray  # includes user noise
    i_kc: np.ndarray
    s_ec: float
    s_ek: np.ndarray  # (K,)
    i_ek: np.ndarray  # includes eve noise
    i_ec: float

    @property
    def t_kc(self):
        return self.s_kc + self.i_kc

    @property
    def t_ec(self):
        return self.s_ec + self.i_ec


@dataclass(frozen=True)
class RateReport:
    r_kc: np.ndarray
    r_kp: np.ndarray
    r_common: float  # min_k r_kc
    r_ec: float
    r_ek: np.ndarray
    secrecy_common: float  # clamped
    secrecy_common_raw: float  # unclamped, for the optimizer
    secrecy_private: np.ndarray  # clamped
    secrecy_private_raw: np.ndarray
    secrecy_total: np.ndarray  # common_alloc + secrecy_private


def received_powers(p_mat: np.ndarray, channels: ChannelSet, noise_user: float,
                    noise_eve: float) -> PowerDecomposition:
    """Signal/interference power split at each user and at the eavesdropper."""
    h = channels.user_channels  # (K, N)
    n_streams = p_mat.shape[1]
    if h.shape[1] != p_mat.shape[0]:
        raise ContractError("channel/beamformer dimension mismatch")
    if n_streams != h.shape[0] + 1:
        raise ContractError("beamformer must have K+1 columns (common first)")

    gains = np.abs(h.conj() @ p_mat) ** 2  # (K, K+1): |h_k^H p_i|^2
    k = h.shape[0]
    s_kc = gains[:, 0]
    s_kp = gains[np.arange(k), np.arange(k) + 1]
    private_sum = gains[:, 1:].sum(axis=1)
    i_kp = private_sum - s_kp + noise_user
    i_kc = private_sum + noise_user

    eg = np.abs(channels.eve_channel.conj() @ p_mat) ** 2  # (K+1,)
    s_ec = float(eg[0])
    s_ek = eg[1:].copy()
    i_ek = eg[1:].sum() - s_ek + noise_eve
    i_ec = float(eg[1:].sum() + noise_eve)
    return PowerDecomposition(
        s_kc=s_kc, s_kp=s_kp, i_kp=i_kp, i_kc=i_kc,
        s_ec=s_ec, s_ek=s_ek, i_ek=i_ek, i_ec=i_ec,
    )


def compute_rates(pd: PowerDecomposition, common_alloc: np.ndarray) -> RateReport:
    """Per-stream rates and secrecy rates from a power decomposition."""
    arrays = (pd.s_kc, pd.s_kp, pd.i_kp, pd.i_kc, pd.s_ek, pd.i_ek)
    if any(np.any(a < 0) for a in arrays) or pd.s_ec < 0 or pd.i_ec < 0:
        raise ContractError("negative powers")
    r_kc = np.log2(1.0 + pd.s_kc / pd.i_kc)
    r_kp = np.log2(1.0 + pd.s_kp / pd.i_kp)
    r_common = float(np.min(r_kc))
    r_ec = float(np.log2(1.0 + pd.s_ec / pd.i_ec))
    # the common stream's power jams private-stream eavesdropping
    r_ek = np.log2(1.0 + pd.s_ek / (pd.i_ek + pd.s_ec))
    sec_c_raw = r_common - r_ec
    sec_p_raw = r_kp - r_ek
    alloc = np.asarray(common_alloc, dtype=float)
    sec_p = np.maximum(sec_p_raw, 0.0)
    return RateReport(
        r_kc=r_kc, r_kp=r_kp, r_common=r_common, r_ec=r_ec, r_ek=r_ek,
        secrecy_common=max(sec_c_raw, 0.0), secrecy_common_raw=float(sec_c_raw),
        secrecy_private=sec_p, secrecy_private_raw=sec_p_raw,
        secrecy_total=alloc + sec_p,
    )


def allocate_common(secrecy_private: np.ndarray, common_budget: float) -> np.ndarray:
    """Split a common secrecy budget to maximize the minimum per-user total.

    Level-filling: raise the lowest totals first.  Exact for this
    piecewise-linear max-min problem.
    """
    base = np.asarray(secrecy_private, dtype=float)
    k = len(base)
    budget = max(float(common_budget), 0.0)
    if budget <= 0 or k == 0:
        return np.zeros(k)
    levels = np.sort(base)
    water = levels[0]
    remaining = budget
    for i in range(1, k + 1):
        step_top = levels[i] if i < k else np.inf
        fill = (step_top - water) * i
        if fill >= remaining:
            water += remaining / i
            remaining = 0.0
            break
        water = step_top
        remaining -= fill
    return np.maximum(water - base, 0.0)


@dataclass(frozen=True)
class FeasibilityReport:
    power: float
    unit_modulus: float
    crb_angle: float
    crb_range: float
    alloc_budget: float
    alloc_nonneg: float
    artificial_noise: float  # min_k r_kc >= r_ec
    penalty_residual: float  # ||P - FW||_F

    def max_violation(self, include_penalty: bool = False) -> float:
        v = [self.power, self.unit_modulus, self.crb_angle, self.crb_range,
             self.alloc_budget, self.alloc_nonneg, self.artificial_noise]
        if include_penalty:
            v.append(self.penalty_residual)
        return max(v)


def check_feasibility(state: BeamState, scenario: Scenario, channels: ChannelSet,
                      sensing: SensingModel) -> FeasibilityReport:
    """Constraint residuals of a beam state, evaluated on the digital_full matrix."""
    p_mat = state.digital_full
    power = max(0.0, float(np.linalg.norm(p_mat) ** 2) - scenario.power_budget)
    unit = float(np.max(np.abs(np.abs(state.analog) - 1.0)))
    try:
        c_th = crb_mod.crb_closed_form(p_mat, sensing, scenario.noise_eve,
                                       scenario.slots, "angle")
    except crb_mod.DegenerateBeamError:
        c_th = np.inf
    try:
        c_r = crb_mod.crb_closed_form(p_mat, sensing, scenario.noise_eve,
                                      scenario.slots, "range")
    except crb_mod.DegenerateBeamError:
        c_r = np.inf
    pd = received_powers(p_mat, channels, scenario.noise_user, scenario.noise_eve)
    rr = compute_rates(pd, state.common_alloc)
    alloc = np.asarray(state.common_alloc, dtype=float)
    return FeasibilityReport(
        power=power,
        unit_modulus=unit,
        crb_angle=max(0.0, c_th - scenario.crb_angle_max),
        crb_range=max(0.0, c_r - scenario.crb_range_max),
        alloc_budget=max(0.0, float(alloc.sum()) - rr.secrecy_common),
        alloc_nonneg=max(0.0, -float(alloc.min(initial=0.0))),
        artificial_noise=max(0.0, rr.r_ec - rr.r_common),
        penalty_residual=float(np.linalg.norm(p_mat - state.hybrid)),
    )
