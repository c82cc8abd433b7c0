"""Penalty-based block-coordinate descent for the hybrid transmit design.

The digital-equivalent focuser matrix P is optimized by the inner convex
stage, the unit-modulus analog network F by coordinate-wise phase updates,
and the low-dimensional digital combiner W in closed form.  The coupling
P = F W is enforced through a quadratic penalty whose weight grows across
outer rounds until the factorization residual is negligible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import inner as inner_mod
from .crb import DegenerateBeamError, crb_joint, fim
from .geometry import ChannelSet, Scenario, SensingModel, SystemGeometry, tx_array_response
from .rates import (BeamState, RateReport, allocate_common, check_feasibility,
                    compute_rates, received_powers)


@dataclass(frozen=True)
class PenaltySchedule:
    rho_init: float = 100.0
    shrink: float = 0.5  # rho <- shrink * rho each outer round
    eps_inner: float = 1e-4  # absolute objective increment tolerance
    eps_rel: float = 1e-3  # relative increment tolerance (of |objective|)
    eps_residual_scale: float = 1e-4  # residual tol = scale * power budget
    max_outer: int = 30
    max_inner: int = 20


@dataclass
class SolveReport:
    state: BeamState
    rates: RateReport
    secrecy: float  # min over users of total secrecy rate, final hybrid beams
    crb_angle: float
    crb_range: float
    status: str  # converged | non_converged | infeasible | relaxed
    outer_iters: int
    inner_solves: int
    seconds: float
    relax_used: float = 1.0
    trace: list = field(default_factory=list)


def initialize(geom: SystemGeometry, scenario: Scenario, channels: ChannelSet,
               include_common: bool = True):
    """Deterministic starting point: analog columns steer at the target and
    the users in turn; focusers are matched filters projected away from the
    eavesdropper so the common stream starts with nonnegative secrecy.  With
    include_common=False the common column starts (and stays) zero."""
    n, n_rf = geom.n_tx, geom.n_rf
    k = scenario.n_users
    cols = [tx_array_response(geom, scenario.target)]
    cols += [tx_array_response(geom, u) for u in scenario.users]
    f_mat = np.column_stack([cols[l % len(cols)] for l in range(n_rf)])

    g = channels.eve_channel
    proj = np.eye(n) - np.outer(g, g.conj()) / np.real(g.conj() @ g)
    h = channels.user_channels
    a_t = tx_array_response(geom, scenario.target)
    common = proj @ (h.sum(axis=0) + a_t * np.mean(np.linalg.norm(h, axis=1)) / np.sqrt(n))
    p_cols = [common] + [proj @ h[j] for j in range(k)]
    n_active = k + 1 if include_common else k
    per_col = np.sqrt(scenario.power_budget / n_active)
    p_mat = np.column_stack([c * per_col / np.linalg.norm(c) for c in p_cols])
    if not include_common:
        p_mat[:, 0] = 0.0
    w_mat = digital_update(f_mat, p_mat)
    return p_mat, f_mat, w_mat


def analog_update(f_mat: np.ndarray, w_mat: np.ndarray, p_mat: np.ndarray,
                  sweeps: int = 3) -> np.ndarray:
    """Coordinate-wise unit-modulus updates of the analog network.

    Each entry minimizes ||P - F W||_F^2 with the others held fixed, so every
    sweep is a descent step.  Entries with a vanishing coefficient keep their
    previous phase.
    """
    f = f_mat.copy()
    y = w_mat @ w_mat.conj().T  # L x L
    z = p_mat @ w_mat.conj().T  # N x L
    y_diag = np.real(np.diag(y))
    for _ in range(sweeps):
        for nn in range(f.shape[0]):
            for mm in range(f.shape[1]):
                chi = z[nn, mm] - f[nn] @ y[:, mm] + f[nn, mm] * y_diag[mm]
                if abs(chi) > 1e-15:
                    f[nn, mm] = chi / abs(chi)
    return f


def digital_update(f_mat: np.ndarray, p_mat: np.ndarray,
                   cond_limit: float = 1e12) -> np.ndarray:
    """Least-squares digital combiner W = argmin ||P - F W||_F^2."""
    gram = f_mat.conj().T @ f_mat
    if np.linalg.cond(gram) < cond_limit:
        return np.linalg.solve(gram, f_mat.conj().T @ p_mat)
    return np.linalg.pinv(f_mat) @ p_mat


def _evaluate(p_eval: np.ndarray, scenario: Scenario, channels: ChannelSet,
              sensing: SensingModel):
    """True rates (with reporting-time common allocation) and CRBs."""
    pd = received_powers(p_eval, channels, scenario.noise_user, scenario.noise_eve)
    raw = compute_rates(pd, np.zeros(scenario.n_users))
    budget = float(max(np.min(raw.secrecy_common_raw), 0.0))
    alloc = allocate_common(raw.secrecy_private_raw, budget)
    rep = compute_rates(pd, alloc)
    try:
        cj = crb_joint(fim(p_eval, sensing, scenario.noise_eve, scenario.slots))
        crb_a, crb_r = float(cj[0, 0]), float(cj[1, 1])
    except DegenerateBeamError:
        crb_a, crb_r = np.inf, np.inf
    return rep, alloc, crb_a, crb_r


def penalty_bcd(
    geom: SystemGeometry,
    scenario: Scenario,
    channels: ChannelSet,
    sensing: SensingModel,
    schedule: PenaltySchedule = PenaltySchedule(),
    opts: inner_mod.InnerOptions = inner_mod.InnerOptions(),
    eval_channels: ChannelSet | None = None,
    eval_sensing: SensingModel | None = None,
) -> SolveReport:
    """Alternate inner convex solves with analog/digital factor updates while
    tightening the penalty, until P and F W agree.

    eval_channels/eval_sensing, when given, are used for the final metric
    evaluation instead of the design-time models (channel-mismatch studies).
    """
    t0 = time.time()
    p_mat, f_mat, w_mat = initialize(geom, scenario, channels,
                                     include_common=opts.include_common)
    rho = schedule.rho_init
    eps_res = schedule.eps_residual_scale * scenario.power_budget
    relax = 1.0
    n_solves = 0
    trace = []
    status = "non_converged"
    outer = 0
    any_progress = False
    for outer in range(1, schedule.max_outer + 1):
        prev_obj = -np.inf
        settled = False
        for _ in range(schedule.max_inner):
            res = inner_mod.algorithm1(
                p_mat, f_mat, w_mat, rho, scenario, channels, sensing,
                eps_inner=schedule.eps_inner, opts=opts, max_iter=1, relax=relax)
            n_solves += 1
            if res.status == "infeasible":
                return _report_infeasible(p_mat, f_mat, w_mat, scenario,
                                          eval_channels or channels,
                                          eval_sensing or sensing, t0,
                                          outer, n_solves, trace)
            if res.trace:
                p_mat = res.p_mat
                any_progress = True
            relax = res.relax_used
            if opts.include_penalty:
                f_mat = analog_update(f_mat, w_mat, p_mat)
                w_mat = digital_update(f_mat, p_mat)
                resid = np.linalg.norm(p_mat - f_mat @ w_mat) ** 2
                obj = res.rs - resid / rho
            else:
                resid = 0.0
                obj = res.rs
            trace.append(obj)
            if not res.trace:
                settled = True  # solver stalled; keep the last good iterate
                break
            gain_tol = max(schedule.eps_inner,
                           schedule.eps_rel * max(1.0, abs(obj)))
            if obj - prev_obj < gain_tol:
                settled = True
                break
            prev_obj = obj
        if any_progress and settled and (not opts.include_penalty
                                         or resid <= eps_res):
            status = "converged"
            break
        rho *= schedule.shrink
    state_alloc = np.zeros(scenario.n_users)
    p_final = f_mat @ w_mat if opts.include_penalty else p_mat
    rep, alloc, crb_a, crb_r = _evaluate(p_final, scenario,
                                         eval_channels or channels,
                                         eval_sensing or sensing)
    state = BeamState(digital_full=p_mat, analog=f_mat, digital=w_mat,
                      common_alloc=alloc)
    if status == "converged" and relax > 1.0:
        status = "relaxed"
    return SolveReport(
        state=state, rates=rep, secrecy=float(np.min(rep.secrecy_total)),
        crb_angle=crb_a, crb_range=crb_r, status=status, outer_iters=outer,
        inner_solves=n_solves, seconds=time.time() - t0, relax_used=relax,
        trace=trace)


def _report_infeasible(p_mat, f_mat, w_mat, scenario, channels, sensing,
                       t0, outer, n_solves, trace):
    rep, alloc, crb_a, crb_r = _evaluate(f_mat @ w_mat, scenario, channels, sensing)
    state = BeamState(digital_full=p_mat, analog=f_mat, digital=w_mat,
                      common_alloc=alloc)
    return SolveReport(state=state, rates=rep, secrecy=float(np.min(rep.secrecy_total)),
                       crb_angle=crb_a, crb_range=crb_r, status="infeasible",
                       outer_iters=outer, inner_solves=n_solves,
                       seconds=time.time() - t0, trace=trace)
