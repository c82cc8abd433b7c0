"""Fisher information and Cramér–Rao bounds for joint angle/range estimation.

Parameter order everywhere is (angle, range, Re gain, Im gain).  Trace
expressions are evaluated as Frobenius inner products of M x (K+1)
intermediates to avoid forming N x N matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SensingModel


class SingularGeometryError(RuntimeError):
    """Schur complement too ill-conditioned to invert."""


class DegenerateBeamError(RuntimeError):
    """Closed-form CRB denominator is not positive."""


@dataclass(frozen=True)
class FisherMatrix:
    j: np.ndarray  # 4x4, includes the 2T/sigma^2 prefactor
    j11: np.ndarray  # 2x2 unscaled blocks
    j12: np.ndarray  # 2x2
    j22: np.ndarray  # 2x2
    noise: float
    slots: int
    singular: bool


@dataclass(frozen=True)
class HermitianSplit:
    m_plus: np.ndarray
    m_minus: np.ndarray


def _tr(x, y):
    """Tr(X Y^H) for equal-shaped matrices via the Frobenius inner product."""
    return np.sum(x * y.conj())


def fim(p_mat: np.ndarray, sensing: SensingModel, noise: float, slots: int) -> FisherMatrix:
    """4x4 Fisher information matrix for (angle, range, Re gain, Im gain)."""
    gt_p = sensing.g_tilde @ p_mat
    dth_p = sensing.g_dtheta @ p_mat
    dr_p = sensing.g_drange @ p_mat
    beta = sensing.gain
    ab2 = abs(beta) ** 2

    # J11: derivative-derivative block
    t_thth = _tr(dth_p, dth_p)
    t_rr = _tr(dr_p, dr_p)
    t_rth = _tr(dr_p, dth_p)  # Tr(Gdot_r R Gdot_th^H)
    t_thr = _tr(dth_p, dr_p)
    j11 = ab2 * np.real(np.array([[t_thth, t_rth], [t_thr, t_rr]]))

    # J12: derivative-gain block, columns scaled by [1, j]
    k_th = np.conj(beta) * _tr(gt_p, dth_p)
    k_r = np.conj(beta) * _tr(gt_p, dr_p)
    col = np.array([k_th, k_r])
    j12 = np.real(np.outer(col, np.array([1.0, 1.0j])))

    # J22: gain-gain block
    t_gg = np.real(_tr(gt_p, gt_p))
    j22 = t_gg * np.eye(2)

    scale = 2.0 * slots / noise
    full = scale * np.block([[j11, j12], [j12.T, j22]])
    singular = not np.any(p_mat)
    return FisherMatrix(
        j=full, j11=j11, j12=j12, j22=j22, noise=noise, slots=slots, singular=singular
    )


def crb_joint(f: FisherMatrix, cond_limit: float = 1e12) -> np.ndarray:
    """2x2 CRB matrix for (angle, range) via the Schur complement."""
    if f.singular:
        raise SingularGeometryError("all-zero beamformer gives a singular FIM")
    j22_inv = np.linalg.inv(f.j22)
    schur = f.j11 - f.j12 @ j22_inv @ f.j12.T
    if np.linalg.cond(schur) > cond_limit:
        raise SingularGeometryError("Schur complement is numerically singular")
    return (f.noise / (2.0 * f.slots)) * np.linalg.inv(schur)


def crb_closed_form(
    p_mat: np.ndarray,
    sensing: SensingModel,
    noise: float,
    slots: int,
    which: str,
) -> float:
    """Scalar CRB for one parameter with the other treated as known."""
    if which == "angle":
        deriv = sensing.g_dtheta
    elif which == "range":
        deriv = sensing.g_drange
    else:
        raise ValueError("which must be 'angle' or 'range'")
    gt_p = sensing.g_tilde @ p_mat
    d_p = deriv @ p_mat
    t_gg = np.real(_tr(gt_p, gt_p))
    t_dd = np.real(_tr(d_p, d_p))
    cross = _tr(gt_p, d_p)  # Tr(G p p^H Gdot^H)
    gap = t_dd * t_gg - abs(cross) ** 2  # Cauchy-Schwarz gap, >= 0
    den = 2.0 * slots * abs(sensing.gain) ** 2 * gap
    if den <= 0:
        raise DegenerateBeamError("closed-form CRB denominator is not positive")
    return float(noise * t_gg / den)


def hermitian_split(a: np.ndarray) -> HermitianSplit:
    """Split the Hermitian part of A into a difference of two PSD matrices."""
    s = 0.5 * (a + a.conj().T)
    vals, vecs = np.linalg.eigh(s)
    plus = (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T
    minus = (vecs * np.maximum(-vals, 0.0)) @ vecs.conj().T
    return HermitianSplit(m_plus=plus, m_minus=minus)


def psd_factor(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Thin factor L with L^H L = M for PSD M; rows of negligible weight dropped."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    vals = np.maximum(vals, 0.0)
    keep = vals > tol * max(vals.max(initial=0.0), 1.0)
    if not np.any(keep):
        return np.zeros((0, m.shape[0]), dtype=complex)
    return (np.sqrt(vals[keep])[:, None] * vecs[:, keep].conj().T)
