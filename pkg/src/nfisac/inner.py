"""Inner iterative stage: solve the fully-digital subproblem for fixed
analog/digital factors.

Each pass computes closed-form auxiliary variables (MMSE equalizers and
weights for the legitimate rates, quadratic-transform vectors for the
eavesdropping rates), builds conservative convex surrogates for the two
CRB constraints by splitting the indefinite quadratic forms into PSD
differences and linearizing, and solves the resulting cone program.

Channels are pre-scaled by the noise standard deviation before assembly
so the solver sees O(1)-to-O(1e4) data; SINRs and rates are invariant
under that scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import conic
from . import crb as crb_mod
from . import rates as rates_mod
from .conic import Affine, ConeProblem
from .crb import hermitian_split, psd_factor
from .geometry import ChannelSet, Scenario, SensingModel

LN2 = np.log(2.0)
TAU = 1.0 / LN2 + np.log2(LN2)  # rate-WMMSE offset, ~0.913929


class InnerInfeasibleError(RuntimeError):
    """The convex subproblem was reported infeasible."""


@dataclass(frozen=True)
class AuxiliarySet:
    eq_c: np.ndarray  # (K,) complex MMSE equalizers, common stream
    eq_p: np.ndarray  # (K,) private stream
    w_c: np.ndarray  # (K,) positive weights
    w_p: np.ndarray
    x_ec: np.ndarray  # (K+1,) quadratic-transform vector, common
    x_ek: np.ndarray  # (K, K+1) per private stream


@dataclass(frozen=True)
class SurrogateTerms:
    """Expansion data for one parameter's CRB constraint."""

    l_plus: list  # [L1+, L2+] thin factors, quad part of the +majorants
    l_minus: list  # [L1-, L2-]
    b_minus: list  # [m1- @ Ptilde, m2- @ Ptilde] linearized terms
    b_plus: list
    c_minus: list  # [Re Tr(Pt^H m1- Pt), ...]
    c_plus: list
    b_bar: np.ndarray  # (G^H G) @ Ptilde
    c_bar: float
    b_ddot: np.ndarray  # (Gdot^H Gdot) @ Ptilde
    c_ddot: float
    gamma_tilde: float
    m_plus: list  # kept for surrogate-value evaluation in tests
    m_minus: list
    a_mats: list  # [A1, A2]


@dataclass(frozen=True)
class SurrogateModel:
    expansion: np.ndarray  # Ptilde
    terms: dict  # {"angle": SurrogateTerms, "range": SurrogateTerms}


@dataclass(frozen=True)
class InnerOptions:
    include_common: bool = True  # False disables the common stream (SDMA)
    include_crb: bool = True
    include_penalty: bool = True
    backend: str = "clarabel"
    solver_tol: float = 1e-8
    max_solver_iter: int = 200


def update_wmmse(p_mat: np.ndarray, channels: ChannelSet, noise_user: float):
    """Closed-form MMSE equalizers and rate weights at the current beams."""
    h = channels.user_channels
    k = h.shape[0]
    gains = h.conj() @ p_mat  # (K, K+1) complex inner products
    pw = np.abs(gains) ** 2
    t_kc = pw.sum(axis=1) + noise_user
    t_kp = pw[:, 1:].sum(axis=1) + noise_user
    s_kp = pw[np.arange(k), np.arange(k) + 1]

    eq_c = gains[:, 0].conj() / t_kc  # p_0^H h_k / T_kc
    eq_p = gains[np.arange(k), np.arange(k) + 1].conj() / t_kp
    mmse_c = (t_kc - pw[:, 0]) / t_kc  # I_kc / T_kc
    mmse_p = (t_kp - s_kp) / t_kp
    w_c = 1.0 / (mmse_c * LN2)
    w_p = 1.0 / (mmse_p * LN2)
    return eq_c, eq_p, w_c, w_p


def scaled_eve_column(channels: ChannelSet, noise_eve: float) -> np.ndarray:
    """Eavesdropper-channel column scaled so |g^H col|^2 equals the noise power."""
    g = channels.eve_channel
    return (np.sqrt(noise_eve) / np.real(g.conj() @ g)) * g


def eve_decoupling_matrix(p_mat: np.ndarray, channels: ChannelSet,
                          noise_eve: float, stream: int) -> np.ndarray:
    """Matrix whose column Gram against g_e reproduces one eavesdropping ratio.

    stream = 0 gives the common-stream matrix (noise column first);
    stream = k >= 1 replaces private column k.
    """
    t = p_mat.copy()
    t[:, stream] = scaled_eve_column(channels, noise_eve)
    return t


def update_quadratic_aux(p_mat: np.ndarray, channels: ChannelSet, noise_eve: float):
    """Optimal quadratic-transform auxiliary vectors for the eavesdropping rates."""
    g = channels.eve_channel
    if channels.eve_gain == 0:
        raise ValueError("eavesdropper absent (zero gain)")
    t_ec = float(np.sum(np.abs(g.conj() @ p_mat) ** 2) + noise_eve)
    k = p_mat.shape[1] - 1
    t0 = eve_decoupling_matrix(p_mat, channels, noise_eve, 0)
    x_ec = (t0.conj().T @ g) / t_ec
    x_ek = np.empty((k, k + 1), dtype=complex)
    for j in range(1, k + 1):
        tk = eve_decoupling_matrix(p_mat, channels, noise_eve, j)
        x_ek[j - 1] = (tk.conj().T @ g) / t_ec
    return x_ec, x_ek


def eve_surrogate_value(x: np.ndarray, t_mat: np.ndarray, p_mat: np.ndarray,
                        channels: ChannelSet, noise_eve: float) -> float:
    """f(x, P) = log2(2 Re(x^H T^H g) - T_ec |x|^2); tight at the optimal x."""
    g = channels.eve_channel
    t_ec = float(np.sum(np.abs(g.conj() @ p_mat) ** 2) + noise_eve)
    arg = 2.0 * np.real(x.conj() @ (t_mat.conj().T @ g)) - t_ec * np.real(x.conj() @ x)
    return float(np.log2(arg))


def compute_auxiliaries(p_mat, channels, noise_user, noise_eve) -> AuxiliarySet:
    eq_c, eq_p, w_c, w_p = update_wmmse(p_mat, channels, noise_user)
    x_ec, x_ek = update_quadratic_aux(p_mat, channels, noise_eve)
    return AuxiliarySet(eq_c=eq_c, eq_p=eq_p, w_c=w_c, w_p=w_p, x_ec=x_ec, x_ek=x_ek)


def _exact_quad(p_mat: np.ndarray, a_mat: np.ndarray) -> float:
    """Re Tr(A P P^H)."""
    return float(np.real(np.sum((a_mat @ p_mat) * p_mat.conj())))


def surrogate_value(terms: SurrogateTerms, x: int, p_mat: np.ndarray) -> float:
    """Printed convex majorant of Re Tr(A_x P P^H) around the expansion point."""
    mp, mm = terms.m_plus[x], terms.m_minus[x]
    quad = float(np.real(np.sum((mp @ p_mat) * p_mat.conj())))
    lin = 2.0 * float(np.real(np.sum(terms.b_minus[x].conj() * p_mat)))
    return quad - lin + terms.c_minus[x]


def build_crb_surrogates(p_tilde: np.ndarray, sensing: SensingModel,
                         scenario: Scenario, relax: float = 1.0) -> SurrogateModel:
    """DC-split majorants and linearizations of the CRB constraint pieces."""
    gt = sensing.g_tilde
    terms = {}
    for name, deriv, gamma in (
        ("angle", sensing.g_dtheta, scenario.crb_angle_max),
        ("range", sensing.g_drange, scenario.crb_range_max),
    ):
        a1 = deriv.conj().T @ gt
        a2 = -1j * a1
        l_plus, l_minus, b_minus, b_plus = [], [], [], []
        c_minus, c_plus, m_plus_l, m_minus_l = [], [], [], []
        for a in (a1, a2):
            split = hermitian_split(a)
            m_p, m_m = split.m_plus, split.m_minus
            l_plus.append(psd_factor(m_p))
            l_minus.append(psd_factor(m_m))
            bm = m_m @ p_tilde
            bp = m_p @ p_tilde
            b_minus.append(bm)
            b_plus.append(bp)
            c_minus.append(float(np.real(np.sum(bm.conj() * p_tilde))))
            c_plus.append(float(np.real(np.sum(bp.conj() * p_tilde))))
            m_plus_l.append(m_p)
            m_minus_l.append(m_m)
        gbar = gt.conj().T @ gt
        gddot = deriv.conj().T @ deriv
        b_bar = gbar @ p_tilde
        b_ddot = gddot @ p_tilde
        gamma_tilde = scenario.noise_eve / (
            2.0 * scenario.slots * abs(sensing.gain) ** 2 * (gamma * relax)
        )
        terms[name] = SurrogateTerms(
            l_plus=l_plus, l_minus=l_minus, b_minus=b_minus, b_plus=b_plus,
            c_minus=c_minus, c_plus=c_plus,
            b_bar=b_bar, c_bar=float(np.real(np.sum(b_bar.conj() * p_tilde))),
            b_ddot=b_ddot, c_ddot=float(np.real(np.sum(b_ddot.conj() * p_tilde))),
            gamma_tilde=gamma_tilde, m_plus=m_plus_l, m_minus=m_minus_l,
            a_mats=[a1, a2],
        )
    return SurrogateModel(expansion=p_tilde.copy(), terms=terms)


@dataclass
class InnerProblem:
    """Assembled cone program plus the variable map needed to read it back."""

    prog: ConeProblem
    n: int
    k: int
    idx_p_re: np.ndarray
    idx_p_im: np.ndarray
    idx_rs: int
    idx_alloc: np.ndarray
    idx_rp: np.ndarray
    aux_idx: dict = field(default_factory=dict)

    def extract(self, z: np.ndarray):
        n, k = self.n, self.k
        p = (z[self.idx_p_re] + 1j * z[self.idx_p_im]).reshape((n, k + 1), order="F")
        return p, float(z[self.idx_rs]), z[self.idx_alloc].copy(), z[self.idx_rp].copy()


def _col_slice(idx_block, col, n):
    return idx_block[col * n:(col + 1) * n]


def assemble_inner_problem(
    aux: AuxiliarySet,
    surrogates: SurrogateModel | None,
    rho: float,
    fw_target: np.ndarray | None,
    scenario: Scenario,
    channels: ChannelSet,
    opts: InnerOptions = InnerOptions(),
) -> InnerProblem:
    """Cone program for the digital-focuser subproblem at fixed auxiliaries.

    Channels/noise are rescaled internally; the CRB blocks stay in SI units.
    """
    h = channels.user_channels
    k, n = h.shape
    su = np.sqrt(scenario.noise_user)
    se = np.sqrt(scenario.noise_eve)
    hs = h / su
    gs = channels.eve_channel / se
    gs_norm2 = float(np.real(gs.conj() @ gs))
    n_p = n * (k + 1)
    # auxiliaries were computed against physical channels; in the noise-scaled
    # world the equalizers pick up sigma_u, the transform vectors sigma_e, and
    # the weights are invariant
    aux = replace(aux, eq_c=su * aux.eq_c, eq_p=su * aux.eq_p,
                  x_ec=se * aux.x_ec, x_ek=se * aux.x_ek)

    prob = ConeProblem()
    idx_p_re = prob.add_vars(n_p)
    idx_p_im = prob.add_vars(n_p)
    idx_rs = prob.add_vars(1)[0]
    idx_alloc = prob.add_vars(k)
    idx_rp = prob.add_vars(k)
    idx_qp = prob.add_vars(k)
    idx_zk = prob.add_vars(k)
    idx_sk = prob.add_vars(k)
    if opts.include_common:
        idx_qc = prob.add_vars(k)
        idx_zc = prob.add_vars(1)[0]
        idx_sc = prob.add_vars(1)[0]
    crb_idx = {}
    if opts.include_crb:
        for name in ("angle", "range"):
            crb_idx[name] = {
                "mu": prob.add_vars(1)[0], "alpha": prob.add_vars(1)[0],
                "t": prob.add_vars(2),
            }
    if opts.include_penalty:
        idx_pen = prob.add_vars(1)[0]

    def re_inner(cvec, col, const=0.0):
        """Affine for Re(c^H p_col)."""
        a = prob.row()
        a[_col_slice(idx_p_re, col, n)] = np.real(cvec)
        a[_col_slice(idx_p_im, col, n)] = np.imag(cvec)
        return Affine(a, const)

    def matvec_rows(l_mat, col):
        """Affines for Re/Im components of L @ p_col (plain product)."""
        out = []
        lr, li = np.real(l_mat), np.imag(l_mat)
        for j in range(l_mat.shape[0]):
            a = prob.row()
            a[_col_slice(idx_p_re, col, n)] = lr[j]
            a[_col_slice(idx_p_im, col, n)] = -li[j]
            out.append(Affine(a, 0.0))
            a = prob.row()
            a[_col_slice(idx_p_re, col, n)] = li[j]
            a[_col_slice(idx_p_im, col, n)] = lr[j]
            out.append(Affine(a, 0.0))
        return out

    def conj_inner_rows(cvec, cols):
        """Affines for Re/Im of c^H p_col over the given columns."""
        out = []
        for col in cols:
            a = prob.row()
            a[_col_slice(idx_p_re, col, n)] = np.real(cvec)
            a[_col_slice(idx_p_im, col, n)] = np.imag(cvec)
            out.append(Affine(a, 0.0))
            a = prob.row()
            a[_col_slice(idx_p_re, col, n)] = -np.imag(cvec)
            a[_col_slice(idx_p_im, col, n)] = np.real(cvec)
            out.append(Affine(a, 0.0))
        return out

    def scalar(idx, coef=1.0, const=0.0):
        a = prob.row()
        a[idx] = coef
        return Affine(a, const)

    one = Affine(prob.row(), 1.0)

    # objective: min -Rs + (1/rho) * penalty epigraph
    obj = np.zeros(prob.n_var)
    obj[idx_rs] = -1.0
    if opts.include_penalty:
        obj[idx_pen] = 1.0 / rho
    prob.objective = obj

    # power ball
    p_rows = [scalar(i) for i in np.concatenate([idx_p_re, idx_p_im])]
    prob.add_soc(Affine(prob.row(), np.sqrt(scenario.power_budget)), p_rows)

    # penalty epigraph ||P - FW||_F^2 <= e
    if opts.include_penalty:
        fw = np.asarray(fw_target)
        diff_rows = []
        for col in range(k + 1):
            a = prob.row()
            # identity rows: p_col - fw_col, real then imaginary parts
            for j in range(n):
                ar = prob.row()
                ar[idx_p_re[col * n + j]] = 1.0
                diff_rows.append(Affine(ar, -float(np.real(fw[j, col]))))
                ai = prob.row()
                ai[idx_p_im[col * n + j]] = 1.0
                diff_rows.append(Affine(ai, -float(np.imag(fw[j, col]))))
        prob.add_quad_leq(diff_rows, scalar(idx_pen))

    # max-min coupling and allocation sign
    for j in range(k):
        prob.add_leq0(scalar(idx_rs, 1.0) + _neg(scalar(idx_alloc[j])) + _neg(scalar(idx_rp[j])))
        prob.add_leq0(scalar(idx_alloc[j], -1.0))
    if not opts.include_common:
        for j in range(k):
            prob.add_eq(scalar(idx_alloc[j]))
        for i in range(n):
            prob.add_eq(scalar(idx_p_re[i]))
            prob.add_eq(scalar(idx_p_im[i]))

    # eavesdropper quadratic-transform blocks (scaled channels, noise = 1)
    v0 = gs / gs_norm2  # scaled noise column: |gs^H v0|^2 = 1
    priv_cols = list(range(1, k + 1))
    all_cols = list(range(k + 1))

    def eve_block(x, replaced_col, idx_z, idx_s):
        """Epigraph z <= log2(...) for one transform vector x."""
        xn2 = float(np.real(x.conj() @ x))
        # s >= |x|^2 * sum_i |gs^H p_i|^2
        prob.add_quad_leq(conj_inner_rows(np.sqrt(xn2) * gs, all_cols), scalar(idx_s))
        lin = Affine(prob.row(), 0.0)
        const = 2.0 * float(np.real(np.conj(x[replaced_col]) * (gs.conj() @ v0)))
        for col in all_cols:
            if col == replaced_col:
                continue
            # 2 Re(conj(x_col) p_col^H g) written as Re(c^H p) with c = 2 conj(x_col) g
            lin = _add(lin, re_inner(2.0 * np.conj(x[col]) * gs, col))
        arg = _add(lin, Affine(prob.row(), const - xn2))
        arg = _add(arg, scalar(idx_s, -1.0))
        prob.add_exp(scalar(idx_z, LN2), one, arg)

    for j in range(k):
        eve_block(aux.x_ek[j], j + 1, idx_zk[j], idx_sk[j])
    if opts.include_common:
        eve_block(aux.x_ec, 0, idx_zc, idx_sc)

    # private-rate WMSE constraints
    for j in range(k):
        w, om = aux.w_p[j], aux.eq_p[j]
        hhat = np.sqrt(w) * np.conj(om) * hs[j]
        ell = w * np.conj(om) * hs[j]
        prob.add_quad_leq(conj_inner_rows(hhat, priv_cols), scalar(idx_qp[j]))
        const = w * (abs(om) ** 2 + 1.0) - np.log2(w) - TAU
        row = scalar(idx_rp[j], 1.0) + scalar(idx_qp[j], 1.0) + scalar(idx_zk[j], -1.0)
        row = _add(row, re_inner(-2.0 * ell, j + 1, const=float(const)))
        prob.add_leq0(row)

    # common-rate WMSE constraints (sum of allocations bounded per user)
    if opts.include_common:
        for j in range(k):
            w, om = aux.w_c[j], aux.eq_c[j]
            hhat = np.sqrt(w) * np.conj(om) * hs[j]
            ell = w * np.conj(om) * hs[j]
            prob.add_quad_leq(conj_inner_rows(hhat, all_cols), scalar(idx_qc[j]))
            const = w * (abs(om) ** 2 + 1.0) - np.log2(w) - TAU
            row = scalar(idx_qc[j], 1.0) + scalar(idx_zc, -1.0)
            for jj in range(k):
                row = _add(row, scalar(idx_alloc[jj], 1.0))
            row = _add(row, re_inner(-2.0 * ell, 0, const=float(const)))
            prob.add_leq0(row)

    # CRB surrogate blocks
    if opts.include_crb:
        for name in ("angle", "range"):
            t = surrogates.terms[name]
            v = crb_idx[name]
            for x in (0, 1):
                # majorant of +g_x <= t_x
                lin = scalar(v["t"][x], 1.0, -t.c_minus[x])
                for col in all_cols:
                    lin = _add(lin, re_inner(2.0 * t.b_minus[x][:, col], col))
                quad = []
                for col in all_cols:
                    quad.extend(matvec_rows(t.l_plus[x], col))
                prob.add_quad_leq(quad, lin)
                # majorant of -g_x <= t_x
                lin = scalar(v["t"][x], 1.0, -t.c_plus[x])
                for col in all_cols:
                    lin = _add(lin, re_inner(2.0 * t.b_plus[x][:, col], col))
                quad = []
                for col in all_cols:
                    quad.extend(matvec_rows(t.l_minus[x], col))
                prob.add_quad_leq(quad, lin)
            prob.add_soc(scalar(v["mu"]), [scalar(v["t"][0]), scalar(v["t"][1])])
            # alpha lower-bounded by linearized Tr(G P P^H G^H)
            row = scalar(v["alpha"], 1.0, t.c_bar)
            for col in all_cols:
                row = _add(row, re_inner(-2.0 * t.b_bar[:, col], col))
            prob.add_leq0(row)
            prob.add_leq0(scalar(v["alpha"], -1.0))
            # mu^2 / alpha + gamma_tilde <= linearized Tr(Gdot P P^H Gdot^H)
            w_expr = Affine(prob.row(), -t.c_ddot - t.gamma_tilde)
            for col in all_cols:
                w_expr = _add(w_expr, re_inner(2.0 * t.b_ddot[:, col], col))
            prob.add_rsoc(scalar(v["alpha"], 0.5), w_expr, [scalar(v["mu"])])

    aux_map = {"qp": idx_qp, "zk": idx_zk, "sk": idx_sk, "crb": crb_idx}
    if opts.include_common:
        aux_map.update({"qc": idx_qc, "zc": idx_zc, "sc": idx_sc})
    if opts.include_penalty:
        aux_map["pen"] = idx_pen
    return InnerProblem(
        prog=prob, n=n, k=k, idx_p_re=idx_p_re, idx_p_im=idx_p_im,
        idx_rs=idx_rs, idx_alloc=idx_alloc, idx_rp=idx_rp, aux_idx=aux_map,
    )


def _add(a: Affine, b: Affine) -> Affine:
    return Affine(a.coef + b.coef, a.const + b.const)


def _neg(a: Affine) -> Affine:
    return Affine(-a.coef, -a.const)


def solve_conic(problem: InnerProblem, tol: float = 1e-8,
                backend: str = "clarabel") -> conic.ConeSolution:
    """Solve an assembled inner problem; thin wrapper over the cone backend."""
    return conic.solve_cone_problem(problem.prog, tol=tol, backend=backend)


def _screen_candidate(p_new, rs, alloc, scenario, channels, sensing,
                      relax, opts, tol_obj=1e-3):
    """Vet a conic iterate against exact (non-surrogate) metrics and return
    a trustworthy objective value for it, or None to reject.

    Low-accuracy solver exits can report wildly optimistic objectives and
    violated constraints.  Feasibility (power, allocation, CRB) must hold
    exactly up to small slack; the objective is capped at the exact
    evaluation, which is always sound because every surrogate is
    conservative."""
    if not np.all(np.isfinite(p_new)) or not np.isfinite(rs):
        return None
    if np.linalg.norm(p_new) ** 2 > scenario.power_budget * (1.0 + 1e-6):
        return None
    try:
        pd = rates_mod.received_powers(p_new, channels, scenario.noise_user,
                                       scenario.noise_eve)
        rr = rates_mod.compute_rates(pd, alloc)
    except Exception:
        return None
    if float(np.sum(alloc)) > rr.secrecy_common_raw + tol_obj:
        return None
    if opts.include_crb:
        for which, lim in (("angle", scenario.crb_angle_max),
                           ("range", scenario.crb_range_max)):
            if not np.isfinite(lim):
                continue
            try:
                val = crb_mod.crb_closed_form(p_new, sensing,
                                              scenario.noise_eve,
                                              scenario.slots, which)
            except crb_mod.DegenerateBeamError:
                return None
            if val > 1.01 * relax * lim:
                return None
    return min(float(rs), float(np.min(alloc + rr.secrecy_private_raw)))


@dataclass(frozen=True)
class InnerResult:
    p_mat: np.ndarray
    rs: float
    alloc: np.ndarray
    rp: np.ndarray
    trace: list
    status: str
    iterations: int
    relax_used: float


def algorithm1(
    p_init: np.ndarray,
    f_mat: np.ndarray | None,
    w_mat: np.ndarray | None,
    rho: float,
    scenario: Scenario,
    channels: ChannelSet,
    sensing: SensingModel,
    eps_inner: float = 1e-4,
    opts: InnerOptions = InnerOptions(),
    max_iter: int = 50,
    relax: float = 1.0,
    max_relax: float = 1e6,
) -> InnerResult:
    """Alternate closed-form auxiliary updates with conic solves until the
    objective increment falls below eps_inner."""
    p_mat = p_init.copy()
    fw = None
    if opts.include_penalty:
        fw = f_mat @ w_mat
    trace = []
    rs = np.nan
    alloc = np.zeros(channels.user_channels.shape[0])
    rp = np.zeros_like(alloc)
    status = "max_iter"
    it = 0
    while it < max_iter:
        it += 1
        aux = compute_auxiliaries(p_mat, channels, scenario.noise_user,
                                  scenario.noise_eve)
        surr = None
        if opts.include_crb:
            surr = build_crb_surrogates(p_mat, sensing, scenario, relax=relax)
        problem = assemble_inner_problem(aux, surr, rho, fw, scenario,
                                         channels, opts)
        sol = solve_conic(problem, tol=opts.solver_tol, backend=opts.backend)

        def usable(s):
            """Extract and exact-screen a candidate iterate, if any."""
            if s.x is None or s.status in ("infeasible", "unbounded"):
                return None
            p_c, rs_c, alloc_c, rp_c = problem.extract(s.x)
            rs_ok = _screen_candidate(p_c, rs_c, alloc_c, scenario,
                                      channels, sensing, relax, opts)
            if rs_ok is None:
                return None
            return p_c, rs_ok, alloc_c, rp_c

        accepted = usable(sol)
        if accepted is None and sol.status != "infeasible" \
                and opts.backend == "clarabel":
            try:  # one retry through the fallback backend before stalling
                sol2 = solve_conic(problem, tol=max(opts.solver_tol, 1e-7),
                                   backend="scs")
            except Exception:
                sol2 = None
            if sol2 is not None:
                accepted = usable(sol2)
                if accepted is None and sol2.status == "infeasible":
                    sol = sol2
        if accepted is None and sol.status == "infeasible" and not trace:
            if opts.include_crb and relax * 10.0 <= max_relax:
                # feasibility restoration: loosen the CRB targets and retry
                relax *= 10.0
                it -= 1
                continue
            status = "infeasible"
            break
        if accepted is None:
            # solver breakdown or an iterate the exact metrics reject: the
            # previous iterate is still feasible, so stall rather than fail
            status = "converged" if trace else "numerical"
            break
        p_new, rs_new, alloc_new, rp_new = accepted
        pen = np.linalg.norm(p_new - fw) ** 2 if opts.include_penalty else 0.0
        obj = rs_new - pen / rho if opts.include_penalty else rs_new
        if trace and obj < trace[-1] - 1e-9:
            # a validated but slightly sub-optimal exit would break the
            # monotone ascent guarantee; keep the previous iterate
            status = "converged"
            break
        p_mat, rs, alloc, rp = p_new, rs_new, alloc_new, rp_new
        trace.append(obj)
        if len(trace) > 1 and trace[-1] - trace[-2] < eps_inner:
            status = "converged"
            break
    else:
        status = "max_iter"
    if status == "max_iter" and trace:
        status = "converged" if len(trace) > 1 and trace[-1] - trace[-2] < eps_inner else "max_iter"
    return InnerResult(p_mat=p_mat, rs=float(rs), alloc=alloc, rp=rp,
                       trace=trace, status=status, iterations=len(trace),
                       relax_used=relax)
