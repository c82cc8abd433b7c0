"""Minimal cone-program container and pluggable conic solver backends.

Programs are built as   min c'z  s.t.  b - A z in K,  with K a product of
zero, nonnegative, second-order, and exponential cones (in that block
order).  Rotated second-order cones are rewritten as plain SOCs at build
time.  The default backend is Clarabel; SCS is available as a fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class SolverUnavailableError(RuntimeError):
    pass


@dataclass
class Affine:
    """coef . z + const, with coef a dense row over all declared variables."""

    coef: np.ndarray
    const: float = 0.0

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(self.coef + other.coef, self.const + other.const)

    def __neg__(self) -> "Affine":
        return Affine(-self.coef, -self.const)


@dataclass
class ConeProblem:
    """Conic program with rows grouped by cone family."""

    n_var: int = 0
    objective: np.ndarray | None = None
    zero_rows: list = field(default_factory=list)  # (coef, const): coef.z + const = 0
    nonneg_rows: list = field(default_factory=list)  # coef.z + const <= 0
    soc_blocks: list = field(default_factory=list)  # list[Affine], [t, u1, ...]
    exp_blocks: list = field(default_factory=list)  # (x, y, z) Affine triples

    def add_vars(self, n: int) -> np.ndarray:
        idx = np.arange(self.n_var, self.n_var + n)
        self.n_var += n
        return idx

    def row(self) -> np.ndarray:
        return np.zeros(self.n_var)

    def affine(self, idx=None, coef=None, const=0.0) -> Affine:
        r = self.row()
        if idx is not None:
            r[idx] = coef
        return Affine(r, float(const))

    def add_eq(self, a: Affine):
        self.zero_rows.append(a)

    def add_leq0(self, a: Affine):
        """a <= 0."""
        self.nonneg_rows.append(a)

    def add_soc(self, t: Affine, u: list):
        """||u|| <= t."""
        self.soc_blocks.append([t] + list(u))

    def add_rsoc(self, y: Affine, z: Affine, u: list):
        """||u||^2 <= 2 y z  (y, z >= 0), rewritten as an SOC."""
        t = Affine(y.coef + z.coef, y.const + z.const)
        d = Affine(y.coef - z.coef, y.const - z.const)
        scaled = [Affine(np.sqrt(2.0) * a.coef, np.sqrt(2.0) * a.const) for a in u]
        self.add_soc(t, scaled + [d])

    def add_quad_leq(self, u: list, lin: Affine):
        """sum of squares of u <= lin (affine)."""
        half = Affine(0.5 * lin.coef, 0.5 * lin.const)
        self.add_rsoc(half, Affine(self.row(), 1.0), u)

    def add_exp(self, x: Affine, y: Affine, z: Affine):
        """y * exp(x / y) <= z."""
        self.exp_blocks.append((x, y, z))

    @property
    def cone_summary(self) -> dict:
        return {
            "vars": self.n_var,
            "zero": len(self.zero_rows),
            "nonneg": len(self.nonneg_rows),
            "soc": [len(b) for b in self.soc_blocks],
            "exp": len(self.exp_blocks),
        }

    def matrices(self):
        """Stack rows into (c, A, b, dims) with rows ordered zero/nonneg/soc/exp."""
        rows, consts = [], []
        for a in self.zero_rows:
            rows.append(a.coef)
            consts.append(a.const)
        for a in self.nonneg_rows:
            rows.append(a.coef)
            consts.append(a.const)
        soc_dims = []
        for block in self.soc_blocks:
            soc_dims.append(len(block))
            for a in block:
                rows.append(-a.coef)
                consts.append(-a.const)
        for (x, y, z) in self.exp_blocks:
            for a in (x, y, z):
                rows.append(-a.coef)
                consts.append(-a.const)
        a_mat = sp.csc_matrix(np.vstack(rows)) if rows else sp.csc_matrix((0, self.n_var))
        # zero/nonneg slack = -(coef.z + const); soc/exp slack = coef.z + const,
        # whose rows and consts were stored negated above.  Both give b = -stored.
        b = -np.asarray(consts) if consts else np.zeros(0)
        n_zero = len(self.zero_rows)
        n_nonneg = len(self.nonneg_rows)
        return np.asarray(self.objective, dtype=float), a_mat, b, {
            "zero": n_zero, "nonneg": n_nonneg, "soc": soc_dims,
            "exp": len(self.exp_blocks),
        }


@dataclass(frozen=True)
class ConeSolution:
    status: str  # optimal | infeasible | unbounded | max_iter | numerical
    x: np.ndarray | None
    objective: float | None


def solve_cone_problem(problem: ConeProblem, tol: float = 1e-8,
                       backend: str = "clarabel", max_iter: int = 200) -> ConeSolution:
    if backend == "clarabel":
        return _solve_clarabel(problem, tol, max_iter)
    if backend == "scs":
        return _solve_scs(problem, tol, max_iter)
    raise SolverUnavailableError(f"unknown backend {backend!r}")


def _solve_clarabel(problem: ConeProblem, tol: float, max_iter: int) -> ConeSolution:
    import clarabel

    c, a_mat, b, dims = problem.matrices()
    cones = []
    if dims["zero"]:
        cones.append(clarabel.ZeroConeT(dims["zero"]))
    if dims["nonneg"]:
        cones.append(clarabel.NonnegativeConeT(dims["nonneg"]))
    for d in dims["soc"]:
        cones.append(clarabel.SecondOrderConeT(d))
    for _ in range(dims["exp"]):
        cones.append(clarabel.ExponentialConeT())

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    p_zero = sp.csc_matrix((problem.n_var, problem.n_var))
    solver = clarabel.DefaultSolver(p_zero, c, a_mat, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    x = np.asarray(sol.x) if sol.x is not None else None
    if status in ("Solved", "SolverStatus.Solved"):
        return ConeSolution("optimal", x, float(sol.obj_val))
    if "AlmostSolved" in status:
        return ConeSolution("optimal", x, float(sol.obj_val))
    if "PrimalInfeasible" in status:
        return ConeSolution("infeasible", None, None)
    if "DualInfeasible" in status:
        return ConeSolution("unbounded", None, None)
    if "MaxIterations" in status or "MaxTime" in status:
        return ConeSolution("max_iter", x, float(sol.obj_val))
    return ConeSolution("numerical", x, None)


def _solve_scs(problem: ConeProblem, tol: float, max_iter: int) -> ConeSolution:
    import scs

    c, a_mat, b, dims = problem.matrices()
    cone = {}
    if dims["zero"]:
        cone["z"] = dims["zero"]
    if dims["nonneg"]:
        cone["l"] = dims["nonneg"]
    if dims["soc"]:
        cone["q"] = dims["soc"]
    if dims["exp"]:
        cone["ep"] = dims["exp"]
    data = {"A": a_mat, "b": b, "c": c}
    solver = scs.SCS(data, cone, eps_abs=tol, eps_rel=tol,
                     max_iters=max(20000, max_iter * 100), verbose=False)
    out = solver.solve()
    status = out["info"]["status"]
    if "solved" in status.lower():
        return ConeSolution("optimal", out["x"], float(c @ out["x"]))
    if "infeasible" in status.lower():
        return ConeSolution("infeasible", None, None)
    if "unbounded" in status.lower():
        return ConeSolution("unbounded", None, None)
    return ConeSolution("numerical", None, None)
