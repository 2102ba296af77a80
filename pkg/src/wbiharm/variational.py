"""
Finite-difference discretization of the transformed quadratic form.

On the interior chart a radial u on B_R becomes w(t) on (-ln R, inf) and

    int |x|^alpha (Delta u)^2 = omega_N int (w''^2 + 2 delta~ w'^2 + delta w^2) dt,
    int |x|^l |u|^q          = omega_N int e^{-q_* t} |w|^q dt.

The line is truncated to [t_min, t_max]. At t_max (r -> 0) the profile is
clamped (w = w' = 0), justified by the decay of w; at t_min (r = R) the
default is the Navier condition u = v = 0. Either way the stiffness matrix
is symmetric pentadiagonal on the interior nodes.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .exponents import ProblemParams, chart_weight_exponent, critical_exponent, sphere_area
from .transform import ChartKind, InsufficientResolutionError, TransformedProfile

log = logging.getLogger(__name__)

MIN_NODES = 16
MIN_WINDOW = 10.0
# the slowest decaying mode of w is e^{-(N'-4)/2 t}; clamping at t_max costs about e^{-(N'-4) L}
TRUNCATION_TARGET = 1e-10


class ConvergenceError(RuntimeError):
    """Iteration cap reached; ``best`` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OperatorAssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise InsufficientResolutionError(f"Grid1D needs n >= {MIN_NODES}, got {self.n}")
        if not self.t_max - self.t_min >= MIN_WINDOW:
            raise InsufficientResolutionError(
                f"Grid1D window t_max - t_min = {self.t_max - self.t_min:g} is below {MIN_WINDOW:g}"
            )

    @property
    def spacing(self) -> float:
        return (self.t_max - self.t_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n)

    @classmethod
    def for_ball(cls, params: ProblemParams, R: float = 1.0, n: int = 2000, length: Optional[float] = None) -> "Grid1D":
        """Window [-ln R, -ln R + L] with L set by the slowest decay rate unless given."""
        if length is None:
            rate = (params.N + float(params.alpha) - 4) / 2
            length = max(MIN_WINDOW, math.log(1 / TRUNCATION_TARGET) / (2 * rate))
        t0 = -math.log(R)
        return cls(t0, t0 + length, n)

    def extended(self, extra: float) -> "Grid1D":
        """Longer window with the same spacing."""
        k = int(round(extra / self.spacing))
        return Grid1D(self.t_min, self.t_min + (self.n - 1 + k) * self.spacing, self.n + k)

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "n": self.n, "spacing": self.spacing}


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    stiffness: sp.csr_matrix  # on the n - 2 interior nodes
    mass_q: np.ndarray  # quadrature weights times e^{-q_* t} on the interior nodes
    grid: Grid1D
    q: float
    q_star: float
    boundary: str = "navier"

    def banded(self) -> np.ndarray:
        """Lower banded storage ab[k, j] = K[j + k, j], k = 0, 1, 2."""
        K = self.stiffness
        m = K.shape[0]
        ab = np.zeros((3, m))
        for k in range(3):
            ab[k, : m - k] = K.diagonal(-k)
        return ab

    def quadratic(self, x: np.ndarray) -> float:
        return float(x @ (self.stiffness @ x))

    def mass(self, x: np.ndarray, q: Optional[float] = None) -> float:
        q = self.q if q is None else q
        return float(self.mass_q @ np.abs(x) ** q)


def _z_matrix(params: ProblemParams, n: int, h: float, boundary: str):
    """Rows z_i = c w_i - (alpha - 2) w'_i - w''_i acting on the free values, with trapezoid weights.

    Node n - 1 (r -> 0 end) is clamped: w = 0 and the ghost mirrors w_{n-2}
    so that w' = 0. At node 0 (r = R) the value is pinned, w = 0, and
      navier:  the row is dropped, which imposes z = 0 there (u = v = 0 on
               the sphere) as the natural condition of the discrete form;
      clamped: the ghost mirrors w_1 (w' = 0) and the row is kept.
    Free values are w_1 .. w_{n-2}.
    """
    N, alpha = params.N, float(params.alpha)
    c = (N - alpha) * (N + alpha - 4) / 4
    b = alpha - 2
    m = n - 2
    first = 1 if boundary == "navier" else 0
    rows, cols, vals = [], [], []
    for i in range(first, n):
        stencil = ((i - 1, -1 / h**2 + b / (2 * h)), (i, c + 2 / h**2), (i + 1, -1 / h**2 - b / (2 * h)))
        for j, coef in stencil:
            if j == -1:
                j = 1
            elif j == n:
                j = n - 2
            if 1 <= j <= n - 2:
                rows.append(i - first)
                cols.append(j - 1)
                vals.append(coef)
    Dz = sp.csr_matrix((vals, (rows, cols)), shape=(n - first, m))
    wt = np.full(n - first, h)
    wt[-1] = h / 2
    if first == 0:
        wt[0] = h / 2
    return Dz, wt


BOUNDARIES = ("navier", "clamped")


def assemble_forms(params: ProblemParams, grid: Grid1D, q: float, boundary: str = "navier") -> DiscreteOperator:
    """Stiffness K with x^T K x ~ int z^2 dt and the weighted mass for int e^{-q_* t}|w|^q.

    z = c w - (alpha - 2) w' - w'' = r^{(N-alpha)/2} v, so int z^2 dt is
    int |x|^alpha (Delta u)^2 / omega_N. Integrating by parts,
    int z^2 = int (w''^2 + 2 delta~ w'^2 + delta w^2) + (2 - alpha) w'(t_min)^2
    when w(t_min) = 0; on clamped functions the two forms coincide.
    w'' uses second differences and w' centred differences at the nodes.
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}")
    ps = float(critical_exponent(params))
    if not 1 <= q <= ps + 1 + 1e-12:
        raise ValueError(f"q = {q} outside [1, p_s + 1] = [1, {ps + 1:.6g}]")
    n, h = grid.n, grid.spacing
    Dz, wt = _z_matrix(params, n, h, boundary)
    K = Dz.T @ sp.diags(wt) @ Dz
    K = sp.csr_matrix(0.5 * (K + K.T))
    q_star = float(chart_weight_exponent(params, q))
    t = grid.nodes[1:-1]
    mass = h * np.exp(-q_star * t)
    return DiscreteOperator(K, mass, grid, float(q), q_star, boundary)


def _factor(op: DiscreteOperator) -> np.ndarray:
    try:
        return cholesky_banded(op.banded(), lower=True)
    except LinAlgError as exc:
        raise OperatorAssemblyError(f"stiffness matrix is not positive definite: {exc}") from exc


def _profile(params: ProblemParams, grid: Grid1D, x: np.ndarray) -> TransformedProfile:
    """Clamped nodal values to a TransformedProfile; z from the first transformed equation."""
    N, alpha = params.N, float(params.alpha)
    c = (N - alpha) * (N + alpha - 4) / 4
    t = grid.nodes
    w = np.concatenate([[0.0], x, [0.0]])
    dw = np.gradient(w, t, edge_order=2)
    d2w = np.gradient(dw, t, edge_order=2)
    z = c * w - (alpha - 2) * dw - d2w
    dz = np.gradient(z, t, edge_order=2)
    return TransformedProfile(ChartKind.INTERIOR, t, w, dw, z, dz, params)


def _normalize(x: np.ndarray) -> np.ndarray:
    """Scale to max |x| = 1 with the largest-magnitude node positive."""
    k = int(np.argmax(np.abs(x)))
    return x / x[k]


def _bump(grid: Grid1D) -> np.ndarray:
    t = grid.nodes[1:-1]
    s = (t - grid.t_min) / (grid.t_max - grid.t_min)
    return 1 - np.cos(2 * np.pi * s)


@dataclass
class RayleighResult:
    value: float
    minimizer: TransformedProfile
    iterations: int
    grid: Grid1D
    q: float = 2.0
    history: list = None

    def to_dict(self) -> dict:
        return {"value": self.value, "iterations": self.iterations, "grid": self.grid.to_dict(), "q": self.q}


def rayleigh_value(op: DiscreteOperator, x: np.ndarray, N: int) -> float:
    """omega_N Q(w) / (omega_N M_q(w))^{2/q}."""
    om = sphere_area(N)
    return om * op.quadratic(x) / (om * op.mass(x)) ** (2 / op.q)


def minimize_rayleigh(
    params: ProblemParams,
    grid: Grid1D,
    q: float,
    max_iter: int = 5000,
    rtol: float = 1e-12,
    window: int = 10,
    boundary: str = "navier",
) -> RayleighResult:
    """Minimize the radial quotient int |x|^a (Delta u)^2 / (int |x|^l |u|^q)^{2/q} on B_R, R = e^{-t_min}.

    Gradient descent in the metric of K with backtracking. The full step is
    the nonlinear inverse iteration w <- K^{-1}(m |w|^{q-2} w) up to scale.
    Stops when the quotient decreased by less than rtol (relative) over the
    last ``window`` iterations.
    """
    ps = float(critical_exponent(params))
    if q < 2:
        raise ValueError(f"minimize_rayleigh needs q >= 2, got q = {q}")
    if q > ps + 1 + 1e-12:
        raise ValueError(f"q = {q} exceeds p_s + 1 = {ps + 1:.6g}")
    if q >= ps + 1 - 1e-12:
        warnings.warn("q = p_s + 1: the quotient is scale invariant and a minimizer need not exist", RuntimeWarning)
    op = assemble_forms(params, grid, q, boundary)
    L = _factor(op)
    x = _bump(grid)
    F = rayleigh_value(op, x, params.N)
    hist = [F]
    for it in range(1, max_iter + 1):
        y = cho_solve_banded((L, True), op.mass_q * np.abs(x) ** (q - 2) * x)
        # K-gradient direction: x - (Q/M) y, scaled so the full step lands on y
        target = y * (op.quadratic(x) / op.mass(x))
        step = 1.0
        while True:
            cand = _normalize(x + step * (target - x))
            Fc = rayleigh_value(op, cand, params.N)
            if Fc <= F or step < 1e-8:
                break
            step *= 0.5
        x, F = cand, min(F, Fc)
        hist.append(F)
        if it >= window and (hist[-window - 1] - F) <= rtol * abs(F):
            return RayleighResult(F, _profile(params, grid, x), it, grid, float(q), hist)
    best = RayleighResult(F, _profile(params, grid, x), max_iter, grid, float(q), hist)
    raise ConvergenceError(f"minimize_rayleigh did not converge in {max_iter} iterations", best)


@dataclass
class SpectralResult:
    lambda1: float
    eigenfunction: TransformedProfile
    residual: float
    iterations: int = 0
    grid: Optional[Grid1D] = None

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "residual": self.residual,
            "iterations": self.iterations,
            "grid": None if self.grid is None else self.grid.to_dict(),
        }


def _band_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    """K x for symmetric K in lower banded storage, in the precision of the inputs."""
    y = ab[0] * x
    for k in range(1, ab.shape[0]):
        y[k:] += ab[k, :-k] * x[:-k]
        y[:-k] += ab[k, :-k] * x[k:]
    return y


def first_eigenpair(
    params: ProblemParams,
    grid: Grid1D,
    max_iter: int = 10000,
    resid_tol: float = 1e-10,
    boundary: str = "navier",
    refine_steps: int = 40,
) -> SpectralResult:
    """Smallest lambda with K x = lambda M_2 x by inverse power iteration.

    M_2 is the q = 2 mass, weight e^{-(4+tau) t}. ``residual`` is
    ||K x - lambda M_2 x|| / ||x|| with x scaled to unit M_2-norm.

    Since ||K|| grows like h^{-3}, a float64 vector cannot push this residual
    much below 1e-9 at n ~ 2000. The double-precision iteration is therefore
    followed by inverse iteration in extended precision, with each solve
    done by the float64 banded Cholesky factor plus iterative refinement.
    """
    op = assemble_forms(params, grid, 2.0, boundary)
    L = _factor(op)
    m = op.mass_q
    x = _bump(grid)
    lam_old = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        x = _normalize(cho_solve_banded((L, True), m * x))
        lam = op.quadratic(x) / op.mass(x, 2)
        if abs(lam_old - lam) <= 1e-12 * lam:
            break
        lam_old = lam
    ext = np.longdouble
    ab = op.banded().astype(ext)
    mx = m.astype(ext)
    xe = x.astype(ext)

    def state(v):
        v = v / np.sqrt(np.sum(mx * v * v))
        kv = _band_matvec(ab, v)
        lam_e = np.sum(v * kv)
        res = np.sqrt(np.sum((kv - lam_e * mx * v) ** 2)) / np.sqrt(np.sum(v * v))
        return v, lam_e, float(res)

    xe, lam_e, residual = state(xe)
    for _ in range(refine_steps):
        if residual < 0.1 * resid_tol:
            break
        rhs_e = mx * xe
        y = cho_solve_banded((L, True), rhs_e.astype(float)).astype(ext)
        for _ in range(3):
            corr = rhs_e - _band_matvec(ab, y)
            y += cho_solve_banded((L, True), corr.astype(float)).astype(ext)
        xe, lam_e, residual = state(y)
    if residual >= resid_tol:
        log.warning("first_eigenpair residual %.3g above %.3g", residual, resid_tol)
    x = _normalize(xe.astype(float))
    return SpectralResult(float(lam_e), _profile(params, grid, x), residual, it, grid)
