"""
Radial profiles and the logarithmic (Emden-Fowler) charts.

Interior chart (any alpha):  t = -ln r,  w = r^{(N'-4)/2} u,  z = r^{(N-alpha)/2} v.
Exterior chart (alpha = 2):  t = +ln r,  w = r^{(N-2)/2} u,   z = r^{(N-2)/2} v.

Here v = -r^alpha Delta u, so (u, v) solves the pair of second order radial
equations and the profiles carry first derivatives alongside values.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exponents import ProblemParams, chart_weight_exponent, derive_exponents, sphere_area


class ChartKind(str, Enum):
    PHYSICAL = "physical"
    INTERIOR = "interior"
    EXTERIOR = "exterior"


class UnsupportedChartError(ValueError):
    pass


class InsufficientResolutionError(ValueError):
    pass


def _as_array(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    r_nodes: np.ndarray
    u: np.ndarray
    du: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    params: ProblemParams
    origin: str = "synthetic"

    def __post_init__(self):
        for name in ("r_nodes", "u", "du", "v", "dv"):
            object.__setattr__(self, name, _as_array(getattr(self, name)))
        r = self.r_nodes
        if r.ndim != 1 or r.size < 2:
            raise ValueError("a profile needs at least two nodes")
        if any(getattr(self, k).shape != r.shape for k in ("u", "du", "v", "dv")):
            raise ValueError("all sample arrays must match r_nodes in length")
        if not np.all(r > 0):
            raise ValueError("r_nodes must be positive")
        if not np.all(np.diff(r) > 0):
            raise ValueError("r_nodes must be strictly increasing")

    def __len__(self):
        return self.r_nodes.size

    def restrict(self, r_min=0.0, r_max=np.inf) -> "RadialProfile":
        keep = (self.r_nodes >= r_min) & (self.r_nodes <= r_max)
        return RadialProfile(
            self.r_nodes[keep], self.u[keep], self.du[keep], self.v[keep], self.dv[keep],
            self.params, self.origin,
        )

    def scaled(self, factor: float) -> "RadialProfile":
        """Multiply every sample by ``factor`` (not a PDE symmetry; used for homogeneity checks)."""
        return RadialProfile(
            self.r_nodes, factor * self.u, factor * self.du, factor * self.v, factor * self.dv,
            self.params, self.origin,
        )

    def similarity(self, lam: float) -> "RadialProfile":
        """Image under u_lam(x) = lam^{k_u} u(lam x), v_lam(x) = lam^{k_v} v(lam x)."""
        p, tau, alpha = float(self.params.p), float(self.params.tau), float(self.params.alpha)
        k_u = (4 + tau) / (p - 1)
        k_v = (2 * (p + 1) + tau) / (p - 1) - alpha
        return RadialProfile(
            self.r_nodes / lam,
            lam**k_u * self.u,
            lam ** (k_u + 1) * self.du,
            lam**k_v * self.v,
            lam ** (k_v + 1) * self.dv,
            self.params,
            self.origin,
        )

    def to_csv(self) -> str:
        return _write_csv(("r", "u", "du", "v", "dv"), (self.r_nodes, self.u, self.du, self.v, self.dv))

    @classmethod
    def from_csv(cls, text: str, params: ProblemParams, origin: str = "synthetic") -> "RadialProfile":
        cols = _read_csv(text, ("r", "u", "du", "v", "dv"))
        return cls(*cols, params=params, origin=origin)


@dataclass(frozen=True, eq=False)
class TransformedProfile:
    chart: ChartKind
    t_nodes: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    params: ProblemParams

    def __post_init__(self):
        object.__setattr__(self, "chart", ChartKind(self.chart))
        for name in ("t_nodes", "w", "dw", "z", "dz"):
            object.__setattr__(self, name, _as_array(getattr(self, name)))
        t = self.t_nodes
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a profile needs at least two nodes")
        if any(getattr(self, k).shape != t.shape for k in ("w", "dw", "z", "dz")):
            raise ValueError("all sample arrays must match t_nodes in length")
        if not np.all(np.diff(t) > 0):
            raise ValueError("t_nodes must be strictly increasing")
        _check_chart(self.chart, self.params)

    def to_csv(self) -> str:
        return _write_csv(("t", "w", "dw", "z", "dz"), (self.t_nodes, self.w, self.dw, self.z, self.dz))

    @classmethod
    def from_csv(cls, text: str, params: ProblemParams, chart=ChartKind.INTERIOR) -> "TransformedProfile":
        cols = _read_csv(text, ("t", "w", "dw", "z", "dz"))
        return cls(chart, *cols, params=params)


def _check_chart(chart: ChartKind, params: ProblemParams) -> None:
    if chart is ChartKind.EXTERIOR and params.alpha != 2:
        raise UnsupportedChartError(
            f"the exterior chart is only defined for alpha = 2 (got alpha = {float(params.alpha):g})"
        )
    if chart is ChartKind.PHYSICAL:
        raise UnsupportedChartError("a transformed profile needs the interior or exterior chart")


def chart_powers(params: ProblemParams, chart: ChartKind) -> tuple[float, float, float]:
    """Return (s, a_w, a_z): t = s ln r, w = r^{a_w} u, z = r^{a_z} v."""
    N, alpha = params.N, float(params.alpha)
    chart = ChartKind(chart)
    _check_chart(chart, params)
    if chart is ChartKind.INTERIOR:
        return -1.0, (N + alpha - 4) / 2, (N - alpha) / 2
    return 1.0, (N - 2) / 2, (N - 2) / 2


def to_transformed(profile: RadialProfile, chart=ChartKind.INTERIOR) -> TransformedProfile:
    chart = ChartKind(chart)
    s, a_w, a_z = chart_powers(profile.params, chart)
    r = profile.r_nodes
    t = s * np.log(r)
    rw, rz = r**a_w, r**a_z
    # dr/dt = s r, so d/dt (r^a f) = s r^a (a f + r f')
    w = rw * profile.u
    dw = s * rw * (a_w * profile.u + r * profile.du)
    z = rz * profile.v
    dz = s * rz * (a_z * profile.v + r * profile.dv)
    order = slice(None, None, -1) if s < 0 else slice(None)
    return TransformedProfile(chart, t[order], w[order], dw[order], z[order], dz[order], profile.params)


def from_transformed(tprofile: TransformedProfile) -> RadialProfile:
    s, a_w, a_z = chart_powers(tprofile.params, tprofile.chart)
    t = tprofile.t_nodes
    r = np.exp(s * t)
    rw, rz = r ** (-a_w), r ** (-a_z)
    u = rw * tprofile.w
    du = (s * rw * tprofile.dw - a_w * u) / r
    v = rz * tprofile.z
    dv = (s * rz * tprofile.dz - a_z * v) / r
    order = slice(None, None, -1) if s < 0 else slice(None)
    return RadialProfile(r[order], u[order], du[order], v[order], dv[order], tprofile.params, "transformed")


def trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def quadratic_form(params: ProblemParams, tprofile: TransformedProfile) -> float:
    """omega_N * int (w''^2 + 2 delta~ w'^2 + delta w^2) dt on the interior chart.

    w'' comes from centered differences of the sampled dw.
    """
    if tprofile.chart is not ChartKind.INTERIOR:
        raise UnsupportedChartError("the quadratic form is written in the interior chart")
    t = tprofile.t_nodes
    if t.size < 5:
        raise InsufficientResolutionError("quadratic_form needs at least 5 nodes")
    ex = derive_exponents(params)
    d2w = np.gradient(tprofile.dw, t, edge_order=2)
    integrand = d2w**2 + 2 * float(ex.delta_tilde) * tprofile.dw**2 + float(ex.delta) * tprofile.w**2
    return sphere_area(params.N) * trapezoid(integrand, t)


def radial_integral(f: np.ndarray, r: np.ndarray, power: float, R: float | None = None) -> float:
    """int_0^R r^power f(r) dr by trapezoid on the nodes.

    On [0, r_0] the integrand is frozen at f(r_0) (continuous extension at the
    origin) and r^power integrated exactly, which keeps integrable
    singularities of the weight harmless. Requires power > -1.
    """
    if R is not None:
        if R > r[-1] * (1 + 1e-12):
            raise ValueError(f"profile ends at r = {r[-1]:.6g} < R = {R:.6g}")
        keep = r <= R * (1 + 1e-12)
        r, f = r[keep], f[keep]
    head = f[0] * r[0] ** (power + 1) / (power + 1)
    return head + trapezoid(r**power * f, r)


def weighted_norm(params: ProblemParams, profile: RadialProfile, q: float, R: float) -> float:
    """(omega_N int_0^R r^{N+l-1} |u|^q dr)^{1/q}."""
    if q < 1:
        raise ValueError(f"weighted_norm needs q >= 1, got q = {q}")
    integral = radial_integral(np.abs(profile.u) ** q, profile.r_nodes, params.N + float(params.l) - 1, R)
    return (sphere_area(params.N) * integral) ** (1.0 / q)


def weighted_norm_transformed(params: ProblemParams, tprofile: TransformedProfile, q: float) -> float:
    """Same norm in the interior chart: (omega_N int e^{-q_* t} |w|^q dt)^{1/q}."""
    if tprofile.chart is not ChartKind.INTERIOR:
        raise UnsupportedChartError("weighted_norm_transformed uses the interior chart")
    qs = float(chart_weight_exponent(params, q))
    t = tprofile.t_nodes
    return (sphere_area(params.N) * trapezoid(np.exp(-qs * t) * np.abs(tprofile.w) ** q, t)) ** (1.0 / q)


def _write_csv(header, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([format(float(x), ".17g") for x in row])
    return buf.getvalue()


def _read_csv(text: str, header) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != tuple(header):
        raise ValueError(f"expected CSV header {','.join(header)}")
    data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError("malformed profile CSV")
    return [data[:, k] for k in range(len(header))]
