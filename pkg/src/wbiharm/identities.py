"""
Integral identities on radial profiles: Rellich-Pohozaev, energy, PDE residual.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exponents import ProblemParams, pohozaev_coefficient, sphere_area
from .transform import RadialProfile, radial_integral

RESIDUAL_FLOOR = 1e-300


@dataclass(frozen=True)
class PohozaevReport:
    lhs: float
    rhs: float
    residual: float
    relative_residual: float
    R: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def _value_at(profile: RadialProfile, R: float):
    r = profile.r_nodes
    if R > r[-1] * (1 + 1e-12) or R <= 0:
        raise ValueError(f"profile covers (0, {r[-1]:.6g}], cannot evaluate at R = {R:.6g}")
    k = int(np.argmin(np.abs(r - R)))
    if abs(r[k] - R) <= 1e-12 * R:
        return profile.u[k], profile.du[k], profile.v[k], profile.dv[k]
    # cubic Hermite between the bracketing nodes
    j = int(np.searchsorted(r, R)) - 1
    j = min(max(j, 0), r.size - 2)
    h = r[j + 1] - r[j]
    s = (R - r[j]) / h
    h00, h10, h01, h11 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2
    d00, d10, d01, d11 = (6 * s**2 - 6 * s) / h, 3 * s**2 - 4 * s + 1, (-6 * s**2 + 6 * s) / h, 3 * s**2 - 2 * s

    def herm(f, df):
        val = h00 * f[j] + h10 * h * df[j] + h01 * f[j + 1] + h11 * h * df[j + 1]
        der = d00 * f[j] + d10 * df[j] + d01 * f[j + 1] + d11 * df[j + 1]
        return val, der

    u, du = herm(profile.u, profile.du)
    v, dv = herm(profile.v, profile.dv)
    return u, du, v, dv


def pohozaev_check(params: ProblemParams, profile: RadialProfile, R: float) -> PohozaevReport:
    """Both sides of the Rellich-Pohozaev identity on B_R for a radial profile.

    LHS: [(N'+tau)/(p+1) - (N'-4)/2] omega_N int_0^R r^{N+l-1} |u|^{p+1} dr.
    RHS: omega_N R^{N-1} times the surface density at r = R.
    """
    N, alpha, l, p = params.N, float(params.alpha), float(params.l), float(params.p)
    Np = N + alpha
    coeff = pohozaev_coefficient(params)
    omega = sphere_area(N)
    if coeff == 0:
        lhs = 0.0
    else:
        vol = radial_integral(np.abs(profile.u) ** (p + 1), profile.r_nodes, N + l - 1, R)
        lhs = float(coeff) * omega * vol
    u, du, v, dv = _value_at(profile, R)
    # For radial u, v: grad u . grad v = u'v', so 2R u'v' - R grad u . grad v = R u'v'.
    density = (
        R ** (l + 1) * abs(u) ** (p + 1) / (p + 1)  # R^{l+1} u^{p+1}/(p+1)
        + R ** (1 - alpha) * v * v / 2  # R^{1-alpha} v^2/2
        + R * du * dv  # 2R u'v' - R grad u . grad v
        + (N - alpha) / 2 * v * du  # (N-alpha)/2 v u'
        + (Np - 4) / 2 * u * dv  # (N'-4)/2 u v'
    )
    rhs = omega * R ** (N - 1) * density
    residual = abs(lhs - rhs)
    return PohozaevReport(lhs, float(rhs), float(residual), float(residual / max(abs(lhs), abs(rhs), RESIDUAL_FLOOR)), float(R))


@dataclass(frozen=True)
class EnergyReport:
    J: float
    quadratic: float  # int |x|^alpha (Delta u)^2
    nonlinear: float  # int |x|^l |u|^{p+1}
    nehari_gap: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def energy(params: ProblemParams, profile: RadialProfile, R: float) -> EnergyReport:
    """J(u) = 1/2 int |x|^alpha (Delta u)^2 - 1/(p+1) int |x|^l |u|^{p+1} on B_R.

    Uses |x|^alpha (Delta u)^2 = r^{-alpha} v^2.
    """
    N, alpha, l, p = params.N, float(params.alpha), float(params.l), float(params.p)
    omega = sphere_area(N)
    r = profile.r_nodes
    quad = omega * radial_integral(profile.v**2, r, N - alpha - 1, R)
    nonlin = omega * radial_integral(np.abs(profile.u) ** (p + 1), r, N + l - 1, R)
    return EnergyReport(0.5 * quad - nonlin / (p + 1), quad, nonlin, quad - nonlin)


def fd_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 on nodes x (Fornberg's recursion)."""
    n = x.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def pde_residual(params: ProblemParams, profile: RadialProfile) -> float:
    """Sup-norm residual of the radial system on interior nodes.

    The fluxes r^{N-1} u' and r^{N-1} v' are differentiated with five-point
    stencils; each equation's residual is divided by the summed magnitudes
    of its stencil terms and source at that node.
    """
    N, alpha, l, p = params.N, float(params.alpha), float(params.l), float(params.p)
    r = profile.r_nodes
    if r.size < 5:
        raise ValueError("pde_residual needs at least 5 nodes")
    flux_u = r ** (N - 1) * profile.du
    flux_v = r ** (N - 1) * profile.dv
    src_u = r ** (N - alpha - 1) * profile.v
    src_v = r ** (N + l - 1) * np.abs(profile.u) ** (p - 1) * profile.u
    worst = 0.0
    for i in range(2, r.size - 2):
        wts = fd_weights(r[i], r[i - 2 : i + 3], 1)
        for flux, src in ((flux_u, src_u), (flux_v, src_v)):
            terms = wts * flux[i - 2 : i + 3]
            d = terms.sum()
            # stencil terms, not just their sum, so cancellation stays at roundoff
            scale = np.abs(terms).sum() + abs(src[i])
            if scale > 0:
                worst = max(worst, abs(d + src[i]) / scale)
    return worst
