"""
Decay-rate fits and a-priori bound diagnostics for radial profiles.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .exponents import ProblemParams
from .transform import TransformedProfile


@dataclass(frozen=True)
class AsymptoticsFit:
    rate: float
    amplitude: float
    window: tuple
    fit_quality: float

    def to_dict(self) -> dict:
        return {"rate": self.rate, "amplitude": self.amplitude, "window": list(self.window), "fit_quality": self.fit_quality}


def default_window(tprofile: TransformedProfile) -> tuple:
    """Last 40% of the t-range."""
    t0, t1 = tprofile.t_nodes[0], tprofile.t_nodes[-1]
    return (t1 - 0.4 * (t1 - t0), t1)


def fit_tail(tprofile: TransformedProfile, component: str = "w", window: Optional[tuple] = None) -> AsymptoticsFit:
    """Least-squares fit of ln(component) = ln(amplitude) - rate * t on a t-window."""
    if component not in ("w", "z"):
        raise ValueError("component must be 'w' or 'z'")
    window = default_window(tprofile) if window is None else tuple(window)
    t = tprofile.t_nodes
    y = getattr(tprofile, component)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 2:
        raise ValueError(f"fewer than two samples in the window {window}")
    ts, ys = t[sel], y[sel]
    if np.any(ys <= 0):
        raise ValueError(f"{component} is not positive on the window {window}")
    logs = np.log(ys)
    slope, intercept = np.polyfit(ts, logs, 1)
    pred = slope * ts + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    quality = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return AsymptoticsFit(float(-slope), float(math.exp(intercept)), (float(window[0]), float(window[1])), quality)


@dataclass(frozen=True)
class BoundCheck:
    bound_name: str
    exponent: float
    sup_constant: float
    argmax_r: float
    satisfied: bool

    def to_dict(self) -> dict:
        return asdict(self)


def bound_exponents(params: ProblemParams) -> dict:
    """Powers of r normalizing u, |u'|, v, |v'| in the a-priori bounds."""
    p, tau, alpha = float(params.p), float(params.tau), float(params.alpha)
    k_u = (4 + tau) / (p - 1)
    k_v = (2 * (p + 1) + tau) / (p - 1) - alpha
    return {"u": k_u, "du": (p + tau + 3) / (p - 1), "v": k_v, "dv": k_v + 1}


def check_bounds(params: ProblemParams, profile) -> list:
    """Suprema over the nodes of u r^{k_u}, |u'| r^{k_u+1}, v r^{k_v}, |v'| r^{k_v+1}.

    A bound is reported satisfied when its supremum is finite and not attained
    at the innermost node (a maximum there signals growth toward the origin
    faster than the bound allows).
    """
    r = profile.r_nodes
    data = {"u": profile.u, "du": np.abs(profile.du), "v": profile.v, "dv": np.abs(profile.dv)}
    out = []
    for name, k in bound_exponents(params).items():
        with np.errstate(over="ignore", invalid="ignore"):
            q = data[name] * r**k
        sup = float(np.max(q))
        j = int(np.argmax(q))
        ok = bool(np.isfinite(sup) and (sup == 0 or j > 0))
        out.append(BoundCheck(name, k, max(sup, 0.0), float(r[j]), ok))
    return out


@dataclass(frozen=True)
class MonotonicityReport:
    min_d_scaled_u: float
    argmin_d_scaled_u: float
    min_d_scaled_v: float
    argmin_d_scaled_v: float
    min_flux_u: float  # min of r u' + (N-2) u
    argmin_flux_u: float
    min_flux_v: float
    argmin_flux_v: float
    strict: bool  # both scaled derivatives strictly positive on the nodes

    def to_dict(self) -> dict:
        return asdict(self)


def monotonicity_report(params: ProblemParams, profile, r_range: Optional[tuple] = None) -> MonotonicityReport:
    """Diagnostics of r^{(N-2)/2} u, r^{(N-2)/2} v (derivatives) and r f' + (N-2) f."""
    N = params.N
    prof = profile if r_range is None else profile.restrict(*r_range)
    r = prof.r_nodes
    a = (N - 2) / 2
    su, sv = r**a * prof.u, r**a * prof.v
    dsu = np.gradient(su, r, edge_order=2)
    dsv = np.gradient(sv, r, edge_order=2)
    fu = r * prof.du + (N - 2) * prof.u
    fv = r * prof.dv + (N - 2) * prof.v

    def mn(x):
        j = int(np.argmin(x))
        return float(x[j]), float(r[j])

    (m1, r1), (m2, r2), (m3, r3), (m4, r4) = mn(dsu), mn(dsv), mn(fu), mn(fv)
    return MonotonicityReport(m1, r1, m2, r2, m3, r3, m4, r4, bool(m1 > 0 and m2 > 0))
