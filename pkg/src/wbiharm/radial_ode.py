"""
Radial initial-value problems, trajectory classification and shooting.

Physical chart, state (u, u', v, v') in r:

    -(r^{N-1} u')' = r^{N-alpha-1} v,     -(r^{N-1} v')' = r^{N+l-1} |u|^{p-1} u.

Interior chart, state (w, w', z, z') in t = -ln r (see ``transform``):

    w'' = c w - (alpha-2) w' - z,          z'' = c z + (alpha-2) z' - e^{-p_* t} |w|^{p-1} w,

with c = (N-alpha)(N'-4)/4. The exterior chart (alpha = 2, t = ln r) has the
same form with alpha = 2 and forcing e^{+p^* t}.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .exponents import (
    ProblemParams,
    derive_exponents,
    linearization_spectrum,
    similarity_exponents,
)
from .transform import ChartKind, RadialProfile, TransformedProfile, chart_powers, from_transformed

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e12
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


class StiffnessError(RuntimeError):
    """Step size underflow; ``last_state`` holds the last accepted state."""

    def __init__(self, message, last_state):
        super().__init__(message)
        self.last_state = last_state


class ShootingError(RuntimeError):
    """No sign change of rho_u - rho_v in the bracket sweep."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


@dataclass(frozen=True)
class OdeState:
    loc: float  # r in the physical chart, t otherwise
    y: np.ndarray
    chart: ChartKind = ChartKind.PHYSICAL

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(4))
        object.__setattr__(self, "chart", ChartKind(self.chart))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.y)))


class OutcomeKind(str, Enum):
    POSITIVE_ON_WINDOW = "PositiveOnWindow"
    U_CROSSED_ZERO = "UCrossedZero"
    V_CROSSED_ZERO = "VCrossedZero"
    BLOW_UP = "BlowUp"


@dataclass
class TrajectoryOutcome:
    kind: OutcomeKind
    location: Optional[float]  # radius of the event, None for PositiveOnWindow
    profile: Optional[RadialProfile]


def _signed_power(x, p):
    return np.abs(x) ** (p - 1) * x


def make_rhs(params: ProblemParams, chart=ChartKind.PHYSICAL) -> Callable:
    """Vectorization-free right-hand side f(x, y) for solve_ivp."""
    chart = ChartKind(chart)
    N, alpha, l, p = params.N, float(params.alpha), float(params.l), float(params.p)
    if chart is ChartKind.PHYSICAL:
        k = N - 1.0

        def f(r, y):
            u, du, v, dv = y
            return np.array([du, -k / r * du - r**-alpha * v, dv, -k / r * dv - r**l * _signed_power(u, p)])

        return f

    ex = derive_exponents(params)
    c = (N - alpha) * (N + alpha - 4) / 4
    if chart is ChartKind.INTERIOR:
        damp, rate = alpha - 2.0, -float(ex.p_star)
    else:
        if alpha != 2:
            raise ValueError("the exterior chart is only defined for alpha = 2")
        damp, rate = 0.0, float(ex.p_upper_star)

    def g(t, y):
        w1, w2, w3, w4 = y
        return np.array([w2, c * w1 - damp * w2 - w3, w4, c * w3 + damp * w4 - math.exp(rate * t) * _signed_power(w1, p)])

    return g


def rhs(params: ProblemParams, state: OdeState, chart=None) -> np.ndarray:
    chart = state.chart if chart is None else ChartKind(chart)
    if chart is ChartKind.PHYSICAL and state.loc <= 0:
        raise ValueError(f"the physical chart needs r > 0, got r = {state.loc}")
    return make_rhs(params, chart)(state.loc, state.y)


@dataclass(frozen=True)
class SeriesStart:
    state: OdeState
    warning: bool
    error_order: float


def series_start(params: ProblemParams, a: float, b: float, r0: float) -> SeriesStart:
    """Two-term expansion at r0 of the solution with u(0) = a, v(0) = b.

    u = a - b r^{2-alpha} / ((2-alpha)(N-alpha)) + ...,
    v = b - a^p r^{2+l} / ((2+l)(N+l)) + ...

    The neglected terms are O(r0^{min(4-alpha+min(0,l), 4-alpha+l)}).
    """
    N, alpha, l, p = params.N, float(params.alpha), float(params.l), float(params.p)
    if alpha >= 2:
        raise ValueError("series_start needs alpha < 2; use seed_transformed for alpha >= 2")
    if l <= -2:
        raise ValueError("series_start needs l > -2 (v is unbounded at the origin otherwise)")
    if a < 0:
        raise ValueError("series_start needs a >= 0")
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    ap = a**p
    u = a - b * r0 ** (2 - alpha) / ((2 - alpha) * (N - alpha))
    du = -b * r0 ** (1 - alpha) / (N - alpha)
    v = b - ap * r0 ** (2 + l) / ((2 + l) * (N + l))
    dv = -ap * r0 ** (1 + l) / (N + l)
    warn = b != 0 and r0 ** (2 - alpha) > 0.01 * (2 - alpha) * (N - alpha) * a / abs(b)
    order = min(4 - alpha + min(0.0, l), 4 - alpha + l)
    return SeriesStart(OdeState(r0, (u, du, v, dv)), bool(warn), order)


def seed_transformed(params: ProblemParams, a: float, b: float, T: float) -> OdeState:
    """Interior-chart state at t = T on the decaying eigenspace of the linearization.

    ``a`` weights the w-mode (u -> a at the origin) and ``b`` the z-mode
    (v -> b). For alpha = 2 the two rates coincide and the z-mode carries the
    Jordan partner, so u grows like -b ln r / (N - 2) near the origin.
    """
    spec = linearization_spectrum(params)
    lam_w, lam_z = spec.eigenvalues[0], spec.eigenvalues[2]
    e_w, e_z = spec.eigenvectors[0], spec.eigenvectors[2]
    if spec.generalized[2]:
        scale = b / e_z[2]
        y = math.exp(lam_w * T) * ((a + scale * T) * e_w + scale * e_z)
    else:
        y = a * math.exp(lam_w * T) * e_w + b * math.exp(lam_z * T) * e_z
    return OdeState(T, y, ChartKind.INTERIOR)


@dataclass
class Trajectory:
    """Raw integration output: accepted steps, dense output and events."""

    params: ProblemParams
    chart: ChartKind
    x: np.ndarray
    y: np.ndarray
    sol: object
    events: dict = field(default_factory=dict)  # name -> chart location of first occurrence
    status: str = "completed"

    def radius(self, x):
        if self.chart is ChartKind.PHYSICAL:
            return np.asarray(x, dtype=float)
        s = -1.0 if self.chart is ChartKind.INTERIOR else 1.0
        return np.exp(s * np.asarray(x, dtype=float))

    def chart_loc(self, r):
        if self.chart is ChartKind.PHYSICAL:
            return np.asarray(r, dtype=float)
        s = -1.0 if self.chart is ChartKind.INTERIOR else 1.0
        return s * np.log(np.asarray(r, dtype=float))

    def physical(self, r) -> np.ndarray:
        """(u, u', v, v') at radii r (4 x len(r)) from dense output."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        Y = self.sol(self.chart_loc(r))
        if self.chart is ChartKind.PHYSICAL:
            return Y
        s, a_w, a_z = chart_powers(self.params, self.chart)
        rw, rz = r ** (-a_w), r ** (-a_z)
        u, v = rw * Y[0], rz * Y[2]
        return np.array([u, (s * rw * Y[1] - a_w * u) / r, v, (s * rz * Y[3] - a_z * v) / r])

    def profile(self, origin="shot") -> RadialProfile:
        if self.chart is ChartKind.PHYSICAL:
            x, y = self.x, self.y
            keep = np.concatenate([[True], np.diff(x) > 0])
            return RadialProfile(x[keep], *y[:, keep], params=self.params, origin=origin)
        order = np.argsort(self.x)
        t, y = self.x[order], self.y[:, order]
        keep = np.concatenate([[True], np.diff(t) > 0])
        tp = TransformedProfile(self.chart, t[keep], *y[:, keep], params=self.params)
        prof = from_transformed(tp)
        return RadialProfile(prof.r_nodes, prof.u, prof.du, prof.v, prof.dv, self.params, origin)


def _make_events(names, blowup):
    events = []
    for name in names:
        if name == "u":
            ev = lambda x, y: y[0]
        elif name == "v":
            ev = lambda x, y: y[2]
        else:
            ev = lambda x, y: blowup - np.max(np.abs(y))
        ev.terminal = True
        events.append(ev)
    return events


def integrate_trajectory(
    params: ProblemParams,
    init: OdeState,
    stop: float,
    tol: float = DEFAULT_RTOL,
    atol: Optional[float] = None,
    watch=("u", "v"),
    blowup: float = BLOWUP_THRESHOLD,
) -> Trajectory:
    """Adaptive DOP853 integration from ``init`` to ``stop`` (chart units).

    Terminates at the first zero of a watched component (u or v) or when
    max |state| exceeds ``blowup``. Event locations are polished on the dense
    output; simultaneous events in one step resolve to the earlier radius.
    """
    if not 1e-13 <= tol <= 1e-3:
        raise ValueError(f"tol must lie in [1e-13, 1e-3], got {tol}")
    if not init.finite:
        raise ValueError("initial state is not finite")
    if stop == init.loc:
        raise ValueError("integration span has zero length")
    chart = init.chart
    if atol is None:
        if chart is ChartKind.PHYSICAL:
            atol = DEFAULT_ATOL * max(1.0, tol / DEFAULT_RTOL)
        else:
            # components start at very different scales (w ~ r^{(N'-4)/2}, z ~ r^{(N-alpha)/2})
            mags = np.abs(np.asarray(init.y, dtype=float))
            mags = mags[mags > 0]
            atol = 1e-2 * tol * (mags.min() if mags.size else 1e-300)
    names = list(watch) + ["blowup"]
    f = make_rhs(params, chart)
    res = solve_ivp(
        f, (init.loc, stop), init.y, method="DOP853", rtol=tol, atol=atol,
        dense_output=True, events=_make_events(names, blowup),
    )
    if res.status == -1:
        raise StiffnessError(f"integration failed at {res.t[-1]:.6g}: {res.message}", OdeState(res.t[-1], res.y[:, -1], chart))
    traj = Trajectory(params, chart, res.t, res.y, res.sol)
    hits = [(abs(te[0] - init.loc), name, te[0]) for name, te in zip(names, res.t_events) if te.size]
    if hits:
        _, name, loc = min(hits)
        traj.events[name] = float(loc)
        traj.status = name
    return traj


def integrate(params, init: OdeState, span, tol=DEFAULT_RTOL, chart=None, **kw) -> RadialProfile:
    """Integrate over ``span = (start, stop)`` and return the sampled physical profile."""
    start, stop = span
    if chart is not None and ChartKind(chart) is not init.chart:
        raise ValueError("init must be given in the requested chart")
    if not math.isclose(start, init.loc, rel_tol=1e-14, abs_tol=1e-300):
        raise ValueError("span must start at the initial location")
    return integrate_trajectory(params, init, stop, tol, **kw).profile()


def _natural_r0(params: ProblemParams, a: float, b: float, rel: float = 1e-4) -> float:
    """Starting radius well inside the range where the two-term series is accurate."""
    N, alpha, l, p = params.N, float(params.alpha), float(params.l), float(params.p)
    scales = [1.0]
    if b > 0 and a > 0:
        scales.append((a * (2 - alpha) * (N - alpha) / b) ** (1 / (2 - alpha)) if alpha < 2 else 1.0)
        scales.append((b * (2 + l) * (N + l) / a**p) ** (1 / (2 + l)))
    return rel * min(scales)


def start_state(params: ProblemParams, a: float, b: float, r0: Optional[float] = None) -> OdeState:
    """Initial state for the entire-space trajectory with center data (a, b)."""
    if float(params.alpha) < 2:
        r0 = _natural_r0(params, a, b) if r0 is None else r0
        return series_start(params, a, b, r0).state
    r0 = 1e-6 if r0 is None else r0
    return seed_transformed(params, a, b, -math.log(r0))


def _stop_for(state: OdeState, r_max: float) -> float:
    if state.chart is ChartKind.PHYSICAL:
        return r_max
    return -math.log(r_max)


def classify_trajectory(
    params: ProblemParams, a: float, b: float, r_max: float, tol: float = DEFAULT_RTOL, r0: Optional[float] = None
) -> TrajectoryOutcome:
    """Integrate the entire-space trajectory with center data (a, b) out to r_max.

    Returns the first of: u crossing zero, v crossing zero, blow-up, or
    PositiveOnWindow if none happens before r_max.
    """
    if a < 0:
        raise ValueError("classify_trajectory needs a >= 0")
    if b < 0:
        return TrajectoryOutcome(OutcomeKind.V_CROSSED_ZERO, 0.0, None)
    if a == 0:
        return TrajectoryOutcome(OutcomeKind.U_CROSSED_ZERO, 0.0, None)
    init = start_state(params, a, b, r0)
    traj = integrate_trajectory(params, init, _stop_for(init, r_max), tol)
    prof = traj.profile()
    kind = {
        "u": OutcomeKind.U_CROSSED_ZERO,
        "v": OutcomeKind.V_CROSSED_ZERO,
        "blowup": OutcomeKind.BLOW_UP,
        "completed": OutcomeKind.POSITIVE_ON_WINDOW,
    }[traj.status]
    loc = None if traj.status == "completed" else float(traj.radius(traj.events[traj.status]))
    return TrajectoryOutcome(kind, loc, prof)


# --------------------------------------------------------------------------
# Navier problem on a ball


@dataclass
class BvpSolution:
    params: ProblemParams
    profile: Optional[RadialProfile]
    center_values: tuple  # (u(0), v(0)) of the ball solution
    shooting_parameter: float  # b* = v(0) of the normalized solution with u(0) = 1
    residuals: tuple  # (|u(R)|, |v(R)|)
    R: float
    scale: float  # lambda: the ball solution is u_R(r) = lambda^{k_u} u_1(lambda r)
    sweep: list = field(default_factory=list)  # (b, rho_u, rho_v) rows
    trajectory: Optional[Trajectory] = field(default=None, repr=False)
    r_start: float = 0.0

    def resample(self, r_nodes) -> RadialProfile:
        """Physical profile at arbitrary radii in (0, R] from the dense output."""
        r = np.asarray(r_nodes, dtype=float)
        k_u, k_v = similarity_exponents(self.params)
        lam = self.scale
        s = lam * r
        Y = np.empty((4, r.size))
        inner = s < self.r_start
        if np.any(~inner):
            Y[:, ~inner] = self.trajectory.physical(s[~inner])
        for j in np.flatnonzero(inner):
            Y[:, j] = series_start(self.params, 1.0, self.shooting_parameter, s[j]).state.y
        u, du, v, dv = Y
        return RadialProfile(
            r, lam**k_u * u, lam ** (k_u + 1) * du, lam**k_v * v, lam ** (k_v + 1) * dv,
            self.params, "bvp",
        )


def _first_zeros(params, b, r_max, tol):
    """rho_u, rho_v (inf when absent) and the trajectory up to the first zero."""
    init = start_state(params, 1.0, b)
    stop = _stop_for(init, r_max)
    traj = integrate_trajectory(params, init, stop, tol)
    rho = {"u": math.inf, "v": math.inf}
    if traj.status in ("u", "v"):
        rho[traj.status] = float(traj.radius(traj.events[traj.status]))
        other = "v" if traj.status == "u" else "u"
        x0 = traj.events[traj.status]
        cont = OdeState(x0, traj.sol(x0), init.chart)
        try:
            tail = integrate_trajectory(params, cont, stop, tol, watch=(other,))
            if tail.status == other:
                rho[other] = float(tail.radius(tail.events[other]))
        except (StiffnessError, ValueError):
            pass
    return rho["u"], rho["v"], traj


def _gap_sign(ru, rv) -> Optional[int]:
    """Sign of rho_u - rho_v; None when neither component vanishes."""
    if ru == rv:
        return 0 if math.isfinite(ru) else None
    return 1 if ru > rv else -1


def shoot_navier_ball(
    params: ProblemParams,
    R: float = 1.0,
    tol: float = DEFAULT_RTOL,
    b_range=(1e-6, 1e8),
    n_sweep: int = 57,
    r_max: float = 1e6,
) -> BvpSolution:
    """Positive radial solution of the Navier problem on the ball of radius R.

    With u(0) = 1 the free parameter b = v(0) is tuned by bisection until the
    first zeros of u and v coincide; the similarity scaling then moves the
    common zero to R. For small b, v vanishes first (rho_u > rho_v); for
    large b, u does.
    """
    ex = derive_exponents(params)
    if not float(ex.p_star) > 0:
        raise ValueError("shoot_navier_ball needs 1 < p < p_s")
    if float(params.alpha) >= 2:
        raise ValueError("shoot_navier_ball needs alpha < 2 (u is unbounded at the origin otherwise)")
    if R <= 0:
        raise ValueError("R must be positive")
    table = []
    lo = hi = None
    for b in np.geomspace(b_range[0], b_range[1], n_sweep):
        ru, rv, _ = _first_zeros(params, b, r_max, tol)
        table.append((float(b), ru, rv))
        sign = _gap_sign(ru, rv)
        if sign == 1:
            lo = float(b)
        elif sign == -1 and lo is not None:
            hi = float(b)
            break
    if lo is None or hi is None:
        raise ShootingError("rho_u - rho_v does not change sign over the bracket sweep", table)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        ru, rv, _ = _first_zeros(params, mid, r_max, tol)
        table.append((mid, ru, rv))
        sign = _gap_sign(ru, rv)
        if sign == 0:
            lo = hi = mid
            break
        if sign == 1:
            lo = mid
        else:
            hi = mid
    candidates = []
    for b in {lo, hi}:
        ru, rv, traj = _first_zeros(params, b, r_max, tol)
        candidates.append((abs(ru - rv), b, min(ru, rv), traj))
    gap, b_star, rho, traj = min(candidates, key=lambda c: c[0])
    if not math.isfinite(rho):
        raise ShootingError("no zero found at the converged shooting parameter", table)
    lam = rho / R
    k_u, k_v = similarity_exponents(params)
    at_rho = traj.physical([rho])[:, 0]
    sol = BvpSolution(
        params=params,
        profile=None,
        center_values=(lam**k_u, lam**k_v * b_star),
        shooting_parameter=float(b_star),
        residuals=(lam**k_u * abs(at_rho[0]), lam**k_v * abs(at_rho[2])),
        R=float(R),
        scale=lam,
        sweep=table,
        trajectory=traj,
        r_start=float(traj.radius(traj.x[0])),
    )
    steps = np.sort(traj.radius(traj.x)) / lam
    nodes = np.concatenate([steps, np.geomspace(sol.r_start / lam, R, 512), np.linspace(R / 512, R, 512)])
    nodes = np.unique(nodes[nodes < R * (1 - 1e-12)])
    sol.profile = sol.resample(np.append(nodes, R))
    log.debug("shooting converged: b* = %.17g, rho = %.17g, gap = %.3g", b_star, rho, gap)
    return sol


# --------------------------------------------------------------------------
# Liouville scan


@dataclass
class ScanRow:
    p: float
    b: float
    outcome: OutcomeKind
    event_location: Optional[float]


@dataclass
class ScanReport:
    rows: list
    p_s: float

    @property
    def positive_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(r.outcome is OutcomeKind.POSITIVE_ON_WINDOW for r in self.rows) / len(self.rows)

    @property
    def violations(self) -> list:
        """PositiveOnWindow rows below p_s, which would contradict the Liouville theorems."""
        return [r for r in self.rows if r.outcome is OutcomeKind.POSITIVE_ON_WINDOW and r.p < self.p_s]

    def first_zero_radii(self) -> list:
        return [r.event_location for r in self.rows if r.outcome in (OutcomeKind.U_CROSSED_ZERO, OutcomeKind.V_CROSSED_ZERO)]

    def to_csv(self) -> str:
        lines = ["p,b,outcome,event_location"]
        for r in self.rows:
            loc = "" if r.event_location is None else format(r.event_location, ".17g")
            lines.append(f"{r.p:.17g},{r.b:.17g},{r.outcome.value},{loc}")
        return "\n".join(lines) + "\n"


def _scan_one(job):
    params, b, r_max, tol = job
    out = classify_trajectory(params, 1.0, b, r_max, tol)
    return ScanRow(float(params.p), float(b), out.kind, out.location)


def liouville_scan(
    params_base: ProblemParams,
    p_grid: Sequence[float],
    b_grid: Sequence[float],
    r_max: float = 1e4,
    tol: float = DEFAULT_RTOL,
    jobs: int = 1,
) -> ScanReport:
    """Classify the trajectories u(0) = 1, v(0) = b over a (p, b) grid.

    Rows are ordered by (p index, b index) whatever the number of workers.
    """
    p_s = float(derive_exponents(params_base).p_s)
    work = [(params_base.with_p(p), float(b), r_max, tol) for p in p_grid for b in b_grid]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        rows = [_scan_one(j) for j in work]
    return ScanReport(rows, p_s)
