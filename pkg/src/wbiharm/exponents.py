"""
Parameter algebra for Delta(|x|^alpha Delta u) = |x|^l u^p.

Everything here is a closed-form function of the tuple (N, alpha, l, p).
Inputs may be ints, floats or ``fractions.Fraction``; the formulas only use
field operations, so rational inputs produce exact rational outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Optional

import numpy as np


class InvalidParamsError(ValueError):
    """Raised when (N, alpha, l, p) violates the admissibility conditions."""


@dataclass(frozen=True)
class ProblemParams:
    N: int
    alpha: Real
    l: Real
    p: Real

    def __post_init__(self):
        validate(self)

    @property
    def Nprime(self):
        return self.N + self.alpha

    @property
    def tau(self):
        return self.l - self.alpha

    def with_p(self, p) -> "ProblemParams":
        return ProblemParams(self.N, self.alpha, self.l, p)

    def as_float(self) -> "ProblemParams":
        return ProblemParams(self.N, float(self.alpha), float(self.l), float(self.p))

    def exact(self) -> "ProblemParams":
        """Same tuple with every real field converted to an exact Fraction."""
        return ProblemParams(self.N, Fraction(self.alpha), Fraction(self.l), Fraction(self.p))

    @classmethod
    def critical(cls, N: int, alpha, l) -> "ProblemParams":
        """Tuple with p set to the critical exponent p_s, exact for rational alpha, l."""
        alpha, l = Fraction(alpha), Fraction(l)
        Np, tau = N + alpha, l - alpha
        if Np <= 4:
            raise InvalidParamsError(f"N' = N + alpha = {float(Np)} violates N' > 4")
        return cls(N, alpha, l, (Np + 4 + 2 * tau) / (Np - 4))

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": float(self.alpha), "l": float(self.l), "p": float(self.p)}


def validate(params: ProblemParams) -> None:
    """Check N >= 5, 4 < N + alpha < 2N, l - alpha > -4 and p > 1.

    Each failure names the inequality that was violated.
    """
    N, alpha, l, p = params.N, params.alpha, params.l, params.p
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise InvalidParamsError(f"N must be an integer dimension, got {N!r}")
    for name, value in (("alpha", alpha), ("l", l), ("p", p)):
        if not isinstance(value, Real) or not math.isfinite(value):
            raise InvalidParamsError(f"{name} must be a finite real, got {value!r}")
    if N < 5:
        raise InvalidParamsError(f"N = {N} violates N >= 5")
    if not N + alpha > 4:
        raise InvalidParamsError(f"N' = N + alpha = {float(N + alpha):g} violates N' > 4")
    if not N + alpha < 2 * N:
        raise InvalidParamsError(f"N' = N + alpha = {float(N + alpha):g} violates N' < 2N")
    if not l - alpha > -4:
        raise InvalidParamsError(f"tau = l - alpha = {float(l - alpha):g} violates tau > -4")
    if not p > 1:
        raise InvalidParamsError(f"p = {float(p):g} violates p > 1")


@dataclass(frozen=True)
class DerivedExponents:
    Nprime: Real
    tau: Real
    p_s: Real
    p_star: Real
    p_upper_star: Real
    delta: Real
    delta_tilde: Real
    gamma_alpha: Real
    beta: Real
    gamma: Real
    sobolev_exp: Real

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def critical_exponent(params: ProblemParams):
    Np, tau = params.Nprime, params.tau
    return (Np + 4 + 2 * tau) / (Np - 4)


def derive_exponents(params: ProblemParams) -> DerivedExponents:
    validate(params)
    N, alpha, l, p = params.N, params.alpha, params.l, params.p
    Np, tau = params.Nprime, params.tau
    half_n = Fraction(N - 2, 2)
    half_a = (alpha - 2) / 2
    # gamma_alpha coincides with the zeroth-order coefficient (N-alpha)(N'-4)/4
    gamma_alpha = half_n**2 - half_a**2
    return DerivedExponents(
        Nprime=Np,
        tau=tau,
        p_s=critical_exponent(params),
        p_star=((Np + 4 + 2 * tau) - (Np - 4) * p) / 2,
        p_upper_star=((N + 2 + 2 * l) - (N - 2) * p) / 2,
        delta=gamma_alpha**2,
        delta_tilde=half_n**2 + half_a**2,
        gamma_alpha=gamma_alpha,
        beta=(2 + l) / (p - 1),
        gamma=4 / (p - 1),
        sobolev_exp=Fraction(N + 4, N - 4),
    )


@dataclass(frozen=True)
class RegimeReport:
    regime: str  # "p_s" when alpha >= (N-4) tau / 4, else "sobolev"
    threshold: Real  # (N-4) tau / 4
    q_range: tuple
    p_s: Real
    sobolev_exp: Real
    p_vs_ps: str
    p_vs_sobolev: str

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "threshold": float(self.threshold),
            "q_range": [float(q) for q in self.q_range],
            "p_s": float(self.p_s),
            "sobolev_exp": float(self.sobolev_exp),
            "p_vs_ps": self.p_vs_ps,
            "p_vs_sobolev": self.p_vs_sobolev,
        }


def _compare(p, threshold, rel=1e-12) -> str:
    if isinstance(p, Fraction) and isinstance(threshold, Fraction):
        if p == threshold:
            return "critical"
    elif math.isclose(float(p), float(threshold), rel_tol=rel):
        return "critical"
    return "subcritical" if p < threshold else "supercritical"


def classify_regime(params: ProblemParams) -> RegimeReport:
    """Embedding regime and criticality of p.

    The boundary alpha = (N-4) tau / 4 belongs to the p_s regime. The
    comparison is exact on the binary values of the inputs.
    """
    validate(params)
    N = params.N
    alpha, tau = Fraction(params.alpha), Fraction(params.tau)
    threshold = Fraction(N - 4, 4) * tau
    ps = critical_exponent(params)
    sob = Fraction(N + 4, N - 4)
    if alpha >= threshold:
        regime, q_range = "p_s", (1, ps + 1)
    else:
        regime, q_range = "sobolev", (1, Fraction(2 * N, N - 4))
    return RegimeReport(
        regime=regime,
        threshold=threshold,
        q_range=q_range,
        p_s=ps,
        sobolev_exp=sob,
        p_vs_ps=_compare(params.p, ps),
        p_vs_sobolev=_compare(params.p, sob),
    )


@dataclass(frozen=True)
class LinearizationSpectrum:
    """Spectrum of the linearized transformed system at the origin.

    ``eigenvectors[k]`` pairs with ``eigenvalues[k]``. When alpha = 2 the
    matrix is defective and the z-block vectors are generalized
    eigenvectors, flagged in ``generalized``: (A - lam I) g = (1, lam, 0, 0),
    the w-block eigenvector of the same eigenvalue.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # shape (4, 4), one vector per row
    matrix: np.ndarray
    generalized: tuple = field(default=(False, False, False, False))


def linearization_matrix(params: ProblemParams) -> np.ndarray:
    N, alpha = params.N, float(params.alpha)
    c = (N - alpha) * (N + alpha - 4) / 4
    return np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [c, 2 - alpha, -1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, c, alpha - 2],
        ]
    )


def linearization_spectrum(params: ProblemParams) -> LinearizationSpectrum:
    validate(params)
    N, alpha = params.N, float(params.alpha)
    A = linearization_matrix(params)
    c = A[1, 0]
    lam_w = (N + alpha - 4) / 2  # (N'-4)/2
    lam_z = (N - alpha) / 2
    # ordering: -(N'-4)/2, +(N'-4)/2, -(N-alpha)/2, +(N-alpha)/2
    eigenvalues = np.array([-lam_w, lam_w, -lam_z, lam_z])
    vectors = np.zeros((4, 4))
    generalized = [False] * 4
    for k, lam in enumerate(eigenvalues):
        if k in (0, 3):
            # roots of lam^2 - (2-alpha) lam - c: the w-block
            vectors[k] = (1.0, lam, 0.0, 0.0)
            continue
        d = c + (2 - alpha) * lam - lam * lam
        if alpha == 2:
            vectors[k] = (0.0, 1.0, 2 - alpha - 2 * lam, (2 - alpha - 2 * lam) * lam)
            generalized[k] = True
        else:
            x1 = 1.0 / d
            vectors[k] = (x1, x1 * lam, 1.0, lam)
    return LinearizationSpectrum(eigenvalues, vectors, A, tuple(generalized))


@dataclass(frozen=True)
class BootstrapSequence:
    sigma: list
    b: list
    sigma_closed: list
    b_closed: list
    degenerate_index: Optional[int]

    @property
    def consistent(self) -> bool:
        return self.sigma == self.sigma_closed and self.b == self.b_closed


def bootstrap_sequences(params: ProblemParams, k_max: int) -> BootstrapSequence:
    """Exponent sequences of the iterated lower bound for positive entire solutions.

    Built twice, by the recursions sigma_{k+1} = 2 + l + p sigma_k and
    b_{k+1} = p b_k + (2 + l)(k + 1), and by their closed forms, in exact
    rational arithmetic (floats are converted exactly).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    l, p = Fraction(params.l), Fraction(params.p)
    sigma, b = [Fraction(0)], [Fraction(0)]
    for k in range(k_max):
        sigma.append(2 + l + p * sigma[k])
        b.append(p * b[k] + (2 + l) * (k + 1))
    sigma_closed = [(2 + l) * (p**k - 1) / (p - 1) for k in range(k_max + 1)]
    b_closed = [(2 + l) * (p ** (k + 1) - (k + 1) * p + k) / (p - 1) ** 2 for k in range(k_max + 1)]
    degenerate = next((k for k, s in enumerate(sigma) if l + p * s == -1), None)
    return BootstrapSequence(sigma, b, sigma_closed, b_closed, degenerate)


def pohozaev_coefficient(params: ProblemParams):
    """(N' + tau)/(p + 1) - (N' - 4)/2; vanishes exactly at p = p_s."""
    Np, tau = params.Nprime, params.tau
    return (Np + tau) / (params.p + 1) - (Np - 4) / 2


def chart_weight_exponent(params: ProblemParams, q):
    """Exponent q_* in the interior-chart identity int |x|^l |u|^q = omega_N int e^{-q_* t} |w|^q dt."""
    Np, tau = params.Nprime, params.tau
    return (Np + tau) - q * (Np - 4) / 2


def sphere_area(N: int) -> float:
    """|S^{N-1}| = 2 pi^{N/2} / Gamma(N/2)."""
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)


def similarity_exponents(params: ProblemParams) -> tuple[float, float]:
    """Exponents (k_u, k_v) of u_lam(x) = lam^k_u u(lam x), v_lam = lam^k_v v(lam x)."""
    p, tau, alpha = float(params.p), float(params.tau), float(params.alpha)
    k_u = (4 + tau) / (p - 1)
    return k_u, (2 * (p + 1) + tau) / (p - 1) - alpha
