"""Benchmark problem catalogue: sources, potentials, exact states and energies.

Families:
  * poisson  -- -lap u = prod_i sin(pi x_i / L) on (0, L)^d, u = 0 on the faces
  * ipw      -- infinite potential well on (0, L)^d
  * qho      -- harmonic oscillator, domain truncated to [-R, R]^d
  * kh       -- 1-D short-range well averaged over one laser cycle in the
                comoving (quiver) frame, truncated to [-R, R]

Natural units hbar = m = omega = 1 and L = 1 by default; the kh family uses
atomic units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError

POISSON = "poisson"
IPW = "ipw"
QHO = "qho"
KH = "kh"

_FAMILIES = (POISSON, IPW, QHO, KH)


@dataclass(frozen=True)
class ProblemSpec:
    family: str
    dim: int
    quantum_numbers: tuple = ()
    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    length: float = 1.0
    box_radius: float = 6.0  # truncation radius for unbounded families
    kh_v0: float = -24.856
    kh_soft_exp: float = 16.0  # constant under the exponential's root
    kh_soft_den: float = 6.27  # constant inside the denominator's root (squared)
    kh_alpha0: float = 0.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigurationError(f"unknown problem family {self.family!r}")
        if self.family == POISSON and not (1 <= self.dim <= 5):
            raise ConfigurationError("poisson benchmark is defined for 1 <= dim <= 5")
        if self.family == IPW:
            if len(self.quantum_numbers) != self.dim or any(
                n < 1 for n in self.quantum_numbers
            ):
                raise ConfigurationError("ipw quantum numbers must be >= 1, one per axis")
        if self.family == QHO:
            if len(self.quantum_numbers) != self.dim or any(
                n < 0 for n in self.quantum_numbers
            ):
                raise ConfigurationError("qho quantum numbers must be >= 0, one per axis")
        if self.family == KH:
            if self.dim != 1:
                raise ConfigurationError("kh well is one-dimensional")
            if self.kh_alpha0 < 0:
                raise ConfigurationError("quiver amplitude must be >= 0")

    @property
    def is_eigenproblem(self) -> bool:
        return self.family in (IPW, QHO, KH)

    @property
    def unbounded(self) -> bool:
        return self.family in (QHO, KH)

    def domain(self):
        if self.family in (POISSON, IPW):
            lo = np.zeros(self.dim)
            hi = np.full(self.dim, self.length)
        else:
            lo = np.full(self.dim, -self.box_radius)
            hi = np.full(self.dim, self.box_radius)
        return lo, hi

    def label(self) -> str:
        if self.family == POISSON:
            return f"poisson{self.dim}d"
        if self.family == KH:
            return f"kh_a{self.kh_alpha0:g}"
        return f"{self.family}{self.dim}d"


def poisson(dim: int, length: float = 1.0) -> ProblemSpec:
    return ProblemSpec(POISSON, dim, length=length)


def infinite_well(quantum_numbers, length: float = 1.0) -> ProblemSpec:
    qn = tuple(int(n) for n in np.atleast_1d(quantum_numbers))
    return ProblemSpec(IPW, len(qn), qn, length=length)


def harmonic_oscillator(quantum_numbers, box_radius: float = 6.0) -> ProblemSpec:
    qn = tuple(int(n) for n in np.atleast_1d(quantum_numbers))
    return ProblemSpec(QHO, len(qn), qn, box_radius=box_radius)


def kh_well(alpha0: float, state: int = 0, box_radius: float = 40.0) -> ProblemSpec:
    return ProblemSpec(
        KH, 1, (int(state),), box_radius=box_radius, kh_alpha0=float(alpha0)
    )


# -- Poisson ------------------------------------------------------------------


def poisson_source(spec: ProblemSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.prod(np.sin(np.pi * X / spec.length), axis=1)


def poisson_exact(spec: ProblemSpec, X) -> np.ndarray:
    return spec.length**2 / (spec.dim * np.pi**2) * poisson_source(spec, X)


def poisson_exact_jet(spec: ProblemSpec, X):
    """Analytic (u, grad, lap) of the exact Poisson solution; grad is (d, N)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    k = np.pi / spec.length
    s = np.sin(k * X)
    c = np.cos(k * X)
    amp = spec.length**2 / (spec.dim * np.pi**2)
    u = amp * s.prod(axis=1)
    grad = np.empty((spec.dim, X.shape[0]))
    for i in range(spec.dim):
        rest = np.prod(np.delete(s, i, axis=1), axis=1)
        grad[i] = amp * k * c[:, i] * rest
    lap = -spec.dim * k**2 * u
    return u, grad, lap


# -- infinite potential well --------------------------------------------------


def ipw_energy(spec: ProblemSpec) -> float:
    n2 = sum(n**2 for n in spec.quantum_numbers)
    return spec.hbar**2 * np.pi**2 * n2 / (2.0 * spec.mass * spec.length**2)


def ipw_exact(spec: ProblemSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    L = spec.length
    psi = np.ones(X.shape[0])
    for i, n in enumerate(spec.quantum_numbers):
        psi *= np.sqrt(2.0 / L) * np.sin(n * np.pi * X[:, i] / L)
    return psi


def ipw_exact_jet(spec: ProblemSpec, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    L = spec.length
    facs = []
    dfacs = []
    for i, n in enumerate(spec.quantum_numbers):
        k = n * np.pi / L
        facs.append(np.sqrt(2.0 / L) * np.sin(k * X[:, i]))
        dfacs.append(np.sqrt(2.0 / L) * k * np.cos(k * X[:, i]))
    psi = np.prod(facs, axis=0)
    grad = np.empty((spec.dim, X.shape[0]))
    for i in range(spec.dim):
        rest = np.ones(X.shape[0])
        for j in range(spec.dim):
            if j != i:
                rest *= facs[j]
        grad[i] = dfacs[i] * rest
    k2 = sum((n * np.pi / L) ** 2 for n in spec.quantum_numbers)
    return psi, grad, -k2 * psi


def ipw_nodal_planes(spec: ProblemSpec) -> tuple:
    L = spec.length
    return tuple(
        tuple(k * L / n for k in range(1, n)) for n in spec.quantum_numbers
    )


# -- harmonic oscillator ------------------------------------------------------


def hermite_value(n: int, z: np.ndarray) -> np.ndarray:
    """Physicists' Hermite polynomial H_n via the three-term recurrence."""
    z = np.asarray(z, dtype=float)
    h_prev = np.ones_like(z)
    if n == 0:
        return h_prev
    h = 2.0 * z
    for k in range(1, n):
        h, h_prev = 2.0 * z * h - 2.0 * k * h_prev, h
    return h


def qho_energy(spec: ProblemSpec) -> float:
    return spec.hbar * spec.omega * (sum(spec.quantum_numbers) + spec.dim / 2.0)


def _qho_axis_state(spec: ProblemSpec, n: int, t: np.ndarray):
    """1-D oscillator eigenfunction and its first two derivatives."""
    alpha = spec.mass * spec.omega / spec.hbar
    xi = np.sqrt(alpha) * t
    norm = (alpha / np.pi) ** 0.25 / np.sqrt(2.0**n * float(math.factorial(n)))
    e = np.exp(-0.5 * xi**2)
    H = hermite_value(n, xi)
    Hm1 = hermite_value(n - 1, xi) if n >= 1 else np.zeros_like(xi)
    Hm2 = hermite_value(n - 2, xi) if n >= 2 else np.zeros_like(xi)
    val = norm * e * H
    # d/dxi of e^{-xi^2/2} H_n = e^{-xi^2/2} (2n H_{n-1} - xi H_n)
    d1 = norm * np.sqrt(alpha) * e * (2.0 * n * Hm1 - xi * H)
    d2 = norm * alpha * e * (
        4.0 * n * (n - 1) * Hm2 - 2.0 * xi * 2.0 * n * Hm1 + (xi**2 - 1.0) * H
    )
    return val, d1, d2


def qho_exact(spec: ProblemSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    psi = np.ones(X.shape[0])
    for i, n in enumerate(spec.quantum_numbers):
        psi *= _qho_axis_state(spec, n, X[:, i])[0]
    return psi


def qho_exact_jet(spec: ProblemSpec, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vals, d1s, d2s = [], [], []
    for i, n in enumerate(spec.quantum_numbers):
        v, d1, d2 = _qho_axis_state(spec, n, X[:, i])
        vals.append(v)
        d1s.append(d1)
        d2s.append(d2)
    psi = np.prod(vals, axis=0)
    grad = np.empty((spec.dim, X.shape[0]))
    lap = np.zeros(X.shape[0])
    for i in range(spec.dim):
        rest = np.ones(X.shape[0])
        for j in range(spec.dim):
            if j != i:
                rest *= vals[j]
        grad[i] = d1s[i] * rest
        lap += d2s[i] * rest
    return psi, grad, lap


def qho_nodal_planes(spec: ProblemSpec) -> tuple:
    alpha = spec.mass * spec.omega / spec.hbar
    planes = []
    for n in spec.quantum_numbers:
        if n == 0:
            planes.append(())
        else:
            roots = np.polynomial.hermite.hermroots([0.0] * n + [1.0])
            planes.append(tuple(np.sort(roots) / np.sqrt(alpha)))
    return tuple(planes)


# -- cycle-averaged laser-driven well ------------------------------------------


def kh_bare_potential(spec: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (
        spec.kh_v0
        * np.exp(-np.sqrt(x**2 + spec.kh_soft_exp))
        / np.sqrt(x**2 + spec.kh_soft_den**2)
    )


def kh_cycle_average(spec: ProblemSpec, x, n_quad: int = 512) -> np.ndarray:
    """Average the quiver-shifted well over one period.

    Uses the N-point periodic trapezoid rule (spectrally accurate for smooth
    periodic integrands): mean over s_j = 2 pi j / N of V(x + alpha0 sin s_j).
    """
    x = np.asarray(x, dtype=float)
    if spec.kh_alpha0 == 0.0:
        return kh_bare_potential(spec, x)
    s = 2.0 * np.pi * np.arange(n_quad) / n_quad
    shifts = spec.kh_alpha0 * np.sin(s)
    vals = kh_bare_potential(spec, np.atleast_1d(x)[:, None] + shifts[None, :])
    out = vals.mean(axis=1)
    if not np.isfinite(out).all():
        raise NumericError("cycle-average quadrature produced non-finite values")
    return out.reshape(np.shape(x))


# -- uniform access -----------------------------------------------------------


def potential(spec: ProblemSpec, X) -> np.ndarray:
    """Potential term of the Hamiltonian, evaluated on a batch of points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.family == IPW:
        return np.zeros(X.shape[0])
    if spec.family == QHO:
        return 0.5 * spec.mass * spec.omega**2 * (X * X).sum(axis=1)
    if spec.family == KH:
        return kh_cycle_average(spec, X[:, 0])
    raise ConfigurationError(f"{spec.family} has no potential term")


@dataclass
class ExactSolution:
    """Reference solution: pointwise evaluator, energy, and nodal structure."""

    evaluate: callable  # (N, d) -> (N,)
    energy: float = None
    nodal_planes: tuple = ()
    jet: callable = None  # (N, d) -> (u, grad (d,N), lap (N,)); analytic families only


def exact_solution(spec: ProblemSpec) -> ExactSolution:
    """Closed-form solution for the analytic families (not kh; see reference)."""
    if spec.family == POISSON:
        return ExactSolution(
            evaluate=lambda X: poisson_exact(spec, X),
            jet=lambda X: poisson_exact_jet(spec, X),
        )
    if spec.family == IPW:
        return ExactSolution(
            evaluate=lambda X: ipw_exact(spec, X),
            energy=ipw_energy(spec),
            nodal_planes=ipw_nodal_planes(spec),
            jet=lambda X: ipw_exact_jet(spec, X),
        )
    if spec.family == QHO:
        return ExactSolution(
            evaluate=lambda X: qho_exact(spec, X),
            energy=qho_energy(spec),
            nodal_planes=qho_nodal_planes(spec),
            jet=lambda X: qho_exact_jet(spec, X),
        )
    raise ConfigurationError(
        "kh has no closed form; build the reference with reference.kh_reference_solution"
    )
