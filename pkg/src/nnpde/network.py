"""MLP ansatz: configuration, Xavier init, and hard-constraint envelopes.

The trial function is u_hat(x) = N(x; theta) * B(x) * P(x) * G(x), where
B forces homogeneous Dirichlet values on the box faces (variant "fb"),
P forces zeros on prescribed nodal planes (variant "fn", which includes B),
and G is a Gaussian decay envelope for truncated unbounded domains. All
envelope derivatives are analytic and composed into the jet by the product
rule, so hard constraints hold exactly for every parameter value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class NetworkConfig:
    """Fully connected scalar-output network description."""

    input_dim: int
    hidden_layers: int = 3
    width: int = 50
    activation: str = "tanh"
    # affine input normalization x -> (x - center) / halfwidth, folded into the jet
    center: tuple = None
    halfwidth: tuple = None

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_layers < 1 or self.width < 1:
            raise ConfigurationError("input_dim, hidden_layers and width must be >= 1")
        if self.activation not in ("tanh", "sin"):
            raise ConfigurationError("activation must be 'tanh' or 'sin'")

    def layer_shapes(self) -> list:
        shapes = [(self.width, self.input_dim)]
        shapes += [(self.width, self.width)] * (self.hidden_layers - 1)
        shapes.append((1, self.width))
        return shapes

    def param_count(self) -> int:
        return sum(m * k + m for m, k in self.layer_shapes())

    def input_scale(self):
        d = self.input_dim
        c = np.zeros(d) if self.center is None else np.asarray(self.center, dtype=float)
        h = np.ones(d) if self.halfwidth is None else np.asarray(self.halfwidth, dtype=float)
        return c, h

    def unpack(self, theta):
        """Yield (W, b) per layer from the flat vector (ndarray or taped Var)."""
        off = 0
        for m, k in self.layer_shapes():
            W = theta[off : off + m * k].reshape(m, k)
            b = theta[off + m * k : off + m * k + m]
            off += m * k + m
            yield W, b


@dataclass
class ParameterSet:
    """Flat trainable vector plus its layer layout; optionally a trainable energy."""

    flat: np.ndarray
    config: NetworkConfig
    has_energy: bool = False

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=float)
        expected = self.config.param_count() + (1 if self.has_energy else 0)
        if self.flat.size != expected:
            raise ConfigurationError(
                f"flat parameter vector has length {self.flat.size}, expected {expected}"
            )

    @property
    def energy(self) -> float:
        if not self.has_energy:
            raise ConfigurationError("parameter set has no trainable energy slot")
        return float(self.flat[-1])

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.flat.copy(), self.config, self.has_energy)


def init_xavier(config: NetworkConfig, seed: int, energy: float = None) -> ParameterSet:
    """Xavier-uniform weights, zero biases; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    parts = []
    for m, k in config.layer_shapes():
        bound = np.sqrt(6.0 / (k + m))
        parts.append(rng.uniform(-bound, bound, size=m * k))
        parts.append(np.zeros(m))
    if energy is not None:
        parts.append(np.array([float(energy)]))
    return ParameterSet(np.concatenate(parts), config, has_energy=energy is not None)


@dataclass(frozen=True)
class AnsatzSpec:
    """Ansatz transformation applied on top of the raw network output."""

    variant: str  # "bc" (raw), "fb" (forced boundary), "fn" (forced nodes, implies fb)
    lo: tuple
    hi: tuple
    node_planes: tuple = ()  # per-axis tuples of nodal coordinates (fn only)
    decay: bool = False
    decay_scale: float = None

    def __post_init__(self):
        if self.variant not in ("bc", "fb", "fn"):
            raise ConfigurationError("ansatz variant must be 'bc', 'fb' or 'fn'")
        lo, hi = self.bounds()
        if np.any(hi <= lo):
            raise ConfigurationError("domain box must have positive extent")
        if self.variant == "fn":
            planes = self.node_planes or ()
            for i, axis_planes in enumerate(planes):
                for z in axis_planes:
                    if not (lo[i] < z < hi[i]):
                        raise ConfigurationError(
                            f"node plane {z} not strictly inside axis {i} range"
                        )

    def bounds(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def scale(self) -> float:
        lo, hi = self.bounds()
        if self.decay_scale is not None:
            return float(self.decay_scale)
        return float(np.max(hi - lo) / 4.0)  # half the truncation radius


def _axis_factors(ansatz: AnsatzSpec, axis: int, t: np.ndarray):
    """Univariate envelope factor on one axis: (g, g', g'') arrays over t."""
    lo, hi = ansatz.bounds()
    a, b = lo[axis], hi[axis]
    h = (b - a) / 2.0
    g = np.ones_like(t)
    g1 = np.zeros_like(t)
    g2 = np.zeros_like(t)
    if ansatz.variant in ("fb", "fn"):
        v = (t - a) * (b - t) / h**2
        v1 = (a + b - 2.0 * t) / h**2
        v2 = np.full_like(t, -2.0 / h**2)
        g, g1, g2 = v, v1, v2
    if ansatz.variant == "fn" and ansatz.node_planes:
        for z in ansatz.node_planes[axis] if axis < len(ansatz.node_planes) else ():
            v = (t - z) / h
            v1 = np.full_like(t, 1.0 / h)
            ng = g * v
            ng1 = g1 * v + g * v1
            ng2 = g2 * v + 2.0 * g1 * v1
            g, g1, g2 = ng, ng1, ng2
    return g, g1, g2


def envelope_jet(ansatz: AnsatzSpec, X: np.ndarray):
    """Value, gradient (d, N) and Laplacian of the full envelope at each point."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n_pts, d = X.shape
    vals = np.ones((d, n_pts))
    d1 = np.zeros((d, n_pts))
    d2 = np.zeros((d, n_pts))
    for i in range(d):
        vals[i], d1[i], d2[i] = _axis_factors(ansatz, i, X[:, i])

    e = vals.prod(axis=0)
    eJ = np.zeros((d, n_pts))
    eL = np.zeros(n_pts)
    for i in range(d):
        rest = np.ones(n_pts)
        for j in range(d):
            if j != i:
                rest *= vals[j]
        eJ[i] = d1[i] * rest
        eL += d2[i] * rest

    if ansatz.decay:
        s2 = ansatz.scale() ** 2
        r2 = (X * X).sum(axis=1)
        g = np.exp(-r2 / (2.0 * s2))
        gJ = -(X.T / s2) * g
        gL = (r2 / s2**2 - d / s2) * g
        new_e = e * g
        new_J = eJ * g + e * gJ
        eL = eL * g + 2.0 * (eJ * gJ).sum(axis=0) + e * gL
        e, eJ = new_e, new_J
    return e, eJ, eL


def _is_identity_envelope(ansatz: AnsatzSpec) -> bool:
    return ansatz.variant == "bc" and not ansatz.decay


def ansatz_forward(theta, config: NetworkConfig, ansatz: AnsatzSpec, X, need: str = "lap"):
    """Jet of the enveloped network on a batch; `theta` may be a taped Var.

    Returns (u, J, L) shaped (N,), (d, N), (N,); J/L are None if not requested.
    """
    u, J, L = ad.mlp_jet_forward(theta, config, X, need=need)
    if _is_identity_envelope(ansatz):
        return u, J, L
    e, eJ, eL = envelope_jet(ansatz, X)
    u_hat = u * e
    J_hat = None
    L_hat = None
    if need in ("grad", "lap"):
        J_hat = J * e + eJ * u
    if need == "lap":
        L_hat = L * e + 2.0 * (J * eJ).sum(axis=0) + u * eL
    return u_hat, J_hat, L_hat


def ansatz_values(theta, config: NetworkConfig, ansatz: AnsatzSpec, X) -> np.ndarray:
    """Value-only fast path (skips the gradient and Laplacian chains)."""
    u, _, _ = ansatz_forward(theta, config, ansatz, X, need="value")
    return u


def eval_ansatz(params: ParameterSet, ansatz: AnsatzSpec, x) -> ad.Jet:
    """Jet of the enveloped network at a single point inside the domain."""
    x = np.asarray(x, dtype=float).reshape(-1)
    lo, hi = ansatz.bounds()
    if x.size != lo.size:
        raise ConfigurationError(
            f"point dimension {x.size} does not match domain dimension {lo.size}"
        )
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"point {x} lies outside the domain box")
    u, J, L = ansatz_forward(params.flat, params.config, ansatz, x[None, :], need="lap")
    return ad.Jet(u[0], J[:, 0], L[0])
