"""Differentiation engine: forward jet propagation and a reverse-mode tape.

Two derivative flavours are needed. With respect to the *inputs* x, every
loss in the package consumes at most the value u(x), the gradient grad u(x)
and the Laplacian lap u(x); these are propagated exactly through the layers
as a "jet" (u, J, L) using the chain rule, so no nested graphs are built.
With respect to the *parameters*, losses are scalars and a reverse-mode tape
over the jet arithmetic yields exact gradients.

Array layout: batched evaluation carries values as (N, m), input-gradients
as (d, N, m) and Laplacians as (N, m), where N is the batch size, m the
layer width and d the input dimension. The (d, N, m) layout keeps the
linear-layer jet update a single contiguous matmul.

All arithmetic is float64. The same forward code serves both plain numpy
arrays (no tape, used for evaluation) and `Var` operands (taped, used for
training), because `Var` mirrors the small slice of the ndarray API the
forward needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, TapeUsageError


@dataclass
class Jet:
    """Value, input-gradient and input-Laplacian of a scalar field at a point."""

    value: float
    grad: np.ndarray  # shape (d,)
    lap: float

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=float).reshape(-1)
        self.value = float(self.value)
        self.lap = float(self.lap)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient `g` down to `shape` (reverses numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tape:
    """Wengert list of primitive array operations with one parameter slot.

    The tape is rebuilt for every optimizer step; `backward` consumes it and
    a second call raises. Records hold (parent node id, vjp closure) pairs.
    """

    def __init__(self):
        self._parents: list[tuple] = []
        self._shapes: list[tuple] = []
        self._param_node: int | None = None
        self._param_size: int | None = None
        self.consumed = False

    def _record(self, value: np.ndarray, parents: tuple) -> "Var":
        self._parents.append(parents)
        self._shapes.append(np.shape(value))
        return Var(self, len(self._parents) - 1, value)

    def watch(self, theta: np.ndarray) -> "Var":
        """Register the flat parameter vector; its gradient is what backward returns."""
        if self._param_node is not None:
            raise TapeUsageError("tape already has a parameter slot")
        theta = np.asarray(theta, dtype=float)
        v = self._record(theta, ())
        self._param_node = v.idx
        self._param_size = theta.size
        return v

    def __len__(self):
        return len(self._parents)


class Var:
    """Taped array. Supports the arithmetic the jet forward pass uses."""

    __slots__ = ("tape", "idx", "value")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, tape: Tape, idx: int, value: np.ndarray):
        self.tape = tape
        self.idx = idx
        self.value = np.asarray(value, dtype=float)

    @property
    def shape(self):
        return self.value.shape

    # -- elementwise --------------------------------------------------------

    def _binary(self, other, out, vjp_self, vjp_other):
        if isinstance(other, Var):
            return self.tape._record(out, ((self.idx, vjp_self), (other.idx, vjp_other)))
        return self.tape._record(out, ((self.idx, vjp_self),))

    def __add__(self, other):
        ov = other.value if isinstance(other, Var) else np.asarray(other, dtype=float)
        sshape, oshape = self.value.shape, ov.shape
        return self._binary(
            other,
            self.value + ov,
            lambda g: _unbroadcast(g, sshape),
            lambda g: _unbroadcast(g, oshape),
        )

    __radd__ = __add__

    def __sub__(self, other):
        ov = other.value if isinstance(other, Var) else np.asarray(other, dtype=float)
        sshape, oshape = self.value.shape, ov.shape
        return self._binary(
            other,
            self.value - ov,
            lambda g: _unbroadcast(g, sshape),
            lambda g: _unbroadcast(-g, oshape),
        )

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        return self.tape._record(-self.value, ((self.idx, lambda g: -g),))

    def __mul__(self, other):
        ov = other.value if isinstance(other, Var) else np.asarray(other, dtype=float)
        sv, sshape, oshape = self.value, self.value.shape, ov.shape
        return self._binary(
            other,
            sv * ov,
            lambda g: _unbroadcast(g * ov, sshape),
            lambda g: _unbroadcast(g * sv, oshape),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov = other.value if isinstance(other, Var) else np.asarray(other, dtype=float)
        sv, sshape, oshape = self.value, self.value.shape, ov.shape
        return self._binary(
            other,
            sv / ov,
            lambda g: _unbroadcast(g / ov, sshape),
            lambda g: _unbroadcast(-g * sv / (ov * ov), oshape),
        )

    def __rtruediv__(self, other):
        ov = np.asarray(other, dtype=float)
        sv, sshape = self.value, self.value.shape
        return self.tape._record(
            ov / sv,
            ((self.idx, lambda g: _unbroadcast(-g * ov / (sv * sv), sshape)),),
        )

    # -- linear algebra ------------------------------------------------------

    def __matmul__(self, other):
        ov = other.value if isinstance(other, Var) else np.asarray(other, dtype=float)
        sv = self.value
        return self._binary(
            other,
            sv @ ov,
            lambda g: g @ ov.T,
            lambda g: sv.T @ g,
        )

    def __rmatmul__(self, other):
        ov = np.asarray(other, dtype=float)
        sv = self.value
        return self.tape._record(ov @ sv, ((self.idx, lambda g: ov.T @ g),))

    @property
    def T(self):
        sshape = self.value.shape
        assert len(sshape) == 2
        return self.tape._record(self.value.T.copy(), ((self.idx, lambda g: g.T),))

    # -- structure -----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        sshape = self.value.shape
        return self.tape._record(
            self.value.reshape(shape), ((self.idx, lambda g: g.reshape(sshape)),)
        )

    def __getitem__(self, key):
        if not isinstance(key, slice):
            raise TypeError("Var only supports 1-D slice indexing")
        sshape = self.value.shape

        def vjp(g, key=key):
            full = np.zeros(sshape)
            full[key] = g
            return full

        return self.tape._record(self.value[key], ((self.idx, vjp),))

    def sum(self, axis=None):
        sv, sshape = self.value, self.value.shape

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, sshape).copy()
            return np.broadcast_to(np.expand_dims(g, axis), sshape).copy()

        return self.tape._record(sv.sum(axis=axis), ((self.idx, vjp),))


# -- nonlinear primitives (dispatch on Var vs ndarray) ----------------------


def tanh(x):
    if isinstance(x, Var):
        t = np.tanh(x.value)
        return x.tape._record(t, ((x.idx, lambda g: g * (1.0 - t * t)),))
    return np.tanh(x)


def sin(x):
    if isinstance(x, Var):
        s = np.sin(x.value)
        c = np.cos(x.value)
        return x.tape._record(s, ((x.idx, lambda g: g * c),))
    return np.sin(x)


def cos(x):
    if isinstance(x, Var):
        c = np.cos(x.value)
        s = np.sin(x.value)
        return x.tape._record(c, ((x.idx, lambda g: -g * s),))
    return np.cos(x)


def value_of(x) -> np.ndarray:
    """Underlying ndarray of a Var, or the array itself."""
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def backward(tape: Tape, seed: float = 1.0) -> np.ndarray:
    """Replay the tape backward from its final (scalar) node.

    Returns d(scalar)/d(theta) for the watched parameter vector, exact for
    the recorded composition. The tape is consumed.
    """
    if tape.consumed:
        raise TapeUsageError("backward called twice on a consumed tape")
    if tape._param_node is None:
        raise TapeUsageError("tape has no watched parameter vector")
    if len(tape._parents) == 0:
        raise TapeUsageError("empty tape")
    root_shape = tape._shapes[-1]
    if int(np.prod(root_shape, dtype=int)) != 1:
        raise TapeUsageError(f"tape root has shape {root_shape}, expected a scalar")
    tape.consumed = True

    n = len(tape._parents)
    adjoint: list = [None] * n
    adjoint[n - 1] = np.full(root_shape, float(seed))
    for i in range(n - 1, -1, -1):
        g = adjoint[i]
        if g is None:
            continue
        for parent_idx, vjp in tape._parents[i]:
            contrib = vjp(g)
            if adjoint[parent_idx] is None:
                adjoint[parent_idx] = contrib
            else:
                adjoint[parent_idx] = adjoint[parent_idx] + contrib
        if i != tape._param_node:
            adjoint[i] = None  # free memory as we go
    grad = adjoint[tape._param_node]
    if grad is None:
        return np.zeros(tape._param_size)
    return np.asarray(grad, dtype=float).reshape(tape._param_size)


# -- forward jet propagation through an MLP ----------------------------------

_ACTIVATIONS = {"tanh", "sin"}


def _act_tables(a: np.ndarray, kind: str, want_spp: bool):
    """Activation value and first/second derivative tables."""
    if kind == "tanh":
        h = np.tanh(a)
        sp = 1.0 - h * h
        spp = -2.0 * h * sp if want_spp else None
    else:
        h = np.sin(a)
        sp = np.cos(a)
        spp = -h if want_spp else None
    return h, sp, spp


def _act_third(layer) -> np.ndarray:
    """Third derivative table, rebuilt from the stored forward tables."""
    if layer["kind"] == "tanh":
        sp, spp, h = layer["sp"], layer["spp"], layer["h"]
        return -2.0 * (sp * sp + h * spp)
    return -layer["sp"]


def _jet_fwd_arrays(Ws, bs, x_batch, config, need, check):
    """Plain-array jet forward; returns (u, J, L) plus a per-layer cache."""
    n_pts, d = x_batch.shape
    center, halfwidth = config.input_scale()
    z = (x_batch - center) / halfwidth
    J = L = None
    if need in ("grad", "lap"):
        eye = np.zeros((d, 1, d))
        eye[np.arange(d), 0, np.arange(d)] = 1.0 / halfwidth
        J = np.broadcast_to(eye, (d, n_pts, d)).copy()
    want_lap = need == "lap"

    layers = []
    n_layers = len(Ws)
    for li in range(n_layers):
        W, b = Ws[li], bs[li]
        m, w = W.shape
        rec = {"W": W, "z_in": z, "J_in": J, "L_in": L}
        a = z @ W.T + b
        if J is not None:
            J = (J.reshape(d * n_pts, w) @ W.T).reshape(d, n_pts, m)
        if L is not None:
            L = L @ W.T
        if li < n_layers - 1:
            h, sp, spp = _act_tables(a, config.activation, want_spp=J is not None or want_lap)
            rec.update(h=h, sp=sp, spp=spp, J_a=J, L_a=L, kind=config.activation)
            if want_lap:
                n2 = np.einsum("dnm,dnm->nm", J, J) if J is not None else None
                rec["n2"] = n2
                L = spp * n2 + (sp * L if L is not None else 0.0)
            if J is not None:
                J = sp * J
            z = h
        else:
            z = a
        layers.append(rec)
        if check:
            for part in (z, J, L):
                if part is not None and not np.isfinite(part).all():
                    raise NumericError(f"non-finite jet value after layer {li}")

    u = z.reshape(n_pts)
    if J is not None:
        J = J.reshape(d, n_pts)
    if L is not None:
        L = L.reshape(n_pts)
    elif want_lap:
        L = np.zeros(n_pts)  # affine network: Laplacian is exactly zero
    return u, J, L, layers


def _jet_bwd_arrays(layers, config, shape_nd, gu, gJ, gL, theta_size):
    """Hand-written reverse pass over the jet recursion.

    Takes output adjoints (any of which may be None) and returns the flat
    parameter gradient. Mirrors `_jet_fwd_arrays` layer by layer.
    """
    n_pts, d = shape_nd
    grad = np.zeros(theta_size)
    gz = gu.reshape(n_pts, 1) if gu is not None else None
    gJ = gJ.reshape(d, n_pts, 1) if gJ is not None else None
    gL = gL.reshape(n_pts, 1) if gL is not None else None

    offsets = []
    off = 0
    for m, w in config.layer_shapes():
        offsets.append((off, m, w))
        off += m * w + m

    for li in range(len(layers) - 1, -1, -1):
        rec = layers[li]
        W = rec["W"]
        m, w = W.shape
        if "h" in rec:  # activation layer: pull adjoints below the nonlinearity
            sp, spp = rec["sp"], rec["spp"]
            J_a, L_a = rec["J_a"], rec["L_a"]
            ga = gz * sp if gz is not None else None
            gJa = None
            gLa = None
            if gJ is not None:
                if ga is None:
                    ga = np.einsum("dnm,dnm->nm", gJ, J_a) * spp
                else:
                    ga += np.einsum("dnm,dnm->nm", gJ, J_a) * spp
                gJa = gJ * sp
            if gL is not None:
                d3 = _act_third(rec)
                term = d3 * rec["n2"]
                if L_a is not None:
                    term = term + spp * L_a
                ga = gL * term if ga is None else ga + gL * term
                contrib = (2.0 * gL * spp) * J_a
                gJa = contrib if gJa is None else gJa + contrib
                gLa = gL * sp
        else:  # output layer: adjoints pass straight through
            ga, gJa, gLa = gz, gJ, gL

        # affine layer: a = z W^T + b, J_a = W J_z, L_a = W L_z
        o, _, _ = offsets[li]
        gW = np.zeros((m, w))
        if ga is not None:
            gW += ga.T @ rec["z_in"]
            grad[o + m * w : o + m * w + m] = ga.sum(axis=0)
        if gJa is not None and rec["J_in"] is not None:
            gW += gJa.reshape(d * n_pts, m).T @ rec["J_in"].reshape(d * n_pts, w)
        if gLa is not None and rec["L_in"] is not None:
            gW += gLa.T @ rec["L_in"]
        grad[o : o + m * w] = gW.ravel()

        gz = ga @ W if ga is not None else None
        gJ = (gJa.reshape(d * n_pts, m) @ W).reshape(d, n_pts, w) if gJa is not None else None
        gL = gLa @ W if (gLa is not None and rec["L_in"] is not None) else None
    return grad


class _JetAdjoint:
    """Accumulates the (value, gradient, Laplacian) output adjoints of one
    jet forward until the reverse sweep reaches its bundle node."""

    __slots__ = ("gu", "gJ", "gL")

    def __init__(self, gu=None, gJ=None, gL=None):
        self.gu, self.gJ, self.gL = gu, gJ, gL

    @staticmethod
    def _merge(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return a + b

    def __add__(self, other):
        return _JetAdjoint(
            self._merge(self.gu, other.gu),
            self._merge(self.gJ, other.gJ),
            self._merge(self.gL, other.gL),
        )

    __radd__ = __add__


def mlp_jet_forward(theta, config, x_batch: np.ndarray, need: str = "lap", check: bool = False):
    """Propagate (value, gradient, Laplacian) of an MLP through its layers.

    `theta` is the flat parameter vector, either an ndarray (plain forward)
    or a `Var` (taped forward for parameter gradients). `config` is a
    NetworkConfig. `x_batch` has shape (N, d). `need` selects how much of
    the jet to carry: "value", "grad" or "lap".

    Per affine layer a = W z + b the update is J_a = W J_z, L_a = W L_z;
    per activation unit h = act(a): J_h = act'(a) J_a and
    L_h = act''(a) |J_a|^2 + act'(a) L_a.

    On a tape, the whole recursion is recorded as a single fused node whose
    reverse rule is the hand-written `_jet_bwd_arrays` sweep.

    Returns (u, J, L) with shapes (N,), (d, N), (N,); J/L are None when not
    requested.
    """
    x_batch = np.asarray(x_batch, dtype=float)
    if x_batch.ndim == 1:
        x_batch = x_batch[None, :]
    n_pts, d = x_batch.shape
    if d != config.input_dim:
        from .errors import ConfigurationError

        raise ConfigurationError(
            f"point dimension {d} does not match network input width {config.input_dim}"
        )
    if config.activation not in _ACTIVATIONS:
        from .errors import ConfigurationError

        raise ConfigurationError(
            f"activation {config.activation!r} not twice differentiable; use tanh or sin"
        )

    theta_arr = value_of(theta)
    Ws, bs = [], []
    for W, b in config.unpack(theta_arr):
        Ws.append(W)
        bs.append(b)
    u, J, L, layers = _jet_fwd_arrays(Ws, bs, x_batch, config, need, check)
    if not isinstance(theta, Var):
        return u, J, L

    tape = theta.tape
    size = theta_arr.size

    def bundle_vjp(adj: "_JetAdjoint") -> np.ndarray:
        return _jet_bwd_arrays(layers, config, (n_pts, d), adj.gu, adj.gJ, adj.gL, size)

    bundle = tape._record(np.zeros(()), ((theta.idx, bundle_vjp),))
    u_var = tape._record(u, ((bundle.idx, lambda g: _JetAdjoint(gu=g)),))
    J_var = L_var = None
    if J is not None:
        J_var = tape._record(J, ((bundle.idx, lambda g: _JetAdjoint(gJ=g)),))
    if L is not None:
        L_var = tape._record(L, ((bundle.idx, lambda g: _JetAdjoint(gL=g)),))
    return u_var, J_var, L_var


def propagate_jet(params, config, x) -> Jet:
    """Exact (u, grad u, lap u) of the raw network at a single point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u, J, L = mlp_jet_forward(params.flat, config, x[None, :], need="lap", check=True)
    return Jet(u[0], J[:, 0], L[0])
