"""Training objectives and optimization loops.

Three objectives share one ansatz and differentiation stack:

  * pinn -- mean squared strong-form residual at collocation points, plus
    boundary / data / normalization / orthogonality penalties.
  * drm  -- Monte Carlo energy functional (fixed-source problems) or Rayleigh
    quotient (eigenproblems), plus the same penalties.
  * wan  -- adversarial weak form: a critic network is ascended on the
    normalized squared weak residual, the solution network descends on it.

Every builder below accepts the flat parameter vector either as an ndarray
(plain evaluation, returns floats) or as a taped Var (training, returns a
differentiable scalar), so the loss definitions exist exactly once.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import problems as pb
from .errors import ConfigurationError, DegenerateStateError, NumericError
from .network import AnsatzSpec, NetworkConfig, ParameterSet, ansatz_forward, ansatz_values, init_xavier
from .reference import relative_l2_values, resolve_exact
from .sampling import PointSet, data_subset, default_counts, default_strategy, holdout_grid, sample_boundary, sample_interior
from .tuning import tune_allocator

METHODS = ("pinn", "drm", "wan")


@dataclass
class TrainConfig:
    method: str = "pinn"
    variant: str = "fb"  # bc | fb | fn
    og_enabled: bool = False
    # loss weights (paper tuning range [1, 10000]; 0 disables a term)
    lam_int: float = 1.0
    lam_bc: float = 100.0
    lam_data: float = 100.0
    lam_norm: float = 100.0
    lam_og: float = 100.0
    lam_weak: float = 100.0
    beta: float = 500.0
    # optimizer
    epochs: int = 10000
    lr: float = 1e-3
    lr_decay: float = 1.0  # final/initial lr ratio, applied exponentially
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # wan critic
    critic_steps: int = 2
    critic_lr: float = None  # defaults to lr
    critic_width_ratio: float = 0.5
    critic_warmup: int = 0  # extra critic steps on the first epoch
    # architecture
    hidden_layers: int = 3
    width: int = 50
    activation: str = "tanh"
    # eigenvalue handling
    trainable_energy: bool = False
    energy_lr_scale: float = 0.1
    # sampling
    n_interior: int = None  # defaults per dimension
    n_boundary: int = 200
    strategy: str = None  # defaults per dimension
    data_fraction: float = 0.0
    # bookkeeping
    seed: int = 0
    eval_every: int = 25

    def validate(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.variant not in ("bc", "fb", "fn"):
            raise ConfigurationError(f"unknown ansatz variant {self.variant!r}")
        for name in ("lam_int", "lam_bc", "lam_data", "lam_norm", "lam_og", "lam_weak", "beta"):
            w = getattr(self, name)
            if w != 0.0 and not (1.0 <= w <= 10000.0):
                raise ConfigurationError(f"{name}={w} outside the tuning range [1, 10000]")
        if self.variant == "bc" and self.lam_bc == 0.0 and self.beta == 0.0:
            raise ConfigurationError("bc variant needs lam_bc > 0 or beta > 0")
        if self.epochs < 1 or self.lr <= 0:
            raise ConfigurationError("epochs must be >= 1 and lr > 0")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigurationError("lr_decay is the final/initial ratio in (0, 1]")


def default_train_config(method: str, **overrides) -> TrainConfig:
    """Per-method training defaults.

    The adversarial game needs the usual stabilizers: reduced Adam momentum,
    a two-time-scale critic with a warm start, and a decaying learning rate
    so the pair settles instead of orbiting the saddle.
    """
    base = dict(method=method)
    if method == "wan":
        base.update(
            beta1=0.5,
            critic_steps=3,
            critic_lr=2e-3,
            critic_warmup=500,
            lr_decay=0.01,
        )
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class LossBreakdown:
    """Raw (unweighted) loss components plus the weighted total.

    For wan the `interior` slot carries the normalized weak residual; for drm
    it carries the energy functional / Rayleigh quotient value.
    """

    interior: float = 0.0
    boundary: float = 0.0
    data: float = 0.0
    normalization: float = 0.0
    orthogonality: float = 0.0
    total: float = 0.0


@dataclass
class HistoryRow:
    epoch: int
    loss: LossBreakdown
    holdout_l2: float = None
    energy: float = None


@dataclass
class TrainedState:
    params: ParameterSet
    ansatz: AnsatzSpec
    problem: pb.ProblemSpec
    config: TrainConfig
    energy: float = None
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_l2: float = np.inf
    runtime_s: float = 0.0
    predecessors: tuple = ()

    def evaluate(self, X) -> np.ndarray:
        return ansatz_values(self.params.flat, self.params.config, self.ansatz, X)


# -- ansatz construction -------------------------------------------------------


def make_network(problem: pb.ProblemSpec, cfg: TrainConfig, width: int = None) -> NetworkConfig:
    lo, hi = problem.domain()
    return NetworkConfig(
        input_dim=problem.dim,
        hidden_layers=cfg.hidden_layers,
        width=width or cfg.width,
        activation=cfg.activation,
        center=tuple((lo + hi) / 2.0),
        halfwidth=tuple((hi - lo) / 2.0),
    )


def make_ansatz(problem: pb.ProblemSpec, variant: str) -> AnsatzSpec:
    lo, hi = problem.domain()
    planes = ()
    if variant == "fn":
        if problem.family == pb.KH:
            raise ConfigurationError("fn ansatz needs analytic nodal planes; kh has none")
        planes = resolve_exact(problem).nodal_planes
    return AnsatzSpec(
        variant=variant,
        lo=tuple(lo),
        hi=tuple(hi),
        node_planes=planes,
        decay=problem.unbounded,
    )


def _critic_setup(problem: pb.ProblemSpec, cfg: TrainConfig):
    width = max(1, int(round(cfg.width * cfg.critic_width_ratio)))
    net = make_network(problem, cfg, width=width)
    # test functions live in H^1_0: always hard-zero on the faces
    ansatz = make_ansatz(problem, "fb")
    return net, ansatz


# -- loss builders (theta may be an ndarray or a taped Var) ---------------------


def _scalar(x) -> float:
    return float(ad.value_of(x).reshape(()))


def _mean_sq(r, n: int):
    return (r * r).sum() * (1.0 / n)


def _norm_penalty(u, q):
    nrm = ((u * u) * q).sum()
    return (nrm - 1.0) * (nrm - 1.0)


def _og_penalty(u, og_states: list, q):
    pen = 0.0
    for pk in og_states:
        ov = ((u * pk) * q).sum()
        pen = pen + ov * ov
    return pen


def _boundary_values(theta, net, ansatz, boundary: PointSet):
    return ansatz_values(theta, net, ansatz, boundary.points)


def _energy_term(theta, params: ParameterSet, fixed_energy):
    """Energy in the residual: a taped slice for trainable-E runs, else a float."""
    if params.has_energy:
        if isinstance(theta, ad.Var):
            return theta[theta.value.size - 1 : theta.value.size].reshape(())
        return float(theta[-1])
    return fixed_energy


def _pinn_terms(theta, params, net, ansatz, problem, batch, cfg):
    u, _, L = ansatz_forward(theta, net, ansatz, batch["X_int"], need="lap")
    if problem.family == pb.POISSON:
        r = L + batch["f"]
    else:
        E = _energy_term(theta, params, batch["E"])
        kin = -(problem.hbar**2 / (2.0 * problem.mass))
        r = kin * L + batch["V"] * u - E * u
    parts = {"interior": _mean_sq(r, len(batch["X_int"]))}

    parts["boundary"] = 0.0
    if cfg.variant == "bc" and batch.get("X_bc") is not None:
        ub = ansatz_values(theta, net, ansatz, batch["X_bc"])
        parts["boundary"] = _mean_sq(ub, len(batch["X_bc"]))

    parts["data"] = 0.0
    if batch.get("X_data") is not None:
        ud = ansatz_values(theta, net, ansatz, batch["X_data"])
        parts["data"] = _mean_sq(ud - batch["labels"], len(batch["X_data"]))

    parts["normalization"] = 0.0
    parts["orthogonality"] = 0.0
    if problem.is_eigenproblem:
        if cfg.lam_norm > 0:
            parts["normalization"] = _norm_penalty(u, batch["q"])
        if batch["og"]:
            parts["orthogonality"] = _og_penalty(u, batch["og"], batch["q"])

    parts["total"] = (
        cfg.lam_int * parts["interior"]
        + cfg.lam_bc * parts["boundary"]
        + cfg.lam_data * parts["data"]
        + cfg.lam_norm * parts["normalization"]
        + cfg.lam_og * parts["orthogonality"]
    )
    return parts


def _drm_terms(theta, params, net, ansatz, problem, batch, cfg):
    u, J, _ = ansatz_forward(theta, net, ansatz, batch["X_int"], need="grad")
    q = batch["q"]
    grad_sq = (J * J).sum(axis=0)  # |grad u|^2 per point
    if problem.family == pb.POISSON:
        functional = (0.5 * q * grad_sq).sum() - ((batch["f"] * q) * u).sum()
        parts = {"interior": functional, "normalization": 0.0, "orthogonality": 0.0}
    else:
        kin = problem.hbar**2 / (2.0 * problem.mass)
        num = (kin * q * grad_sq).sum() + ((batch["V"] * q) * u * u).sum()
        den = ((u * u) * q).sum()
        if _scalar(den) < 1e-12:
            raise DegenerateStateError("Rayleigh denominator vanished (state collapse)")
        parts = {"interior": num / den}
        parts["normalization"] = _norm_penalty(u, q) if cfg.lam_norm > 0 else 0.0
        parts["orthogonality"] = _og_penalty(u, batch["og"], q) if batch["og"] else 0.0

    parts["boundary"] = 0.0
    if cfg.variant == "bc" and batch.get("X_bc") is not None:
        ub = ansatz_values(theta, net, ansatz, batch["X_bc"])
        parts["boundary"] = batch["w_bc"] * (ub * ub).sum()

    parts["data"] = 0.0
    if batch.get("X_data") is not None:
        ud = ansatz_values(theta, net, ansatz, batch["X_data"])
        parts["data"] = _mean_sq(ud - batch["labels"], len(batch["X_data"]))

    parts["total"] = (
        parts["interior"]
        + cfg.beta * parts["boundary"]
        + cfg.lam_data * parts["data"]
        + cfg.lam_norm * parts["normalization"]
        + cfg.lam_og * parts["orthogonality"]
    )
    return parts


def _weak_residual(problem, batch, u, J, E, v, Jv):
    """Normalized squared weak residual <A[u], v>^2 / ||v||^2.

    The test-function norm includes the gradient term (a discrete H^1 norm):
    the weak pairing is bounded by ||v||_{H^1}, so this keeps the critic's
    ascent objective bounded and the saddle point well defined.
    """
    q = batch["q"]
    grad_pair = (J * Jv).sum(axis=0)
    if problem.family == pb.POISSON:
        a = (q * grad_pair).sum() - ((batch["f"] * q) * v).sum()
    else:
        kin = problem.hbar**2 / (2.0 * problem.mass)
        a = (kin * q * grad_pair).sum() + ((batch["V"] * q) * u * v).sum() - E * ((u * v) * q).sum()
    v_norm = ((v * v) * q).sum() + ((Jv * Jv).sum(axis=0) * q).sum()
    if _scalar(v_norm) < 1e-12:
        raise DegenerateStateError("critic collapsed to (near) zero")
    return (a * a) / v_norm


def _wan_gen_terms(theta, params, net, ansatz, problem, batch, cfg, critic_jets):
    v, Jv = critic_jets
    u, J, _ = ansatz_forward(theta, net, ansatz, batch["X_int"], need="grad")
    E = None
    if problem.is_eigenproblem:
        E = _energy_term(theta, params, batch["E"])
    parts = {"interior": _weak_residual(problem, batch, u, J, E, v, Jv)}

    parts["boundary"] = 0.0
    if cfg.variant == "bc" and batch.get("X_bc") is not None:
        ub = ansatz_values(theta, net, ansatz, batch["X_bc"])
        parts["boundary"] = _mean_sq(ub, len(batch["X_bc"]))

    parts["data"] = 0.0
    if batch.get("X_data") is not None:
        ud = ansatz_values(theta, net, ansatz, batch["X_data"])
        parts["data"] = _mean_sq(ud - batch["labels"], len(batch["X_data"]))

    parts["normalization"] = 0.0
    parts["orthogonality"] = 0.0
    if problem.is_eigenproblem:
        if cfg.lam_norm > 0:
            parts["normalization"] = _norm_penalty(u, batch["q"])
        if batch["og"]:
            parts["orthogonality"] = _og_penalty(u, batch["og"], batch["q"])

    parts["total"] = (
        cfg.lam_weak * parts["interior"]
        + cfg.lam_bc * parts["boundary"]
        + cfg.lam_data * parts["data"]
        + cfg.lam_norm * parts["normalization"]
        + cfg.lam_og * parts["orthogonality"]
    )
    return parts


def _log_floor(x, floor: float = 1e-40):
    """log(x + floor) for Vars and arrays; keeps ascent signal alive near zero."""
    if isinstance(x, ad.Var):
        xv = x.value + floor
        return x.tape._record(np.log(xv), ((x.idx, lambda g: g / xv),))
    return np.log(x + floor)


def _wan_critic_objective(theta_v, critic_net, critic_ansatz, problem, batch, gen_jets, energy):
    """Critic ascends log of the normalized weak residual.

    The log is a monotone reparametrization (same maximizer) whose gradient
    does not vanish when the generator has zeroed the current projection, so
    the critic keeps producing fresh test directions.
    """
    u, J = gen_jets
    v, Jv, _ = ansatz_forward(theta_v, critic_net, critic_ansatz, batch["X_int"], need="grad")
    return _log_floor(_weak_residual(problem, batch, u, J, energy, v, Jv))


def _as_breakdown(parts) -> LossBreakdown:
    return LossBreakdown(**{k: _scalar(x) for k, x in parts.items()})


# -- public loss surfaces --------------------------------------------------------


def _make_batch(problem, interior, boundary=None, data=None, predecessors=(), energy=None):
    q = interior.quad
    if q is None:
        q = np.full(len(interior), interior.weight)
    batch = {
        "X_int": interior.points,
        "w_int": interior.weight,
        "q": q,
        "X_bc": boundary.points if boundary is not None else None,
        "w_bc": boundary.weight if boundary is not None else None,
        "X_data": data.points if data is not None else None,
        "labels": data.labels if data is not None else None,
        "E": energy,
        "og": [],
    }
    if problem.family == pb.POISSON:
        batch["f"] = pb.poisson_source(problem, interior.points)
    else:
        batch["V"] = pb.potential(problem, interior.points)
        if energy is None:
            batch["E"] = resolve_exact(problem).energy
    for pred in predecessors:
        vals = pred.evaluate(interior.points)
        nrm = np.sqrt(np.dot(q, vals * vals))
        if nrm < 1e-12:
            raise DegenerateStateError("predecessor state has vanishing norm")
        batch["og"].append(vals / nrm)
    return batch


def pinn_loss(params: ParameterSet, ansatz: AnsatzSpec, problem, interior, boundary=None,
              data=None, cfg: TrainConfig = None, predecessors=()) -> LossBreakdown:
    cfg = cfg or TrainConfig(method="pinn")
    if problem.is_eigenproblem and not params.has_energy:
        if resolve_exact(problem).energy is None:
            raise ConfigurationError("eigenproblem needs a trainable or fixed energy")
    batch = _make_batch(problem, interior, boundary, data, predecessors)
    return _as_breakdown(_pinn_terms(params.flat, params, params.config, ansatz, problem, batch, cfg))


def drm_loss(params: ParameterSet, ansatz: AnsatzSpec, problem, interior, boundary=None,
             data=None, cfg: TrainConfig = None, predecessors=()) -> LossBreakdown:
    cfg = cfg or TrainConfig(method="drm")
    batch = _make_batch(problem, interior, boundary, data, predecessors)
    return _as_breakdown(_drm_terms(params.flat, params, params.config, ansatz, problem, batch, cfg))


def wan_losses(gen_params: ParameterSet, critic_params: ParameterSet, problem, interior,
               gen_ansatz: AnsatzSpec, critic_ansatz: AnsatzSpec, boundary=None, data=None,
               cfg: TrainConfig = None, predecessors=()):
    """Generator LossBreakdown and the critic's (to be maximized) objective."""
    cfg = cfg or TrainConfig(method="wan")
    batch = _make_batch(problem, interior, boundary, data, predecessors)
    v, Jv, _ = ansatz_forward(
        critic_params.flat, critic_params.config, critic_ansatz, batch["X_int"], need="grad"
    )
    gen = _as_breakdown(
        _wan_gen_terms(gen_params.flat, gen_params, gen_params.config, gen_ansatz,
                       problem, batch, cfg, (v, Jv))
    )
    energy = _energy_term(gen_params.flat, gen_params, batch["E"]) if problem.is_eigenproblem else None
    u, J, _ = ansatz_forward(gen_params.flat, gen_params.config, gen_ansatz, batch["X_int"], need="grad")
    critic_obj = _scalar(
        _wan_critic_objective(critic_params.flat, critic_params.config, critic_ansatz,
                              problem, batch, (u, J), energy)
    )
    return gen, critic_obj


# -- Adam -------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; returns (new_params, state)."""
    grads = np.asarray(grads, dtype=float)
    if grads.shape != params.shape:
        raise ConfigurationError("gradient length does not match parameter length")
    if not np.isfinite(grads).all():
        bad = int(np.argmax(~np.isfinite(grads)))
        raise NumericError(f"non-finite gradient at component {bad}")
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grads
    state.v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), state


# -- training loop ----------------------------------------------------------------


def _holdout_l2(theta, net, ansatz, holdout, exact_vals, eigen: bool) -> float:
    pred = ansatz_values(theta, net, ansatz, holdout.points)
    try:
        return relative_l2_values(pred, exact_vals, holdout.quad, align_first=eigen)
    except DegenerateStateError:
        return np.inf  # collapsed state: flag as non-converged, keep training


def train(problem: pb.ProblemSpec, cfg: TrainConfig, predecessors=()) -> TrainedState:
    """Run the configured method on one problem instance.

    Records the loss breakdown every epoch and the holdout relative L2 every
    `cfg.eval_every` epochs; returns the best-holdout snapshot. For wan, each
    epoch runs `critic_steps` ascent updates followed by one generator update.
    """
    cfg.validate()
    tune_allocator()
    lo, hi = problem.domain()
    n_int, _ = default_counts(problem.dim)
    n_int = cfg.n_interior or n_int
    strategy = cfg.strategy or default_strategy(problem.dim)

    interior = sample_interior(lo, hi, n_int, strategy, seed=cfg.seed)
    boundary = None
    if cfg.variant == "bc":
        boundary = sample_boundary(lo, hi, cfg.n_boundary, seed=cfg.seed + 1)

    exact = resolve_exact(problem)
    holdout = holdout_grid(lo, hi, seed=cfg.seed + 2)
    exact_holdout = exact.evaluate(holdout.points)
    data = None
    if cfg.data_fraction > 0:
        data = data_subset(holdout_grid(lo, hi, seed=cfg.seed + 3), exact.evaluate, cfg.data_fraction)

    net = make_network(problem, cfg)
    ansatz = make_ansatz(problem, cfg.variant)
    eigen = problem.is_eigenproblem
    trainable_e = eigen and cfg.trainable_energy and cfg.method != "drm"
    params = init_xavier(net, cfg.seed, energy=exact.energy if trainable_e else None)
    batch = _make_batch(problem, interior, boundary, data, predecessors,
                        energy=None if trainable_e else (exact.energy if eigen else None))

    lr_slots = cfg.lr
    if trainable_e:
        lr_slots = np.full(params.flat.size, cfg.lr)
        lr_slots[-1] = cfg.lr * cfg.energy_lr_scale
    opt = AdamState.zeros(params.flat.size)

    critic = critic_ansatz = critic_net = critic_opt = None
    if cfg.method == "wan":
        critic_net, critic_ansatz = _critic_setup(problem, cfg)
        critic = init_xavier(critic_net, cfg.seed + 1)
        critic_opt = AdamState.zeros(critic.flat.size)
        critic_lr = cfg.critic_lr if cfg.critic_lr is not None else cfg.lr

    term_fn = {"pinn": _pinn_terms, "drm": _drm_terms}.get(cfg.method)

    history = []
    best_l2, best_epoch = np.inf, 0
    best_flat = params.flat.copy()
    best_energy = exact.energy if eigen else None
    t0 = time.perf_counter()
    try:
        for epoch in range(1, cfg.epochs + 1):
            if cfg.method == "wan":
                gen_u, gen_J, _ = ansatz_forward(params.flat, net, ansatz, batch["X_int"], need="grad")
                fixed_e = _energy_term(params.flat, params, batch["E"]) if eigen else None
                for _ in range(cfg.critic_steps):
                    tape = ad.Tape()
                    tv = tape.watch(critic.flat)
                    obj = _wan_critic_objective(tv, critic_net, critic_ansatz, problem,
                                                batch, (gen_u, gen_J), fixed_e)
                    g = ad.backward(tape)
                    critic.flat, critic_opt = adam_step(critic.flat, -g, critic_opt, critic_lr,
                                                        cfg.beta1, cfg.beta2, cfg.eps)
                v, Jv, _ = ansatz_forward(critic.flat, critic_net, critic_ansatz,
                                          batch["X_int"], need="grad")
                tape = ad.Tape()
                tv = tape.watch(params.flat)
                parts = _wan_gen_terms(tv, params, net, ansatz, problem, batch, cfg, (v, Jv))
            else:
                tape = ad.Tape()
                tv = tape.watch(params.flat)
                parts = term_fn(tv, params, net, ansatz, problem, batch, cfg)

            breakdown = _as_breakdown(parts)
            if not np.isfinite(breakdown.total):
                raise NumericError("loss became non-finite")
            grads = ad.backward(tape, 1.0)
            params.flat, opt = adam_step(params.flat, grads, opt, lr_slots,
                                         cfg.beta1, cfg.beta2, cfg.eps)

            row = HistoryRow(epoch, breakdown)
            if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
                row.holdout_l2 = _holdout_l2(params.flat, net, ansatz, holdout, exact_holdout, eigen)
                if trainable_e:
                    row.energy = float(params.flat[-1])
                elif eigen and cfg.method == "drm":
                    row.energy = breakdown.interior  # Rayleigh quotient
                elif eigen:
                    row.energy = exact.energy
                if row.holdout_l2 < best_l2:
                    best_l2, best_epoch = row.holdout_l2, epoch
                    best_flat = params.flat.copy()
                    best_energy = row.energy
            history.append(row)
    except NumericError as exc:
        raise NumericError(f"epoch {len(history) + 1}: {exc}") from exc
    runtime = time.perf_counter() - t0

    best_params = ParameterSet(best_flat, net, has_energy=params.has_energy)
    return TrainedState(
        params=best_params,
        ansatz=ansatz,
        problem=problem,
        config=cfg,
        energy=best_energy,
        history=history,
        best_epoch=best_epoch,
        best_l2=best_l2,
        runtime_s=runtime,
        predecessors=tuple(predecessors),
    )
