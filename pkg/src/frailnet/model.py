"""Frailty survival models with neural log-hazards.

Two schemes share one likelihood machinery:

  pf  (proportional / separable): nu(t, z) = h(t) + m(z), two nets.
  fn  (fully neural / joint):     nu(t, z) from one net over (t, z).

With A_i = integral over [0, T_i] of exp(nu(s, z_i)) ds, the per-sample
censored-data log-likelihood is

    delta_i * [log g(A_i) + nu(T_i, z_i)] - G(A_i)

where G is the frailty transform and g = dG/dx.  The integral is a
fixed Clenshaw-Curtis sum, so the objective is an explicit smooth
function of the network parameters and theta; gradients are exact:
the chain rule routes d/dA back through the quadrature node values and
the event-time evaluations in a single batched backward pass.

Times are fed to the nets rescaled by the study horizon tau, so net
inputs live in [0, 1].  Batch means use numpy's pairwise summation,
which fixes the reduction order and keeps runs bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import frailty as fr
from .errors import DomainError, HorizonError, NonFiniteError, SpecError
from .frailty import FrailtySpec
from .nn import Adam, Mlp, MlpSpec
from .quadrature import QuadratureRule, build_rule

SCHEMES = ("pf", "fn")

MODEL_FORMAT = "frailnet-model-v1"

THETA_BOUNDS = (0.0, 10.0)


@dataclass
class TrainConfig:
    """Training protocol knobs plus the model architecture.

    Defaults follow the reference protocol: 100 epochs, batch 128,
    Adam at 1e-4, quadrature order 16 for training and 64 for final
    curve evaluation.
    """

    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-4
    weight_decay: float = 0.0
    dropout_p: float = 0.0
    quad_order: int = 16
    seed: int = 0
    theta_init: float = 0.5
    hidden: tuple = (32,)
    frailty_family: str = "gamma"
    frailty_alpha: float | None = None
    tau: float | None = None
    eval_quad_order: int = 64

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 1:
            raise SpecError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise SpecError("learning_rate must be > 0")
        if not 0.0 <= self.dropout_p < 1.0:
            raise SpecError("dropout_p must be in [0, 1)")
        lo, hi = THETA_BOUNDS
        if not lo <= self.theta_init <= hi:
            raise SpecError(f"theta_init must be in [{lo}, {hi}]")
        # constructing the spec validates family/alpha pairing
        FrailtySpec(self.frailty_family, theta=self.theta_init, alpha=self.frailty_alpha)


@dataclass
class PfModel:
    """Separable log-hazard: time_net over t/tau, covar_net over z."""

    time_net: Mlp
    covar_net: Mlp
    frailty: FrailtySpec
    tau: float
    rule: QuadratureRule

    def __post_init__(self):
        if self.time_net.spec.input_dim != 1:
            raise SpecError("time_net must take a single time input")
        if self.tau <= 0:
            raise SpecError("tau must be positive")

    @property
    def scheme(self):
        return "pf"

    @property
    def covariate_dim(self):
        return self.covar_net.spec.input_dim


@dataclass
class FnModel:
    """Joint log-hazard: one net over (t/tau, z)."""

    net: Mlp
    frailty: FrailtySpec
    tau: float
    rule: QuadratureRule

    def __post_init__(self):
        if self.net.spec.input_dim < 2:
            raise SpecError("joint net needs time plus at least one covariate")
        if self.tau <= 0:
            raise SpecError("tau must be positive")

    @property
    def scheme(self):
        return "fn"

    @property
    def covariate_dim(self):
        return self.net.spec.input_dim - 1


def _check_batch(model, times, events, covars):
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    covars = np.asarray(covars, dtype=np.float64)
    if covars.ndim == 1:
        covars = covars[None, :] if times.ndim == 0 else covars[:, None]
    times = np.atleast_1d(times)
    events = np.atleast_1d(events)
    if times.size == 0:
        raise SpecError("empty batch")
    if times.shape[0] != events.shape[0] or covars.shape[0] != times.shape[0]:
        raise SpecError("times, events and covariates must have matching length")
    if covars.shape[1] != model.covariate_dim:
        raise SpecError(
            f"covariate dim {covars.shape[1]} does not match model dim {model.covariate_dim}"
        )
    if np.any(times < 0):
        raise DomainError("observed times must be >= 0")
    if np.any(times > model.tau):
        raise HorizonError(f"observed time beyond horizon tau={model.tau}")
    if not np.all(np.isin(events, (0.0, 1.0))):
        raise DomainError("event indicators must be 0 or 1")
    return times, events, covars


def _quad_points(rule, times):
    # per-sample rescaled nodes and weights: s_ik on [0, T_i], row-major
    half = 0.5 * times
    s = half[:, None] * (rule.nodes[None, :] + 1.0)
    sw = half[:, None] * rule.weights[None, :]
    return s, sw


class _PfPass:
    """One batched forward pass of a pf model, with enough retained
    state to assemble the likelihood value and its exact gradient."""

    def __init__(self, model, times, events, covars, dropout_p=0.0, rng=None):
        b = times.shape[0]
        k1 = model.rule.nodes.size
        s, sw = _quad_points(model.rule, times)
        t_in = np.concatenate([s.reshape(-1), times]) / model.tau
        h_out, self.h_tape = model.time_net.forward(t_in[:, None], dropout_p, rng)
        m_out, self.m_tape = model.covar_net.forward(covars, dropout_p, rng)
        self.h_quad = h_out[: b * k1].reshape(b, k1)
        self.h_event = h_out[b * k1 :]
        self.m_out = m_out
        self.exp_quad = np.exp(self.h_quad)
        self.exp_m = np.exp(m_out)
        self.cum = np.sum(sw * self.exp_quad, axis=1)  # integral of exp(h) on [0, T_i]
        self.agg = self.exp_m * self.cum  # A_i
        self.sw = sw
        self.b, self.k1 = b, k1

    def nu_event(self):
        return self.h_event + self.m_out

    def terms(self, spec, events):
        _require_finite(self.agg, "aggregated hazard")
        event_term = events * (fr.log_transform_dx(spec, self.agg) + self.nu_event())
        return event_term - fr.transform(spec, self.agg)

    def backprop(self, model, spec, events):
        b = self.b
        c = events * fr.log_transform_dx_dx(spec, self.agg) - fr.transform_dx(spec, self.agg)
        up_quad = (c * self.exp_m)[:, None] * self.sw * self.exp_quad
        up_h = np.concatenate([up_quad.reshape(-1), events]) / b
        h_grads, _ = model.time_net.backward(self.h_tape, up_h)
        up_m = (c * self.agg + events) / b
        m_grads, _ = model.covar_net.backward(self.m_tape, up_m)
        dtheta = float(
            np.mean(
                events * fr.log_transform_dx_dtheta(spec, self.agg)
                - fr.transform_dtheta(spec, self.agg)
            )
        )
        return [*model.time_net.grad_list(h_grads), *model.covar_net.grad_list(m_grads)], dtheta


class _FnPass:
    """Batched forward pass of an fn model; same role as _PfPass."""

    def __init__(self, model, times, events, covars, dropout_p=0.0, rng=None):
        b = times.shape[0]
        k1 = model.rule.nodes.size
        s, sw = _quad_points(model.rule, times)
        quad_x = np.column_stack([s.reshape(-1) / model.tau, np.repeat(covars, k1, axis=0)])
        event_x = np.column_stack([times / model.tau, covars])
        out, self.tape = model.net.forward(
            np.concatenate([quad_x, event_x], axis=0), dropout_p, rng
        )
        self.nu_quad = out[: b * k1].reshape(b, k1)
        self.nu_at_event = out[b * k1 :]
        self.exp_quad = np.exp(self.nu_quad)
        self.agg = np.sum(sw * self.exp_quad, axis=1)
        self.sw = sw
        self.b, self.k1 = b, k1

    def nu_event(self):
        return self.nu_at_event

    def terms(self, spec, events):
        _require_finite(self.agg, "aggregated hazard")
        event_term = events * (fr.log_transform_dx(spec, self.agg) + self.nu_at_event)
        return event_term - fr.transform(spec, self.agg)

    def backprop(self, model, spec, events):
        b = self.b
        c = events * fr.log_transform_dx_dx(spec, self.agg) - fr.transform_dx(spec, self.agg)
        up_quad = c[:, None] * self.sw * self.exp_quad
        up = np.concatenate([up_quad.reshape(-1), events]) / b
        grads, _ = model.net.backward(self.tape, up)
        dtheta = float(
            np.mean(
                events * fr.log_transform_dx_dtheta(spec, self.agg)
                - fr.transform_dtheta(spec, self.agg)
            )
        )
        return model.net.grad_list(grads), dtheta


def _require_finite(values, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NonFiniteError(f"non-finite {what} at sample index {idx}")


def _make_pass(model, times, events, covars, dropout_p=0.0, rng=None):
    cls = _PfPass if model.scheme == "pf" else _FnPass
    return cls(model, times, events, covars, dropout_p, rng)


def oll(model, times, events, covars) -> float:
    """Batch-mean observed log-likelihood of a pf or fn model."""
    times, events, covars = _check_batch(model, times, events, covars)
    p = _make_pass(model, times, events, covars)
    terms = p.terms(model.frailty, events)
    _require_finite(terms, "likelihood term")
    return float(np.mean(terms))


def oll_terms(model, times, events, covars):
    """Per-sample breakdown (event log-g part, event log-hazard part,
    cumulative part) whose row sums average to the OLL."""
    times, events, covars = _check_batch(model, times, events, covars)
    p = _make_pass(model, times, events, covars)
    _require_finite(p.agg, "aggregated hazard")
    spec = model.frailty
    return (
        events * fr.log_transform_dx(spec, p.agg),
        events * p.nu_event(),
        -fr.transform(spec, p.agg),
    )


def oll_grad(model, times, events, covars):
    """Exact gradient of the batch-mean OLL.

    Returns (value, net_grads, dtheta): net_grads is a flat list of
    arrays aligned with the model's parameter list (time_net then
    covar_net for pf; single net for fn).
    """
    times, events, covars = _check_batch(model, times, events, covars)
    p = _make_pass(model, times, events, covars)
    terms = p.terms(model.frailty, events)
    _require_finite(terms, "likelihood term")
    grads, dtheta = p.backprop(model, model.frailty, events)
    for g in grads:
        _require_finite(g, "parameter gradient")
    if not np.isfinite(dtheta):
        raise NonFiniteError("non-finite theta gradient")
    return float(np.mean(terms)), grads, dtheta


def model_params(model):
    if model.scheme == "pf":
        return [*model.time_net.param_list(), *model.covar_net.param_list()]
    return model.net.param_list()


def train(scheme: str, dataset, config: TrainConfig):
    """Fit a model by minibatch Adam ascent on the OLL.

    dataset is anything with .times, .events, .covariates arrays (see
    module data) or a (times, events, covariates) tuple.  Returns
    (model, trace) where trace holds the per-epoch mean of minibatch
    objective values.  Fully deterministic given config.seed.
    """
    if scheme not in SCHEMES:
        raise SpecError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    times, events, covars = _dataset_arrays(dataset)
    if times.size == 0:
        raise SpecError("dataset is empty")
    if not np.any(events == 1):
        raise SpecError("dataset has no events; likelihood is not identifiable")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(covars))):
        raise NonFiniteError("dataset contains non-finite values")
    tau = float(np.max(times)) if config.tau is None else float(config.tau)
    if tau < np.max(times) or tau <= 0:
        raise SpecError("tau must be positive and cover the largest observed time")

    dim = covars.shape[1]
    rule = build_rule(config.quad_order)
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    spec0 = FrailtySpec(
        config.frailty_family, theta=config.theta_init, alpha=config.frailty_alpha
    )
    if scheme == "pf":
        model = PfModel(
            time_net=Mlp.init(MlpSpec(1, config.hidden), np.random.default_rng(seeds[0])),
            covar_net=Mlp.init(MlpSpec(dim, config.hidden), np.random.default_rng(seeds[1])),
            frailty=spec0,
            tau=tau,
            rule=rule,
        )
    else:
        model = FnModel(
            net=Mlp.init(MlpSpec(dim + 1, config.hidden), np.random.default_rng(seeds[0])),
            frailty=spec0,
            tau=tau,
            rule=rule,
        )
    theta = np.array([config.theta_init])
    params = [*model_params(model), theta]
    flags = [True] * (len(params) - 1) + [False]  # no weight decay on theta
    opt = Adam(
        params,
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
        decay_flags=flags,
    )
    shuffle_rng = np.random.default_rng(seeds[2])
    drop_rng = np.random.default_rng(seeds[3])
    n = times.size
    lo, hi = THETA_BOUNDS
    trace = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        batch_vals = []
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            model.frailty = replace(model.frailty, theta=float(theta[0]))
            try:
                p = _make_pass(
                    model, times[idx], events[idx], covars[idx], config.dropout_p, drop_rng
                )
                terms = p.terms(model.frailty, events[idx])
                _require_finite(terms, "likelihood term")
                grads, dtheta = p.backprop(model, model.frailty, events[idx])
                opt.step(params, [*grads, np.array([dtheta])], maximize=True)
            except NonFiniteError as err:
                raise NonFiniteError(f"epoch {epoch} batch {bi}: {err}") from err
            theta[0] = min(max(theta[0], lo), hi)
            batch_vals.append(float(np.mean(terms)))
        trace[epoch] = np.mean(batch_vals)
    model.frailty = replace(model.frailty, theta=float(theta[0]))
    return model, trace


def _dataset_arrays(dataset):
    if isinstance(dataset, tuple):
        times, events, covars = dataset
    else:
        times, events, covars = dataset.times, dataset.events, dataset.covariates
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    covars = np.asarray(covars, dtype=np.float64)
    if covars.ndim == 1:
        covars = covars[:, None]
    return times, events, covars


# ---------------------------------------------------------------------------
# prediction


def _check_horizon(model, t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("prediction times must be >= 0")
    if np.any(t > model.tau):
        raise HorizonError(f"prediction time beyond horizon tau={model.tau}")
    return t


def _aggregated(model, t, z, rule):
    """Integral of exp(nu(s, z)) over [0, t] for one covariate vector."""
    if t == 0:
        return 0.0
    points = 0.5 * t * (rule.nodes + 1.0)
    weights = 0.5 * t * rule.weights
    if model.scheme == "pf":
        h, _ = model.time_net.forward(points[:, None] / model.tau)
        m, _ = model.covar_net.forward(z)
        return float(np.exp(m) * (weights @ np.exp(h)))
    x = np.column_stack([points / model.tau, np.broadcast_to(z, (points.size, z.size))])
    nu, _ = model.net.forward(x)
    return float(weights @ np.exp(nu))


def log_hazard(model, t, z):
    """Estimated log hazard at paired points (t_i, z_i).

    t may be a scalar or a length-k array; z one covariate vector or a
    (k, d) matrix.  Returns a float for scalar input, else shape (k,).
    """
    t = _check_horizon(model, t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t).astype(np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = np.broadcast_to(z, (t.size, z.size))
    if z.shape[0] != t.size or z.shape[1] != model.covariate_dim:
        raise SpecError("t and z shapes do not pair up")
    if model.scheme == "pf":
        h, _ = model.time_net.forward(t[:, None] / model.tau)
        m, _ = model.covar_net.forward(z)
        out = h + m
    else:
        x = np.column_stack([t / model.tau, z])
        out, _ = model.net.forward(x)
    out = np.atleast_1d(out)
    return float(out[0]) if scalar else out


def cum_hazard(model, t, z, rule=None) -> float:
    """Marginal cumulative hazard at time t for covariates z."""
    t = float(_check_horizon(model, t))
    z = np.asarray(z, dtype=np.float64)
    rule = rule or model.rule
    return fr.transform(model.frailty, _aggregated(model, t, z, rule))


def survival(model, t, z, rule=None) -> float:
    """Marginal survival probability at time t for covariates z."""
    return float(np.exp(-cum_hazard(model, t, z, rule)))


def survival_matrix(model, covars, grid, order: int = 64):
    """Survival values S(t_j | z_i) for all subjects x grid times.

    One batched forward per grid point keeps memory flat; a high-order
    rule (default 64) is used for final curve evaluation.
    """
    grid = _check_horizon(model, np.asarray(grid, dtype=np.float64))
    if grid.ndim != 1 or grid.size == 0:
        raise SpecError("grid must be a non-empty 1-d array")
    if np.any(np.diff(grid) < 0):
        raise SpecError("grid times must be non-decreasing")
    covars = np.asarray(covars, dtype=np.float64)
    if covars.ndim == 1:
        covars = covars[None, :]
    if covars.shape[1] != model.covariate_dim:
        raise SpecError("covariate dim mismatch")
    rule = build_rule(order)
    n = covars.shape[0]
    k1 = rule.nodes.size
    agg = np.zeros((n, grid.size))
    if model.scheme == "pf":
        m, _ = model.covar_net.forward(covars)
        exp_m = np.exp(m)
        for j, t in enumerate(grid):
            if t == 0:
                continue
            points = 0.5 * t * (rule.nodes + 1.0)
            weights = 0.5 * t * rule.weights
            h, _ = model.time_net.forward(points[:, None] / model.tau)
            agg[:, j] = exp_m * float(weights @ np.exp(h))
    else:
        for j, t in enumerate(grid):
            if t == 0:
                continue
            points = 0.5 * t * (rule.nodes + 1.0)
            weights = 0.5 * t * rule.weights
            x = np.column_stack(
                [
                    np.tile(points / model.tau, n),
                    np.repeat(covars, k1, axis=0),
                ]
            )
            nu, _ = model.net.forward(x)
            agg[:, j] = np.exp(nu).reshape(n, k1) @ weights
    lam = fr.transform(model.frailty, agg.reshape(-1)).reshape(n, grid.size)
    # quadrature noise could break monotonicity at roundoff scale; clamp
    lam = np.maximum.accumulate(lam, axis=1)
    return np.exp(-lam)


def survival_curve(model, z, grid, order: int = 64):
    """Survival curve for one covariate vector on an increasing grid."""
    from .metrics import SurvivalCurve

    grid = np.asarray(grid, dtype=np.float64)
    values = survival_matrix(model, np.asarray(z, dtype=np.float64)[None, :], grid, order)[0]
    return SurvivalCurve(times=grid, values=values)


# ---------------------------------------------------------------------------
# persistence


def _model_payload(model, scaling=None):
    payload = {
        "format": MODEL_FORMAT,
        "scheme": model.scheme,
        "frailty": {
            "family": model.frailty.family,
            "theta": model.frailty.theta,
            "alpha": model.frailty.alpha,
        },
        "tau": model.tau,
        "quad_order": model.rule.order,
    }
    if model.scheme == "pf":
        payload["nets"] = {
            "time": model.time_net.to_dict(),
            "covar": model.covar_net.to_dict(),
        }
    else:
        payload["nets"] = {"joint": model.net.to_dict()}
    payload["scaling"] = scaling
    return payload


def save_model(model, path, scaling=None) -> None:
    """Write the model (and optional covariate scaling info) as JSON.

    float repr round-trips doubles exactly, so save -> load -> save is
    byte-identical and two identical training runs produce identical
    files.
    """
    payload = _model_payload(model, scaling)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path):
    """Read a model written by save_model. Returns (model, scaling)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise SpecError(f"{path}: not a recognized model file")
    spec = FrailtySpec(
        payload["frailty"]["family"],
        theta=payload["frailty"]["theta"],
        alpha=payload["frailty"]["alpha"],
    )
    rule = build_rule(int(payload["quad_order"]))
    tau = float(payload["tau"])
    if payload["scheme"] == "pf":
        model = PfModel(
            time_net=Mlp.from_dict(payload["nets"]["time"]),
            covar_net=Mlp.from_dict(payload["nets"]["covar"]),
            frailty=spec,
            tau=tau,
            rule=rule,
        )
    elif payload["scheme"] == "fn":
        model = FnModel(
            net=Mlp.from_dict(payload["nets"]["joint"]),
            frailty=spec,
            tau=tau,
            rule=rule,
        )
    else:
        raise SpecError(f"{path}: unknown scheme {payload['scheme']!r}")
    return model, payload.get("scaling")
