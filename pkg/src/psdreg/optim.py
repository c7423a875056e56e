"""Batch (Armijo) and online (annealed SGD) optimizers for the models of
:mod:`psdreg.regression`."""
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DivergenceError, StepFailureError, \
    DegenerateInputError, DomainError
from .regression import FlatModel, empirical_cost

TERMINATIONS = ("cost-tol", "rel-cost-tol", "rel-param-tol", "max-iters",
                "epochs-done", "linesearch-failure")


@dataclass
class BatchConfig:
    s0: float = 100.0
    c: float = 0.5
    eps_tol: float = 1e-5
    max_iters: int = 1000
    max_halvings: int = 50

    def __post_init__(self):
        if self.s0 <= 0:
            raise ConfigurationError("s0 must be positive")
        if not 0 < self.c < 1:
            raise ConfigurationError("c must lie in (0, 1)")
        if self.eps_tol <= 0:
            raise ConfigurationError("eps_tol must be positive")
        if self.max_iters < 0 or self.max_halvings < 0:
            raise ConfigurationError("iteration caps must be nonnegative")


@dataclass
class OnlineConfig:
    epochs: int = 3
    batch_size: int = 32
    grid: tuple = (-3, -2, -1, 0, 1, 2, 3)
    pretrain_fraction: float = 0.1
    pretrain_cap: int = 1024
    mu_samples: int = 256
    seed: int = 0
    adaptive: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if not self.grid:
            raise ConfigurationError("empty step-size grid")


@dataclass
class StepSchedule:
    """``s_t = (s / mu_grad) * n t0 / (n t0 + t)``."""

    s: float
    mu_grad: float
    n: int
    t0: float

    def __post_init__(self):
        if min(self.s, self.mu_grad, self.n, self.t0) <= 0:
            raise ConfigurationError("step schedule parameters must be positive")

    def __call__(self, t):
        return step_schedule(self, t)


def step_schedule(schedule, t):
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    nt0 = schedule.n * schedule.t0
    return (schedule.s / schedule.mu_grad) * nt0 / (nt0 + t)


def adaptive_step_flat(G, eta_t):
    """Confining step ``eta_t / max(||G||_F^2, 1)`` for flat online runs."""
    if eta_t <= 0:
        raise ValueError("eta_t must be positive")
    G = G.G if isinstance(G, FlatModel) else np.asarray(G)
    return eta_t / max(float(np.sum(G * G)), 1.0)


@dataclass
class FitReport:
    cost: list = field(default_factory=list)
    step: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    halvings: list = field(default_factory=list)
    termination: Optional[str] = None
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    def record(self, cost, step, grad_norm, wall_time, halvings=None):
        self.cost.append(float(cost))
        self.step.append(float(step))
        self.grad_norm.append(float(grad_norm))
        self.wall_time.append(float(wall_time))
        if halvings is not None:
            self.halvings.append(int(halvings))

    def to_dict(self):
        return asdict(self)


class LineSearchFailure(Exception):
    pass


def armijo_search(model, grad, cost_fn, f0, config, lam=0.5, grad_norm=None):
    """Backtracking line search with sufficient decrease.

    Starts from ``s_max = s0 / ||grad||`` and halves until
    ``f(R(-s grad)) <= f0 - c s ||grad||^2``.

    Returns ``(step, new_model, new_cost, halvings)``; raises
    :class:`LineSearchFailure` after ``max_halvings`` halvings.
    """
    if grad_norm is None:
        grad_norm = model.grad_norm(grad, lam)
    if not grad_norm > 0:
        raise ValueError("armijo_search needs a nonzero gradient")
    step = config.s0 / grad_norm
    sq = grad_norm ** 2
    for halvings in range(config.max_halvings + 1):
        try:
            candidate = model.descend(grad, step)
            f = cost_fn(candidate)
        except (StepFailureError, DegenerateInputError, DomainError,
                np.linalg.LinAlgError):
            f = np.inf
        if np.isfinite(f) and f <= f0 - config.c * step * sq:
            return step, candidate, f, halvings
        step *= 0.5
    raise LineSearchFailure(f"no acceptable step after {config.max_halvings} halvings")


def _rel_change(new, old):
    den = np.linalg.norm(old)
    return np.linalg.norm(new - old) / den if den > 0 else np.inf


def stopping_check(cost_prev, cost_new, model_prev, model_new, eps_tol):
    """Return a termination reason or ``None`` to continue.

    Stops when the cost, its relative change, or the relative parameter
    change drops to ``eps_tol``. For polar models the parameter test uses
    the stacked entries of ``U`` and ``R``.
    """
    if cost_new <= eps_tol:
        return "cost-tol"
    if cost_prev is None:
        return None
    if cost_prev > 0 and abs(cost_new - cost_prev) / cost_prev <= eps_tol:
        return "rel-cost-tol"
    if model_prev is not None and model_new is not None:
        if _rel_change(model_new.params(), model_prev.params()) <= eps_tol:
            return "rel-param-tol"
    return None


def batch_fit(model, samples, lam=0.5, config=None, callback=None):
    """Riemannian batch gradient descent with Armijo steps.

    ``callback(t, model)`` is invoked on the initial point and after every
    accepted update.
    """
    config = config or BatchConfig()
    if len(samples) == 0:
        raise ValueError("batch_fit needs at least one sample")
    report = FitReport()
    report.extra["lambda"] = lam

    def cost_fn(m):
        return empirical_cost(m, samples)

    start = time.perf_counter()
    f = cost_fn(model)
    if callback is not None:
        callback(0, model)
    reason = stopping_check(None, f, None, None, config.eps_tol)
    report.record(f, 0.0, np.nan, 0.0)
    t = 0
    while reason is None:
        if t >= config.max_iters:
            reason = "max-iters"
            break
        e = samples.residuals(model.predict(samples))
        grad = model.gradient(samples, lam, e=e)
        gnorm = model.grad_norm(grad, lam)
        report.grad_norm[-1] = gnorm
        if not gnorm > 0:
            reason = "rel-param-tol"
            break
        try:
            step, new_model, f_new, halvings = armijo_search(
                model, grad, cost_fn, f, config, lam, gnorm)
        except LineSearchFailure:
            reason = "linesearch-failure"
            break
        t += 1
        report.record(f_new, step, np.nan, time.perf_counter() - start, halvings)
        if callback is not None:
            callback(t, new_model)
        reason = stopping_check(f, f_new, model, new_model, config.eps_tol)
        model, f = new_model, f_new
    report.termination = reason
    report.iterations = t
    return model, report


def estimate_grad_norm(model, samples, lam=0.5, count=256):
    """Mean per-sample metric gradient norm at ``model`` over an evenly
    spaced subset of at most ``count`` samples."""
    n = len(samples)
    m = min(count, n)
    idx = np.unique(np.linspace(0, n - 1, m).astype(np.intp))
    norms = [model.grad_norm(model.gradient(samples.subset([k]), lam), lam) for k in idx]
    mu = float(np.mean(norms))
    if not mu > 0:
        # all sampled residuals vanish; any positive scale works
        mu = 1.0
    return mu


def _online_pass(model, samples, lam, config, step_fn, rng, report, start,
                 epochs, callback=None):
    n = len(samples)
    p = config.batch_size
    t = 0
    updates = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, p):
            batch = samples.subset(order[lo:lo + p])
            grad = model.gradient(batch, lam)
            step = step_fn(t)
            if config.adaptive:
                if not isinstance(model, FlatModel):
                    raise ConfigurationError("adaptive steps are only defined for flat models")
                step = adaptive_step_flat(model.G, step)
            model = model.descend(grad, step)
            t += len(batch)
            updates += 1
            if callback is not None:
                callback(updates, model)
        f = empirical_cost(model, samples)
        report.record(f, step, model.grad_norm(grad, lam), time.perf_counter() - start)
        if not np.isfinite(f):
            report.termination = "diverged"
            report.iterations = updates
            raise DivergenceError(f"non-finite cost after epoch {epoch + 1}", report)
    report.iterations = updates
    return model


def pretrain_grid_search(model, samples, lam=0.5, config=None, mu_grad=None, n=None,
                         return_scores=False):
    """Pick ``(s, t0)`` from the ``2^k`` grid by running one online epoch per
    candidate on ``samples`` (the pre-training subset).

    Ties are broken toward smaller ``s``, then smaller ``t0``. With
    ``return_scores=True`` the final cost of every candidate (``inf`` when
    it diverged) is returned as a third element.
    """
    config = config or OnlineConfig()
    if len(samples) == 0:
        raise ValueError("empty pre-training subset")
    n = n or len(samples)
    if mu_grad is None:
        mu_grad = estimate_grad_norm(model, samples, lam, config.mu_samples)
    best = None
    scores = {}
    values = sorted(2.0 ** k for k in config.grid)
    for s in values:
        for t0 in values:
            scores[(s, t0)] = np.inf
            schedule = StepSchedule(s, mu_grad, n, t0)
            rng = np.random.default_rng(config.seed)
            try:
                with np.errstate(all="ignore"):
                    fitted = _online_pass(model, samples, lam, config, schedule, rng,
                                          FitReport(), 0.0, 1)
                    f = empirical_cost(fitted, samples)
            except (DivergenceError, StepFailureError, DegenerateInputError,
                    DomainError, np.linalg.LinAlgError, FloatingPointError):
                continue
            if np.isfinite(f):
                scores[(s, t0)] = f
            if np.isfinite(f) and (best is None or f < best[0]):
                best = (f, s, t0)
    if best is None:
        raise ConfigurationError("every step-size candidate diverged")
    if return_scores:
        return best[1], best[2], scores
    return best[1], best[2]


def online_fit(model, samples, lam=0.5, config=None, s=None, t0=None,
               step_fn: Optional[Callable[[int], float]] = None, callback=None):
    """Mini-batch stochastic Riemannian gradient descent.

    The step at sample counter ``t`` comes from ``step_fn(t)`` when given,
    otherwise from :func:`step_schedule` with ``mu_grad`` estimated at the
    initial model and ``(s, t0)`` selected by :func:`pretrain_grid_search`
    unless both are supplied. Epochs visit the samples in a fresh seeded
    permutation; one retraction is performed per ``batch_size`` samples.
    """
    config = config or OnlineConfig()
    n = len(samples)
    if n == 0:
        raise ValueError("online_fit needs at least one sample")
    report = FitReport()
    report.extra["lambda"] = lam
    start = time.perf_counter()
    if step_fn is None:
        mu = estimate_grad_norm(model, samples, lam, config.mu_samples)
        if s is None or t0 is None:
            m = max(1, min(int(config.pretrain_fraction * n), config.pretrain_cap))
            sub_rng = np.random.default_rng(config.seed)
            subset = samples.subset(np.sort(sub_rng.choice(n, size=m, replace=False)))
            s, t0 = pretrain_grid_search(model, subset, lam, config, mu_grad=mu, n=n)
        step_fn = StepSchedule(s, mu, n, t0)
        report.extra.update(s=s, t0=t0, mu_grad=mu)
    f0 = empirical_cost(model, samples)
    report.record(f0, 0.0, np.nan, 0.0)
    rng = np.random.default_rng(config.seed)
    model = _online_pass(model, samples, lam, config, step_fn, rng, report, start,
                         config.epochs, callback)
    report.termination = "epochs-done"
    return model, report
