"""Hamiltonian Monte Carlo over compiled models.

The sampler works entirely in unconstrained space: positions are the
model's parameter vector, momenta are auxiliary Gaussians with a fixed
diagonal covariance (the mass matrix), and proposals come from leapfrog
integration of the resulting Hamiltonian. Step size is tuned during
warmup by dual averaging toward a target acceptance rate, then frozen.

All randomness flows through explicit ``rng`` state threading, so a
chain is a pure function of its config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import rng
from .graph import GraphDomainError
from .model import CompiledModel
from .rng import GenState


class InitializationError(RuntimeError):
    """No finite-density starting point found by prior sampling."""


@dataclass(frozen=True)
class HmcConfig:
    warmup_iters: int
    sample_iters: int
    leapfrog_steps: int = 5
    thin: int = 1
    target_accept: float = 0.65
    mass_diag: Sequence[float] | None = None  # momentum covariance, identity if None
    seed: int = 0
    init_step_size: float | None = None  # None: bracket from 1.0 before warmup


@dataclass(frozen=True)
class Chain:
    names: list[str]
    draws: np.ndarray  # (kept, dim), constrained space
    accept_count: int
    proposal_count: int
    final_eps: float

    @property
    def acceptance_rate(self) -> float:
        if self.proposal_count == 0:
            return math.nan
        return self.accept_count / self.proposal_count


def _as_mass(mass_diag, dim: int) -> np.ndarray:
    if mass_diag is None:
        return np.ones(dim)
    m = np.asarray(mass_diag, dtype=np.float64)
    if m.shape != (dim,):
        raise ValueError(f"mass_diag must have shape ({dim},), got {m.shape}")
    if not np.all(m > 0.0):
        raise ValueError("mass_diag entries must be strictly positive")
    return m


def leapfrog_step(psi, phi, eps: float, grad: Callable, mass_diag=None):
    """One leapfrog step: half momentum, full position, half momentum."""
    if eps < 0.0:
        raise ValueError(f"step size must be nonnegative, got {eps}")
    psi = np.asarray(psi, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    inv_mass = 1.0 / _as_mass(mass_diag, len(psi))
    phi_half = phi + 0.5 * eps * np.asarray(grad(psi), dtype=np.float64)
    psi_new = psi + eps * inv_mass * phi_half
    phi_new = phi_half + 0.5 * eps * np.asarray(grad(psi_new), dtype=np.float64)
    return psi_new, phi_new


def leapfrogs(psi, phi, eps: float, steps: int, grad: Callable, mass_diag=None):
    """Compose ``steps`` leapfrog steps; zero steps returns the input."""
    if steps < 0:
        raise ValueError(f"step count must be nonnegative, got {steps}")
    psi = np.asarray(psi, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    for _ in range(steps):
        psi, phi = leapfrog_step(psi, phi, eps, grad, mass_diag)
    return psi, phi


# Dual averaging (Nesterov-style) toward the target acceptance rate.


@dataclass(frozen=True)
class DualAveragingState:
    mu: float
    log_eps: float
    log_eps_bar: float = 0.0
    h_bar: float = 0.0
    iter: int = 0
    target_accept: float = 0.65
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75


def dual_averaging_init(eps0: float, target_accept: float = 0.65) -> DualAveragingState:
    if eps0 <= 0.0:
        raise ValueError(f"initial step size must be positive, got {eps0}")
    return DualAveragingState(
        mu=math.log(10.0 * eps0), log_eps=math.log(eps0), target_accept=target_accept
    )


def adapt_step_size(da: DualAveragingState, accept_prob: float) -> DualAveragingState:
    if not 0.0 <= accept_prob <= 1.0:
        raise ValueError(f"acceptance probability must lie in [0, 1], got {accept_prob}")
    m = da.iter + 1
    eta = 1.0 / (m + da.t0)
    h_bar = (1.0 - eta) * da.h_bar + eta * (da.target_accept - accept_prob)
    log_eps = da.mu - math.sqrt(m) / da.gamma * h_bar
    w = m ** (-da.kappa)
    log_eps_bar = w * log_eps + (1.0 - w) * da.log_eps_bar
    return replace(da, log_eps=log_eps, log_eps_bar=log_eps_bar, h_bar=h_bar, iter=m)


# Core transition. The cached (logp, grad) of the current point ride
# along so each proposal costs exactly L density-and-gradient sweeps.


def _momentum(state: GenState, sqrt_mass: np.ndarray) -> tuple[GenState, np.ndarray]:
    phi = np.empty(len(sqrt_mass))
    for j in range(len(sqrt_mass)):
        state, z = rng.std_normal.run(state)
        phi[j] = sqrt_mass[j] * z
    return state, phi


def _propose(vag, psi, phi, grad, eps, steps, inv_mass):
    g = grad
    # Trajectories may overflow to inf/nan on purpose; the caller rejects
    # them, so keep numpy quiet about the intermediate arithmetic.
    with np.errstate(invalid="ignore", over="ignore"):
        for _ in range(steps):
            phi_half = phi + 0.5 * eps * g
            psi = psi + eps * inv_mass * phi_half
            logp, g = vag(psi)
            phi = phi_half + 0.5 * eps * g
    return psi, phi, logp, g


def _kinetic(phi: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.dot(phi * inv_mass, phi))


def _transition(vag, state, psi, logp, grad, eps, steps, sqrt_mass, inv_mass):
    """One MH-corrected trajectory. Returns (state, psi, logp, grad, accepted, accept_prob)."""
    if not math.isfinite(logp):
        raise RuntimeError(f"non-finite log density ({logp}) at the current state; chain is invalid")
    state, phi = _momentum(state, sqrt_mass)
    log_alpha = None
    try:
        psi1, phi1, logp1, grad1 = _propose(vag, psi, phi, grad, eps, steps, inv_mass)
        if math.isfinite(logp1):
            log_alpha = (logp1 - _kinetic(phi1, inv_mass)) - (logp - _kinetic(phi, inv_mass))
            if math.isnan(log_alpha):
                log_alpha = None
    except GraphDomainError:
        pass
    if log_alpha is None:  # off-support or overflowed proposal
        return state, psi, logp, grad, False, 0.0
    accept_prob = math.exp(min(0.0, log_alpha))
    state, u = rng.rand_double.run(state)
    log_u = math.log(u) if u > 0.0 else -math.inf
    if log_u < log_alpha:
        return state, psi1, logp1, grad1, True, accept_prob
    return state, psi, logp, grad, False, accept_prob


def hmc_step(psi, eps: float, steps: int, model: CompiledModel, state: GenState, mass_diag=None):
    """One transition from ``psi``; returns (state, psi', accepted)."""
    if steps < 1:
        raise ValueError(f"need at least one leapfrog step, got {steps}")
    psi = np.asarray(psi, dtype=np.float64)
    mass = _as_mass(mass_diag, model.dim)
    try:
        logp, grad = model.value_and_gradient(psi)
    except GraphDomainError as err:
        raise RuntimeError(f"current state is off-support: {err}") from err
    state, psi, _, _, accepted, _ = _transition(
        model.value_and_gradient, state, psi, logp, grad, eps, steps, np.sqrt(mass), 1.0 / mass
    )
    return state, psi, accepted


def _initial_point(model: CompiledModel, state: GenState, max_attempts: int = 100):
    for _ in range(max_attempts):
        try:
            state, psi = model.prior_draw_unconstrained(state)
        except ValueError:
            # a draw landed on its support's edge; nudge the stream and retry
            state = rng.lcg_step(state)
            continue
        try:
            logp = model.density(psi)
        except GraphDomainError:
            continue
        if math.isfinite(logp):
            return state, psi
    raise InitializationError(
        f"no finite-density starting point in {max_attempts} prior draws"
    )


def _initial_step_size(vag, psi, logp, grad, state, sqrt_mass, inv_mass):
    """Bracket a workable step size: from 1.0, double or halve until the
    one-step acceptance probability crosses 1/2."""
    state, phi = _momentum(state, sqrt_mass)
    h0 = logp - _kinetic(phi, inv_mass)

    def log_alpha(eps: float) -> float:
        try:
            _, phi1, logp1, _ = _propose(vag, psi, phi, grad, eps, 1, inv_mass)
        except GraphDomainError:
            return -math.inf
        if not math.isfinite(logp1):
            return -math.inf
        la = (logp1 - _kinetic(phi1, inv_mass)) - h0
        return -math.inf if math.isnan(la) else la

    threshold = math.log(0.5)
    eps = 1.0
    la = log_alpha(eps)
    if la > threshold:
        for _ in range(60):
            eps *= 2.0
            la = log_alpha(eps)
            if la <= threshold:
                break
    else:
        for _ in range(60):
            eps *= 0.5
            la = log_alpha(eps)
            if la > threshold:
                break
        else:
            raise InitializationError("no step size down to 1e-18 was accepted; target may be degenerate")
    return state, eps


def _validate(cfg: HmcConfig) -> None:
    if cfg.warmup_iters < 0:
        raise ValueError(f"warmup_iters must be nonnegative, got {cfg.warmup_iters}")
    if cfg.sample_iters < 0:
        raise ValueError(f"sample_iters must be nonnegative, got {cfg.sample_iters}")
    if cfg.leapfrog_steps < 1:
        raise ValueError(f"leapfrog_steps must be at least 1, got {cfg.leapfrog_steps}")
    if cfg.thin < 1:
        raise ValueError(f"thin must be at least 1, got {cfg.thin}")
    if not 0.0 < cfg.target_accept < 1.0:
        raise ValueError(f"target_accept must lie in (0, 1), got {cfg.target_accept}")
    if cfg.init_step_size is not None and cfg.init_step_size <= 0.0:
        raise ValueError(f"init_step_size must be positive, got {cfg.init_step_size}")


def sample(model: CompiledModel, cfg: HmcConfig) -> Chain:
    """Run one chain: prior init, warmup adaptation, thinned sampling."""
    _validate(cfg)
    mass = _as_mass(cfg.mass_diag, model.dim)
    sqrt_mass = np.sqrt(mass)
    inv_mass = 1.0 / mass
    vag = model.value_and_gradient

    state = int(cfg.seed)
    state, psi = _initial_point(model, state)
    logp, grad = vag(psi)

    if cfg.init_step_size is not None:
        eps0 = cfg.init_step_size
    else:
        state, eps0 = _initial_step_size(vag, psi, logp, grad, state, sqrt_mass, inv_mass)

    eps = eps0
    da = dual_averaging_init(eps0, cfg.target_accept)
    for _ in range(cfg.warmup_iters):
        state, psi, logp, grad, _, accept_prob = _transition(
            vag, state, psi, logp, grad, eps, cfg.leapfrog_steps, sqrt_mass, inv_mass
        )
        da = adapt_step_size(da, accept_prob)
        eps = math.exp(da.log_eps)
    eps = math.exp(da.log_eps_bar) if cfg.warmup_iters > 0 else eps0

    kept = []
    accept_count = 0
    for i in range(cfg.sample_iters):
        state, psi, logp, grad, accepted, _ = _transition(
            vag, state, psi, logp, grad, eps, cfg.leapfrog_steps, sqrt_mass, inv_mass
        )
        accept_count += accepted
        if (i + 1) % cfg.thin == 0:
            kept.append([e.support.constrain_value(float(psi[e.slot])) for e in model.entries])

    draws = np.asarray(kept, dtype=np.float64).reshape(len(kept), model.dim)
    return Chain(
        names=list(model.names),
        draws=draws,
        accept_count=accept_count,
        proposal_count=cfg.sample_iters,
        final_eps=eps,
    )
