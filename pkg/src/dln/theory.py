"""Independent oracles for the training dynamics of spectrally-seeded nets.

Under full observation with spectral initialization and a uniform step size,
the compressed network's end-to-end matrix stays diagonal in the surrogate's
singular frame, and every singular value follows a scalar recursion: the top
r values chase their targets while the remaining r_hat - r ones decay. This
module implements that recursion, a checker that replays it against a real
training log, the spectral lower bound used to compare recovery errors, and
the continuous-time (gradient-flow) limit of the singular-value dynamics as
an RK4 integrator.

None of this code shares state with the trainer: it recomputes trajectories
from scratch, which is what makes it usable as an oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError, DivergenceError, NumericalError
from .linalg import Matrix
from .trainer import TrajectoryLog


@dataclass(frozen=True)
class RecursionParams:
    L: int
    eta: float
    eps: float
    sigma_star: np.ndarray  # descending targets for the top components

    def __post_init__(self):
        s = np.asarray(self.sigma_star, dtype=np.float64).ravel()
        if self.L < 2:
            raise ContractViolationError("need depth >= 2")
        if not (self.eta > 0 and self.eps > 0):
            raise ContractViolationError("eta and eps must be positive")
        if s.size and np.any(np.diff(s) > 0):
            raise ContractViolationError("targets must be sorted descending")
        object.__setattr__(self, "sigma_star", s)

    @property
    def r(self) -> int:
        return self.sigma_star.size


@dataclass(frozen=True)
class RecursionState:
    """Per-factor scalars: lam_i for the fitted components, beta for the rest."""

    lam: np.ndarray
    beta: float
    t: int
    params: RecursionParams


def initial_state(params: RecursionParams) -> RecursionState:
    return RecursionState(
        lam=np.full(params.r, params.eps), beta=params.eps, t=0, params=params
    )


def recursion_step(state: RecursionState) -> RecursionState:
    """One exact step of the diagonal training recursion.

    lam_i <- lam_i * (1 - eta * (lam_i^L - sigma*_i) * lam_i^(L-2))
    beta  <- beta  * (1 - eta * beta^(2(L-1)))
    """
    p = state.params
    lam = state.lam
    beta = np.float64(state.beta)
    with np.errstate(over="ignore", invalid="ignore"):
        new_lam = lam * (1.0 - p.eta * (lam ** p.L - p.sigma_star) * lam ** (p.L - 2))
        new_beta = float(beta * (1.0 - p.eta * beta ** (2 * (p.L - 1))))
    if not (np.all(np.isfinite(new_lam)) and np.isfinite(new_beta)):
        raise DivergenceError(state.t + 1, float(np.max(np.abs(lam))))
    return RecursionState(lam=new_lam, beta=new_beta, t=state.t + 1, params=p)


def implied_singular_values(state: RecursionState, r_hat: int) -> np.ndarray:
    """End-to-end spectrum the recursion predicts: lam_i^L then beta^L tail."""
    p = state.params
    if r_hat < p.r:
        raise ContractViolationError(f"r_hat {r_hat} smaller than tracked components {p.r}")
    return np.concatenate(
        [state.lam ** p.L, np.full(r_hat - p.r, state.beta ** p.L)]
    )


def run_recursion(params: RecursionParams, iters: int) -> list[RecursionState]:
    states = [initial_state(params)]
    for _ in range(iters):
        states.append(recursion_step(states[-1]))
    return states


def stable_step_bound(sigma_max: float, L: int, alpha: float = 1.0) -> float:
    """Largest eta for which the converged recursion is locally stable.

    Linearizing the mixed-rate scalar dynamics at the fixed point gives the
    contraction factor 1 - eta * L * alpha^(2/L) * sigma^(2-2/L); this returns
    the eta where that factor hits -1. A heuristic for real runs, exact for
    the diagonal dynamics.
    """
    if sigma_max <= 0:
        raise ContractViolationError("sigma_max must be positive")
    return 2.0 / (L * alpha ** (2.0 / L) * sigma_max ** (2.0 - 2.0 / L))


@dataclass
class OracleReport:
    max_rel_dev: float
    first_fail_iter: int | None
    passed: bool
    tol: float

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps(
            {
                "max_rel_dev": self.max_rel_dev,
                "first_fail_iter": self.first_fail_iter,
                "pass": self.passed,
                "tol": self.tol,
            },
            sort_keys=True,
        )
        if path is not None:
            Path(path).write_text(payload + "\n")
        return payload


def verify_against_training(
    log: TrajectoryLog, state0: RecursionState, r_hat: int, tol: float = 1e-6
) -> OracleReport:
    """Replay the recursion and compare with logged singular values.

    The log must come from a full-observation run of a spectrally-initialized
    compressed network trained with a uniform rate matching ``state0.params``.
    Compares as many leading values as the log carries (at most r_hat).
    """
    if state0.t != 0:
        raise ContractViolationError("verification must start from the t=0 state")
    if log.top_k > r_hat:
        raise ContractViolationError(
            f"log tracks {log.top_k} values but the recursion only implies {r_hat}"
        )
    if not log.records:
        raise ContractViolationError("empty trajectory")
    k = log.top_k
    max_dev = 0.0
    first_fail = None
    state = state0
    for rec in log.records:
        while state.t < rec.t:
            state = recursion_step(state)
        expected = implied_singular_values(state, r_hat)[:k]
        dev = float(np.max(np.abs(rec.svals - expected) / expected))
        if dev > max_dev:
            max_dev = dev
        if dev > tol and first_fail is None:
            first_fail = rec.t
    return OracleReport(max_rel_dev=max_dev, first_fail_iter=first_fail,
                        passed=first_fail is None, tol=tol)


def spectral_lower_bound(A: Matrix, B: Matrix) -> tuple[float, float]:
    """(||A-B||_F^2, ||sigma(A)-sigma(B)||^2); the first dominates the second."""
    if A.shape != B.shape:
        raise ContractViolationError(f"shape mismatch {A.shape} vs {B.shape}")
    lhs = float(np.sum((A - B) ** 2))
    sa = np.linalg.svd(A, compute_uv=False)
    sb = np.linalg.svd(B, compute_uv=False)
    rhs = float(np.sum((sa - sb) ** 2))
    return lhs, rhs


@dataclass(frozen=True)
class FlowParams:
    L: int
    sigma_star: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma_star, dtype=np.float64).ravel()
        if self.L < 2:
            raise ContractViolationError("need depth >= 2")
        object.__setattr__(self, "sigma_star", s)


@dataclass(frozen=True)
class FlowState:
    sigma: np.ndarray
    time: float
    params: FlowParams

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64).ravel()
        if s.size != self.params.sigma_star.size:
            raise ContractViolationError("state and targets differ in length")
        if np.any(s < 0):
            raise ContractViolationError("singular values must be nonnegative")
        object.__setattr__(self, "sigma", s)


@dataclass
class FlowSeries:
    """Flow trajectory sampled on a uniform time grid."""

    times: np.ndarray
    sigmas: np.ndarray  # (n_samples, k)
    params: FlowParams


def default_flow_dt(params: FlowParams, base: float = 1e-3) -> float:
    smax = float(np.max(params.sigma_star)) if params.sigma_star.size else 1.0
    smax = max(smax, 1e-12)
    return base * smax ** (-(1.0 - 2.0 / params.L))


def _flow_rhs(sigma: np.ndarray, params: FlowParams, active: np.ndarray | None) -> np.ndarray:
    s = np.maximum(sigma, 0.0)
    rhs = -params.L * s ** (2.0 - 2.0 / params.L) * (s - params.sigma_star)
    if active is not None:
        rhs = rhs * active
    return rhs


def _rk4_step(sigma: np.ndarray, dt: float, params: FlowParams,
              active: np.ndarray | None = None) -> np.ndarray:
    k1 = _flow_rhs(sigma, params, active)
    k2 = _flow_rhs(sigma + 0.5 * dt * k1, params, active)
    k3 = _flow_rhs(sigma + 0.5 * dt * k2, params, active)
    k4 = _flow_rhs(sigma + dt * k3, params, active)
    new = sigma + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise NumericalError("flow integration produced non-finite values")
    scale = max(float(np.max(params.sigma_star, initial=0.0)), float(np.max(sigma, initial=0.0)), 1.0)
    if np.any(new < -1e-9 * scale):
        raise NumericalError("flow integration stepped significantly below zero; reduce dt")
    return np.maximum(new, 0.0)


def flow_integrate(state: FlowState, duration: float, dt: float) -> FlowState:
    """RK4 integration of sigma_i' = -L * sigma_i^(2-2/L) * (sigma_i - sigma*_i)."""
    if dt <= 0 or duration < 0:
        raise ContractViolationError("need dt > 0 and duration >= 0")
    steps = int(round(duration / dt))
    sigma = state.sigma.copy()
    for _ in range(steps):
        sigma = _rk4_step(sigma, dt, state.params)
    return FlowState(sigma=sigma, time=state.time + steps * dt, params=state.params)


def flow_series(state: FlowState, duration: float, dt: float,
                sample_every: int = 1) -> FlowSeries:
    if dt <= 0 or sample_every < 1:
        raise ContractViolationError("need dt > 0 and sample_every >= 1")
    steps = int(round(duration / dt))
    sigma = state.sigma.copy()
    times = [state.time]
    samples = [sigma.copy()]
    for n in range(1, steps + 1):
        sigma = _rk4_step(sigma, dt, state.params)
        if n % sample_every == 0 or n == steps:
            times.append(state.time + n * dt)
            samples.append(sigma.copy())
    return FlowSeries(np.array(times), np.vstack(samples), state.params)


def gated_flow_series(state: FlowState, duration: float, dt: float,
                      sample_every: int = 1, gate_rel_tol: float = 1e-2) -> FlowSeries:
    """Flow where component i is frozen until component i-1 has been fitted.

    Models the sequential (one component at a time) fitting pattern: a mode
    activates only once the previous mode sits within ``gate_rel_tol``
    (relative) of its target. Component 1 is active from the start.
    """
    if dt <= 0 or sample_every < 1:
        raise ContractViolationError("need dt > 0 and sample_every >= 1")
    params = state.params
    k = params.sigma_star.size
    steps = int(round(duration / dt))
    sigma = state.sigma.copy()
    active = np.zeros(k)
    if k:
        active[0] = 1.0
    times = [state.time]
    samples = [sigma.copy()]
    for n in range(1, steps + 1):
        fitted = np.abs(sigma - params.sigma_star) <= gate_rel_tol * np.abs(params.sigma_star)
        for i in range(1, k):
            if active[i] == 0.0 and active[i - 1] == 1.0 and fitted[i - 1]:
                active[i] = 1.0
        sigma = _rk4_step(sigma, dt, params, active)
        if n % sample_every == 0 or n == steps:
            times.append(state.time + n * dt)
            samples.append(sigma.copy())
    return FlowSeries(np.array(times), np.vstack(samples), params)


def dominance_witness(flow_a: FlowSeries, flow_b: FlowSeries, tol: float = 1e-9) -> bool:
    """True iff flow B is at least as close to the targets as flow A, always.

    Both series must share the time grid and the targets. Checks
    |sigma_i^B - sigma*_i| <= |sigma_i^A - sigma*_i| + tol at every sample.
    """
    if flow_a.times.shape != flow_b.times.shape or not np.allclose(flow_a.times, flow_b.times):
        raise ContractViolationError("flow series are sampled on different time grids")
    if not np.array_equal(flow_a.params.sigma_star, flow_b.params.sigma_star):
        raise ContractViolationError("flow series have different targets")
    targets = flow_a.params.sigma_star
    dev_a = np.abs(flow_a.sigmas - targets)
    dev_b = np.abs(flow_b.sigmas - targets)
    return bool(np.all(dev_b <= dev_a + tol))


def fit_times(series: FlowSeries, rel_tol: float = 1e-2) -> list[float | None]:
    """First sampled time each component stays within rel_tol of its target."""
    targets = series.params.sigma_star
    out: list[float | None] = []
    for i, s in enumerate(targets):
        ok = np.abs(series.sigmas[:, i] - s) <= rel_tol * abs(s)
        good_from = None
        for n in range(len(ok) - 1, -1, -1):
            if not ok[n]:
                break
            good_from = n
        out.append(None if good_from is None else float(series.times[good_from]))
    return out
