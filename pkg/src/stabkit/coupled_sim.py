"""Integration of the coupled plant/controller system and empirical
classification of the resulting trajectories.

Three coupling modes are supported:

* ``expert-oracle``: the plant is driven by the deterministic expert
  u = -K e recomputed every step (a closed-form reference).
* ``per-step``: one denoising update per plant step, warm-starting from the
  previous action; controller and plant evolve at the same time scale.
* ``inner-loop``: the denoising process runs to completion against a frozen
  plant state each step (re-initialized from noise, or zero when
  deterministic), then the plant advances under the resulting action.

Integration is explicit Euler (Euler-Maruyama when stochastic) with fixed
step dt. Per-step coupling advances the plant with the pre-update action so
the two updates commute to O(dt^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import matrixkit
from .diffusion_controller import DiffusionParams, RngStream, full_denoise
from .errors import DimensionError, ParameterError
from .plant import ExpertPolicy, PlantModel

# A recorded state or action norm beyond BLOWUP_FACTOR * (1 + |e0|) declares
# divergence; non-finite values are flagged the same way rather than thrown.
BLOWUP_FACTOR = 1e9

# Fitted log-norm slopes within this band of zero are classified "marginal".
RATE_DEADBAND = 0.02

# Samples with joint norm below this are excluded from the decay-rate fit.
_NORM_FLOOR = 1e-300

_MIN_STEPS = 10


class CouplingMode(str, Enum):
    EXPERT_ORACLE = "expert-oracle"
    PER_STEP = "per-step"
    INNER_LOOP = "inner-loop"


@dataclass(frozen=True)
class CouplingConfig:
    """How controller and plant dynamics interleave during one rollout.

    u0 seeds the per-step warm start; the expert-oracle and inner-loop modes
    ignore it dynamically but still record it at t = 0.
    """

    mode: CouplingMode
    dt: float
    horizon: float
    e0: np.ndarray
    u0: np.ndarray
    seed: int = 0
    record_stride: int = 1
    dt_inner: float | None = None

    def __post_init__(self):
        mode = CouplingMode(self.mode)
        object.__setattr__(self, "mode", mode)
        if not (self.dt > 0.0):
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not (self.horizon > 0.0):
            raise ParameterError(f"horizon must be > 0, got {self.horizon}")
        if self.n_steps < _MIN_STEPS:
            raise ParameterError(
                f"horizon/dt = {self.horizon / self.dt:.3g} gives fewer than "
                f"{_MIN_STEPS} steps; such runs are unclassifiable"
            )
        if self.record_stride < 1:
            raise ParameterError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.dt_inner is not None and not (self.dt_inner > 0.0):
            raise ParameterError(f"dt_inner must be > 0, got {self.dt_inner}")
        object.__setattr__(self, "e0", matrixkit.as_vector(self.e0, "e0"))
        object.__setattr__(self, "u0", matrixkit.as_vector(self.u0, "u0"))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Recorded rollout: times, error states (S x N), actions (S x M)."""

    times: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    config: CouplingConfig
    diverged: bool

    def __len__(self) -> int:
        return self.times.shape[0]

    def joint_norms(self) -> np.ndarray:
        """Euclidean norm of the stacked (e, u) vector per sample."""
        return np.sqrt(
            np.sum(self.states * self.states, axis=1)
            + np.sum(self.actions * self.actions, axis=1)
        )


@dataclass(frozen=True)
class EmpiricalVerdict:
    """Fitted exponential rate of the joint norm and its classification."""

    rate: float
    label: str
    residual: float


@dataclass(frozen=True)
class ComparisonReport:
    per_step: EmpiricalVerdict
    inner_loop: EmpiricalVerdict
    terminal_gap: float


def _validate_dims(plant: PlantModel, policy: ExpertPolicy, config: CouplingConfig):
    n, m = plant.n_states, plant.n_inputs
    if policy.n_states != n or policy.n_actions != m:
        raise DimensionError(
            f"policy K is {policy.n_actions}x{policy.n_states}, plant expects "
            f"{m}x{n}"
        )
    if config.e0.shape[0] != n:
        raise DimensionError(f"e0 has length {config.e0.shape[0]}, plant expects {n}")
    if config.u0.shape[0] != m:
        raise DimensionError(f"u0 has length {config.u0.shape[0]}, plant expects {m}")


def simulate(
    plant: PlantModel,
    policy: ExpertPolicy,
    diffusion: DiffusionParams,
    config: CouplingConfig,
) -> Trajectory:
    """Roll out the coupled system and record every ``record_stride``-th step.

    The first sample is (e0, u0) at t = 0 and the final step is always
    recorded. Divergence (a recorded norm beyond the blow-up bound, or a
    non-finite value) stops the run early with ``diverged=True``.
    """
    _validate_dims(plant, policy, config)
    if diffusion.drift is not None and diffusion.drift.shape[0] != plant.n_inputs:
        raise DimensionError(
            f"drift has length {diffusion.drift.shape[0]}, plant expects "
            f"{plant.n_inputs}"
        )
    scalar = (
        plant.n_states == 1
        and plant.n_inputs == 1
        and not diffusion.stochastic
    )
    if scalar:
        times, states, actions, diverged = _run_scalar(plant, policy, diffusion, config)
    else:
        times, states, actions, diverged = _run_generic(plant, policy, diffusion, config)
    return Trajectory(
        times=np.array(times, dtype=float),
        states=np.array(states, dtype=float),
        actions=np.array(actions, dtype=float),
        config=config,
        diverged=diverged,
    )


def _run_generic(plant, policy, diffusion, config):
    n, m = plant.n_states, plant.n_inputs
    dt = config.dt
    steps = config.n_steps
    stride = config.record_stride
    mode = config.mode
    rng = RngStream(config.seed)
    blow = BLOWUP_FACTOR * (1.0 + float(np.linalg.norm(config.e0)))

    a_mat, b_mat, k_mat = plant.A, plant.B, policy.K
    gain = diffusion.g * diffusion.g * diffusion.alpha
    sigma_inv = matrixkit.invert(policy.Sigma)
    drift = diffusion.drift if diffusion.drift is not None else np.zeros(m)
    noise_scale = math.sqrt(diffusion.alpha) * diffusion.g * math.sqrt(dt)
    dt_inner = (
        config.dt_inner
        if config.dt_inner is not None
        else dt * diffusion.alpha / diffusion.inner_steps
    )

    # Per-step coupling is affine in the joint state z = (e, u): one matrix
    # apply per step keeps long rollouts cheap while matching the pre-update
    # action ordering exactly.
    if mode is CouplingMode.PER_STEP:
        step_mat = np.block(
            [
                [np.eye(n) + dt * a_mat, dt * b_mat],
                [-dt * gain * (sigma_inv @ k_mat), np.eye(m) - dt * gain * sigma_inv],
            ]
        )
        step_off = np.concatenate([np.zeros(n), dt * drift])
        z = np.concatenate([config.e0, config.u0])
    e = config.e0.copy()
    u = config.u0.copy()

    times = [0.0]
    states = [config.e0.copy()]
    actions = [config.u0.copy()]
    diverged = False

    for k in range(1, steps + 1):
        if mode is CouplingMode.EXPERT_ORACLE:
            u = -(k_mat @ e)
            e = e + dt * (a_mat @ e + b_mat @ u)
        elif mode is CouplingMode.PER_STEP:
            z = step_mat @ z + step_off
            if diffusion.stochastic:
                z[n:] += noise_scale * rng.standard_normal(m)
        else:  # inner loop
            u = full_denoise(policy, diffusion, e, dt_inner, rng)
            e = e + dt * (a_mat @ e + b_mat @ u)

        if k % stride == 0 or k == steps:
            if mode is CouplingMode.PER_STEP:
                e, u = z[:n].copy(), z[n:].copy()
            t = k * dt
            times.append(t)
            states.append(np.array(e, dtype=float, copy=True))
            actions.append(np.array(u, dtype=float, copy=True))
            finite = bool(np.all(np.isfinite(e)) and np.all(np.isfinite(u)))
            if not finite or np.linalg.norm(e) > blow or np.linalg.norm(u) > blow:
                diverged = True
                break
    return times, states, actions, diverged


def _run_scalar(plant, policy, diffusion, config):
    """Deterministic 1D fast path: identical semantics, plain float loops."""
    dt = config.dt
    steps = config.n_steps
    stride = config.record_stride
    mode = config.mode

    a = float(plant.A[0, 0])
    b = float(plant.B[0, 0])
    kf = float(policy.K[0, 0])
    sinv = 1.0 / float(policy.Sigma[0, 0])
    gain = diffusion.g * diffusion.g * diffusion.alpha
    c = float(diffusion.drift[0]) if diffusion.drift is not None else 0.0
    e = float(config.e0[0])
    u = float(config.u0[0])
    blow = BLOWUP_FACTOR * (1.0 + abs(e))

    times = [0.0]
    states = [[e]]
    actions = [[u]]
    diverged = False

    if mode is CouplingMode.PER_STEP:
        m11 = 1.0 + dt * a
        m12 = dt * b
        m21 = -dt * gain * sinv * kf
        m22 = 1.0 - dt * gain * sinv
        w2 = dt * c
    elif mode is CouplingMode.INNER_LOOP:
        dt_inner = (
            config.dt_inner
            if config.dt_inner is not None
            else dt * diffusion.alpha / diffusion.inner_steps
        )
        dt_equiv = dt_inner / diffusion.alpha
        p_uu = 1.0 - dt_equiv * gain * sinv
        p_ue = -dt_equiv * gain * sinv * kf
        p_c = dt_equiv * c
        inner_steps = diffusion.inner_steps

    for k in range(1, steps + 1):
        if mode is CouplingMode.EXPERT_ORACLE:
            u = -kf * e
            e = e + dt * (a * e + b * u)
        elif mode is CouplingMode.PER_STEP:
            e, u = m11 * e + m12 * u, m21 * e + m22 * u + w2
        else:
            u = 0.0
            for _ in range(inner_steps):
                u = p_uu * u + p_ue * e + p_c
            e = e + dt * (a * e + b * u)

        if k % stride == 0 or k == steps:
            times.append(k * dt)
            states.append([e])
            actions.append([u])
            if not (math.isfinite(e) and math.isfinite(u)) or abs(e) > blow or abs(u) > blow:
                diverged = True
                break
    return times, states, actions, diverged


def classify_empirical(
    traj: Trajectory, rate_deadband: float = RATE_DEADBAND
) -> EmpiricalVerdict:
    """Classify a rollout by the least-squares slope of log|(e, u)| over the
    trailing half of its samples.

    Diverged trajectories short-circuit to unstable with rate = +inf.
    Trajectories whose trailing norms all sit below the fit floor (including
    the all-zero trajectory) are stable with rate = -inf.
    """
    if traj.diverged:
        return EmpiricalVerdict(rate=math.inf, label="unstable", residual=0.0)
    n_samples = len(traj)
    if n_samples < _MIN_STEPS:
        raise ParameterError(
            f"classification needs at least {_MIN_STEPS} recorded samples, "
            f"got {n_samples}"
        )
    norms = traj.joint_norms()
    start = n_samples // 2
    t_tail = traj.times[start:]
    n_tail = norms[start:]
    usable = n_tail >= _NORM_FLOOR
    if int(usable.sum()) < 2:
        return EmpiricalVerdict(rate=-math.inf, label="stable", residual=0.0)
    t_fit = t_tail[usable]
    y_fit = np.log(n_tail[usable])
    t_mean = float(t_fit.mean())
    y_mean = float(y_fit.mean())
    t_var = float(np.sum((t_fit - t_mean) ** 2))
    slope = float(np.sum((t_fit - t_mean) * (y_fit - y_mean)) / t_var)
    resid = y_fit - (y_mean + slope * (t_fit - t_mean))
    residual = float(np.sqrt(np.mean(resid * resid)))
    if slope < -rate_deadband:
        label = "stable"
    elif slope > rate_deadband:
        label = "unstable"
    else:
        label = "marginal"
    return EmpiricalVerdict(rate=slope, label=label, residual=residual)


def full_vs_partial_compare(
    plant: PlantModel,
    policy: ExpertPolicy,
    diffusion: DiffusionParams,
    config: CouplingConfig,
) -> ComparisonReport:
    """Run per-step and inner-loop coupling with identical seeds and
    parameters; report both verdicts and the terminal-state gap."""
    traj_ps = simulate(plant, policy, diffusion, replace(config, mode=CouplingMode.PER_STEP))
    traj_il = simulate(plant, policy, diffusion, replace(config, mode=CouplingMode.INNER_LOOP))
    gap = float(np.linalg.norm(traj_ps.states[-1] - traj_il.states[-1]))
    return ComparisonReport(
        per_step=classify_empirical(traj_ps),
        inner_loop=classify_empirical(traj_il),
        terminal_gap=gap,
    )


def trajectory_to_csv(traj: Trajectory) -> str:
    """Serialize a trajectory: header ``t,e_1..e_N,u_1..u_M``, one row per
    recorded sample, 17 significant digits (float round-trip)."""
    n = traj.states.shape[1]
    m = traj.actions.shape[1]
    header = ",".join(
        ["t"] + [f"e_{i + 1}" for i in range(n)] + [f"u_{j + 1}" for j in range(m)]
    )
    lines = [header]
    for i in range(len(traj)):
        row = [traj.times[i]] + list(traj.states[i]) + list(traj.actions[i])
        lines.append(",".join(f"{value:.17g}" for value in row))
    return "\n".join(lines) + "\n"
