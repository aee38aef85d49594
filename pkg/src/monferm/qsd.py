"""Diffusive (homodyne-style) weak-measurement trajectories.

Each time step applies exp(A dt) to the coefficient matrix, where
A = -i H + diag(dW_i/dt + (2 n_i - 1) gamma) mixes the hopping dynamics
with site-local Gaussian noise and an occupation feedback term, followed
by QR renormalization.  The entropy-change rate of the half-chain is
recorded at every step inside the collection window.
"""

from dataclasses import dataclass

import numpy as np

from .gaussian import (
    GaussianState,
    HoppingModel,
    correlation_matrix,
    entanglement_entropy,
    orthonormality_defect,
    orthonormalize,
    projector_defect,
    trace_defect,
    _rk4,
)
from scipy.linalg import expm


@dataclass
class QsdParams:
    """Monitoring strength and time step of the diffusive unraveling."""

    gamma: float
    dt: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.1:
            raise ValueError(f"dt must lie in (0, 0.1], got {self.dt}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    def noise_scale(self) -> float:
        return np.sqrt(self.gamma * self.dt)


def qsd_generator(hopping: np.ndarray, params: QsdParams, occupations: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """One-step generator A = -iH + diag(dW/dt + (2<n>-1) gamma)."""
    a = -1j * hopping.astype(complex)
    diag = noise / params.dt + (2.0 * occupations - 1.0) * params.gamma
    a[np.diag_indices_from(a)] += diag
    return a


def qsd_step(
    state: GaussianState,
    hopping: np.ndarray,
    params: QsdParams,
    noise: np.ndarray,
    method: str = "rk4",
) -> GaussianState:
    """Advance one time step; occupations are read once before the step."""
    occ = np.einsum("ij,ij->i", state.u.conj(), state.u).real
    a = qsd_generator(hopping, params, occ, noise)
    if method == "rk4":
        u = _rk4(state.u, a, params.dt)
    elif method == "expm":
        u = expm(a * params.dt) @ state.u
    else:
        raise ValueError(f"unknown QSD step method {method!r}")
    return GaussianState(u=orthonormalize(u), t=state.t + params.dt)


@dataclass
class QsdTrajectory:
    """Per-step records of one diffusive trajectory."""

    record_t: np.ndarray       # times of in-window entropy-rate samples
    ds_rate: np.ndarray        # (S(t+dt) - S(t)) / dt inside the window
    ee_t: np.ndarray           # strided entropy sample times
    ee: np.ndarray             # strided S_A values
    n_steps: int
    invariant_checks: int


def run_qsd_trajectory(
    model: HoppingModel,
    params: QsdParams,
    t_final: float,
    window,
    region,
    rng: np.random.Generator,
    ee_stride: int = 4,
    check_every: int = 200,
    method: str = "rk4",
    initial: GaussianState | None = None,
) -> QsdTrajectory:
    from .gaussian import neel_state

    state = neel_state(model.L) if initial is None else initial
    region = np.asarray(region, dtype=int)
    t_lo, t_hi = window
    scale = params.noise_scale()

    n_steps = int(round(t_final / params.dt))
    ee_t = [state.t]
    ee = [entanglement_entropy(correlation_matrix(state), region)]
    rec_t, rates = [], []
    s_prev = None  # S_A at the current state, when known
    checks = 0

    for step in range(n_steps):
        in_window = t_lo - 1e-9 <= state.t and state.t + params.dt <= t_hi + 1e-9
        if in_window and s_prev is None:
            s_prev = entanglement_entropy(correlation_matrix(state), region)
        noise = rng.normal(0.0, scale, size=model.L)
        state = qsd_step(state, model.matrix, params, noise, method=method)
        strided = (step + 1) % ee_stride == 0
        s_now = None
        if in_window or strided:
            s_now = entanglement_entropy(correlation_matrix(state), region)
        if in_window:
            rec_t.append(state.t)
            rates.append((s_now - s_prev) / params.dt)
        if strided:
            ee_t.append(state.t)
            ee.append(s_now)
        s_prev = s_now
        if (step + 1) % check_every == 0:
            _check_invariants(state, model.L // 2)
            checks += 1

    return QsdTrajectory(
        record_t=np.asarray(rec_t),
        ds_rate=np.asarray(rates),
        ee_t=np.asarray(ee_t),
        ee=np.asarray(ee),
        n_steps=n_steps,
        invariant_checks=checks,
    )


def _check_invariants(state: GaussianState, n_particles: int):
    if orthonormality_defect(state.u) > 1e-10:
        raise FloatingPointError("orthonormality lost during QSD evolution")
    d = correlation_matrix(state)
    if projector_defect(d) > 1e-8:
        raise FloatingPointError("correlation matrix drifted off the projector manifold")
    if trace_defect(d, n_particles) > 1e-8:
        raise FloatingPointError("particle number not conserved")
