"""Quantum-jump trajectories: detection of occupied sites at random times.

Between detections the state evolves under an effective non-Hermitian
Hamiltonian whose anti-Hermitian part is proportional to the conserved
total particle number, so the normalized evolution reduces to the plain
unitary flow.  A detection at site j sets <n_j> = 1 and applies a
rank-one update to the correlation matrix, after which the coefficient
matrix is rebuilt.
"""

from dataclasses import dataclass, field

import numpy as np

from .gaussian import (
    GaussianState,
    HoppingModel,
    correlation_matrix,
    entanglement_entropy,
    evolve_one_body,
    hermitize,
    neel_state,
    state_from_correlation,
)

TINY_TAU = 1e-12


def waiting_time(eta: float, gamma: float, n_particles: int) -> float:
    """Time to the next detection, tau = -ln(eta) / (gamma N).

    With jump operators sqrt(gamma) n_j and conserved total number N, the
    squared norm of the unnormalized state decays as exp(-gamma N tau);
    equating it to the uniform draw eta gives the closed form.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return -np.log(eta) / (gamma * n_particles)


def jump_probabilities(d: np.ndarray, n_particles: int) -> np.ndarray:
    """Born weights p_j = D_jj / N for the detected site."""
    p = np.asarray(np.diagonal(d).real / n_particles)
    if p.min() < -1e-9:
        raise FloatingPointError(f"negative jump probability {p.min()}")
    return p


def sample_site(probs: np.ndarray, draw: float) -> int:
    """First site whose cumulative probability reaches the uniform draw."""
    cum = np.cumsum(probs)
    j = int(np.searchsorted(cum, draw, side="left"))
    return min(j, len(probs) - 1)


def apply_jump(d: np.ndarray, j: int) -> np.ndarray:
    """Correlation-matrix update for a detection (<n_j> -> 1) at site j."""
    njj = d[j, j].real
    if njj <= 1e-12:
        raise ValueError(f"jump onto (numerically) empty site {j}")
    out = d - np.outer(d[:, j], d[j, :]) / njj
    out[j, :] = 0.0
    out[:, j] = 0.0
    out[j, j] = 1.0
    return hermitize(out)


@dataclass
class EventLog:
    """Columnar record of measurement events along one trajectory."""

    t: list = field(default_factory=list)
    site: list = field(default_factory=list)
    outcome: list = field(default_factory=list)       # PM only; -1 for jumps
    n_before: list = field(default_factory=list)
    ds_meas: list = field(default_factory=list)       # S across the measurement
    tau: list = field(default_factory=list)
    ds_between: list = field(default_factory=list)    # S across the preceding segment
    ds_between_rate: list = field(default_factory=list)
    in_window: list = field(default_factory=list)

    def append(self, t, site, outcome, n_before, ds_meas, tau, ds_between, rate, in_window):
        self.t.append(t)
        self.site.append(site)
        self.outcome.append(outcome)
        self.n_before.append(n_before)
        self.ds_meas.append(ds_meas)
        self.tau.append(tau)
        self.ds_between.append(ds_between)
        self.ds_between_rate.append(rate)
        self.in_window.append(in_window)

    def arrays(self) -> dict:
        return {
            "t": np.asarray(self.t),
            "site": np.asarray(self.site, dtype=int),
            "outcome": np.asarray(self.outcome, dtype=int),
            "n_before": np.asarray(self.n_before),
            "ds_meas": np.asarray(self.ds_meas),
            "tau": np.asarray(self.tau),
            "ds_between": np.asarray(self.ds_between),
            "ds_between_rate": np.asarray(self.ds_between_rate),
            "in_window": np.asarray(self.in_window, dtype=bool),
        }


@dataclass
class MonitoredTrajectory:
    events: dict                 # columnar arrays, see EventLog.arrays
    ee_t: np.ndarray
    ee: np.ndarray
    snapshots: list              # correlation matrices sampled in the window
    n_events: int
    tiny_tau_excluded: int


def run_jump_trajectory(
    model: HoppingModel,
    gamma: float,
    t_final: float,
    window,
    region,
    rng: np.random.Generator,
    record_events: bool = True,
    snapshot_dt: float = 0.0,
    initial: GaussianState | None = None,
) -> MonitoredTrajectory:
    state = neel_state(model.L) if initial is None else initial
    region = np.asarray(region, dtype=int)
    t_lo, t_hi = window
    n = state.n_particles

    log = EventLog()
    ee_t, ee, snapshots = [], [], []
    tiny = 0
    next_snapshot = t_lo if snapshot_dt > 0 else np.inf

    if gamma <= 0:
        state = evolve_one_body(state, model.generator(), t_final, eig=model.eig)
        return MonitoredTrajectory(log.arrays(), np.asarray(ee_t), np.asarray(ee), snapshots, 0, 0)

    s_seg_start = (
        entanglement_entropy(correlation_matrix(state), region) if record_events else 0.0
    )
    while True:
        eta = 1.0 - rng.uniform()  # uniform on (0, 1]
        tau = waiting_time(eta, gamma, n)
        if state.t + tau > t_final:
            break
        state = evolve_one_body(state, model.generator(), tau, eig=model.eig)
        d = correlation_matrix(state)

        while state.t >= next_snapshot:
            if state.t <= t_hi + 1e-9:
                snapshots.append(d.copy())
            next_snapshot += snapshot_dt

        if record_events:
            s_pre = entanglement_entropy(d, region)
            ds_between = s_pre - s_seg_start
            if tau > TINY_TAU:
                rate = ds_between / tau
            else:
                rate = np.nan
                tiny += 1

        site = sample_site(jump_probabilities(d, n), rng.uniform())
        n_before = d[site, site].real
        d = apply_jump(d, site)
        state = state_from_correlation(d, n, t=state.t)

        if record_events:
            s_post = entanglement_entropy(d, region)
            in_window = t_lo - 1e-9 <= state.t <= t_hi + 1e-9
            log.append(state.t, site, -1, n_before, s_post - s_pre,
                       tau, ds_between, rate, in_window)
            ee_t.append(state.t)
            ee.append(s_post)
            s_seg_start = s_post

    return MonitoredTrajectory(
        log.arrays(), np.asarray(ee_t), np.asarray(ee), snapshots, len(log.t), tiny
    )
