"""Projective occupation measurements at Poisson-distributed times.

Between measurements the chain evolves unitarily.  At each measurement a
site is chosen uniformly, the outcome (0 or 1) is Born-sampled from the
local occupation, and the correlation matrix is projected accordingly.
Waiting times reuse the quantum-jump closed form.
"""

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
from .jumps import (
    TINY_TAU,
    EventLog,
    MonitoredTrajectory,
    apply_jump,
    waiting_time,
)


def sample_site_uniform(L: int, rng: np.random.Generator) -> int:
    return int(rng.integers(L))


def sample_outcome(n_jj: float, draw: float) -> int:
    """Outcome 1 iff the occupation reaches the uniform draw (P(1) = n_jj)."""
    if not -1e-9 <= n_jj <= 1 + 1e-9:
        raise ValueError(f"occupation {n_jj} out of range")
    return 1 if n_jj >= draw else 0


def apply_projection(d: np.ndarray, j: int, outcome: int) -> np.ndarray:
    """Project the correlation matrix onto <n_j> = outcome.

    For outcome 0 the rank-one correction enters with a plus sign: with
    P0 = 1 - n_j, Wick contraction of <P0 c_i^dag c_i' P0> / (1 - n_jj)
    gives D + D[:,j] D[j,:] / (1 - n_jj) off site j.  The two-site
    single-particle case (uniform D, measure one site empty) lands on
    diag(0, 1) only with this sign.
    """
    njj = d[j, j].real
    if outcome == 1:
        return apply_jump(d, j)
    if outcome != 0:
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    if njj >= 1 - 1e-12:
        raise ValueError(f"projecting a (numerically) filled site {j} onto 0")
    out = d + np.outer(d[:, j], d[j, :]) / (1.0 - njj)
    out[j, :] = 0.0
    out[:, j] = 0.0
    return hermitize(out)


def run_projective_trajectory(
    model: HoppingModel,
    gamma: float,
    t_final: float,
    window,
    region,
    rng: np.random.Generator,
    record_events: bool = True,
    snapshot_dt: float = 0.0,
    propagator: str = "spectral",
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
    eig = model.eig if propagator == "spectral" else None

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
        state = evolve_one_body(state, model.generator(), tau, method=propagator, eig=eig)
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

        site = sample_site_uniform(model.L, rng)
        n_before = d[site, site].real
        outcome = sample_outcome(n_before, rng.uniform())
        d = apply_projection(d, site, outcome)
        state = state_from_correlation(d, n, t=state.t)

        if record_events:
            s_post = entanglement_entropy(d, region)
            in_window = t_lo - 1e-9 <= state.t <= t_hi + 1e-9
            log.append(state.t, site, outcome, n_before, s_post - s_pre,
                       tau, ds_between, rate, in_window)
            ee_t.append(state.t)
            ee.append(s_post)
            s_seg_start = s_post

    return MonitoredTrajectory(
        log.arrays(), np.asarray(ee_t), np.asarray(ee), snapshots, len(log.t), tiny
    )
