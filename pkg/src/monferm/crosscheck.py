"""Lockstep equivalence runs: Gaussian formalism vs exact Fock evolution.

Both representations consume the same random draws and apply the exact
image of the same update at every event, so agreement is limited only by
floating-point error.  Small chains only.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import fock
from .gaussian import (
    GaussianState,
    HoppingModel,
    correlation_matrix,
    entanglement_entropy,
    evolve_one_body,
    half_chain,
    neel_state,
    orthonormalize,
    state_from_correlation,
)
from .jumps import apply_jump, jump_probabilities, sample_site, waiting_time
from .projective import apply_projection, sample_outcome, sample_site_uniform
from .qsd import QsdParams, qsd_generator


@dataclass
class LockstepReport:
    protocol: str
    n_events: int
    max_d_error: float
    max_s_error: float

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_d_error < tol and self.max_s_error < tol


def _compare(state: GaussianState, fstate: fock.FockState, region) -> tuple:
    d_g = correlation_matrix(state)
    d_f = fock.fock_correlation(fstate)
    s_g = entanglement_entropy(d_g, region)
    s_f = fock.fock_entropy(fstate, region)
    return float(np.abs(d_g - d_f).max()), abs(s_g - s_f)


def lockstep_qsd(L: int, gamma: float, n_events: int, seed: int, dt: float = 0.05) -> LockstepReport:
    model = HoppingModel(L)
    params = QsdParams(gamma, dt)
    region = half_chain(L)
    rng = np.random.default_rng(seed)

    state = neel_state(L)
    fstate = fock.fock_from_gaussian(state.u)
    d_err = s_err = 0.0
    for _ in range(n_events):
        occ = np.einsum("ij,ij->i", state.u.conj(), state.u).real
        noise = rng.normal(0.0, params.noise_scale(), size=L)
        a = qsd_generator(model.matrix, params, occ, noise)
        # exact exponential on both sides so the comparison is exact
        state = GaussianState(orthonormalize(expm(a * dt) @ state.u), state.t + dt)
        fstate = fock.fock_apply_exponential(fstate, a, scale=dt)
        de, se = _compare(state, fstate, region)
        d_err, s_err = max(d_err, de), max(s_err, se)
    return LockstepReport("qsd", n_events, d_err, s_err)


def lockstep_jumps(L: int, gamma: float, n_events: int, seed: int) -> LockstepReport:
    model = HoppingModel(L)
    region = half_chain(L)
    rng = np.random.default_rng(seed)
    n = L // 2

    state = neel_state(L)
    fstate = fock.fock_from_gaussian(state.u)
    d_err = s_err = 0.0
    for _ in range(n_events):
        tau = waiting_time(1.0 - rng.uniform(), gamma, n)
        state = evolve_one_body(state, model.generator(), tau, eig=model.eig)
        fstate = fock.fock_evolve(fstate, tau, J=model.J)
        d = correlation_matrix(state)
        site = sample_site(jump_probabilities(d, n), rng.uniform())
        state = state_from_correlation(apply_jump(d, site), n, t=state.t)
        fstate, _ = fock.fock_measure(fstate, site, 1)
        de, se = _compare(state, fstate, region)
        d_err, s_err = max(d_err, de), max(s_err, se)
    return LockstepReport("qj", n_events, d_err, s_err)


def lockstep_projective(L: int, gamma: float, n_events: int, seed: int) -> LockstepReport:
    model = HoppingModel(L)
    region = half_chain(L)
    rng = np.random.default_rng(seed)
    n = L // 2

    state = neel_state(L)
    fstate = fock.fock_from_gaussian(state.u)
    d_err = s_err = 0.0
    for _ in range(n_events):
        tau = waiting_time(1.0 - rng.uniform(), gamma, n)
        state = evolve_one_body(state, model.generator(), tau, eig=model.eig)
        fstate = fock.fock_evolve(fstate, tau, J=model.J)
        d = correlation_matrix(state)
        site = sample_site_uniform(L, rng)
        outcome = sample_outcome(d[site, site].real, rng.uniform())
        state = state_from_correlation(apply_projection(d, site, outcome), n, t=state.t)
        fstate, _ = fock.fock_measure(fstate, site, outcome)
        de, se = _compare(state, fstate, region)
        d_err, s_err = max(d_err, de), max(s_err, se)
    return LockstepReport("pm", n_events, d_err, s_err)


def run_all(L: int = 6, gamma: float = 1.0, n_events: int = 200, seed: int = 1234):
    """Lockstep reports for all three protocols."""
    return [
        lockstep_qsd(L, gamma, n_events, seed),
        lockstep_jumps(L, gamma, n_events, seed + 1),
        lockstep_projective(L, gamma, n_events, seed + 2),
    ]
