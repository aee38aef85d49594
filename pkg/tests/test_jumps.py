import numpy as np
import pytest

from monferm.gaussian import (
    HoppingModel,
    correlation_matrix,
    half_chain,
    neel_state,
    projector_defect,
)
from monferm.jumps import (
    apply_jump,
    jump_probabilities,
    run_jump_trajectory,
    sample_site,
    waiting_time,
)
from monferm.runner import derive_stream
from conftest import random_state


# ---------------------------------------------------------------------------
# waiting times


def test_waiting_time_eta_one_is_zero():
    assert waiting_time(1.0, gamma=2.0, n_particles=5) == 0.0


def test_waiting_time_closed_form():
    assert waiting_time(np.exp(-1.0), gamma=1.0, n_particles=2) == pytest.approx(0.5, abs=1e-12)


def test_waiting_time_rejects_bad_inputs():
    for eta in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            waiting_time(eta, 1.0, 2)
    with pytest.raises(ValueError):
        waiting_time(0.5, 0.0, 2)


def test_waiting_time_monte_carlo_mean():
    rng = derive_stream(123, 0)
    etas = 1.0 - rng.uniform(size=10**6)
    taus = -np.log(etas) / (1.0 * 2)
    # spot-check the vectorized expression against the scalar operation
    for eta in etas[:50]:
        assert waiting_time(float(eta), 1.0, 2) == -np.log(eta) / 2.0
    assert abs(taus.mean() / 0.5 - 1.0) < 0.003


# ---------------------------------------------------------------------------
# site selection


def test_jump_probabilities_neel():
    d = correlation_matrix(neel_state(4))
    assert np.allclose(jump_probabilities(d, 2), [0.5, 0.0, 0.5, 0.0], atol=1e-15)


def test_jump_probabilities_uniform():
    d = np.diag([0.5, 0.5, 0.5, 0.5]).astype(complex)
    assert np.allclose(jump_probabilities(d, 2), [0.25] * 4, atol=1e-15)


def test_jump_probabilities_normalized(rng):
    d = correlation_matrix(random_state(8, 4, rng))
    assert abs(jump_probabilities(d, 4).sum() - 1.0) < 1e-9


def test_jump_probabilities_flags_negative():
    d = np.diag([-0.01, 1.01, 1.0, 0.0]).astype(complex)
    with pytest.raises(FloatingPointError):
        jump_probabilities(d, 2)


def test_sample_site_cumulative_convention():
    probs = np.array([0.0, 0.5, 0.5])
    assert sample_site(probs, 0.2) == 1
    assert sample_site(probs, 0.5) == 1  # first index whose cumsum reaches the draw
    assert sample_site(probs, 0.7) == 2
    assert sample_site(np.array([0.25] * 4), 0.25) == 0


def test_sample_site_multinomial_frequencies():
    probs = np.array([0.5, 0.0, 0.25, 0.25])
    rng = derive_stream(77, 0)
    draws = rng.uniform(size=10**6)
    cum = np.cumsum(probs)
    sites = np.searchsorted(cum, draws, side="left")
    for d in draws[:100]:
        assert sample_site(probs, float(d)) == int(np.searchsorted(cum, d, side="left"))
    counts = np.bincount(sites, minlength=4)
    n = draws.size
    for j, p in enumerate(probs):
        band = 3 * np.sqrt(n * p * (1 - p))
        assert abs(counts[j] - n * p) <= max(band, 1)


# ---------------------------------------------------------------------------
# jump update


def test_apply_jump_neel_eigenstate():
    d = correlation_matrix(neel_state(4))
    assert np.allclose(apply_jump(d, 0), d, atol=1e-12)


def test_apply_jump_two_site():
    d = np.full((2, 2), 0.5, dtype=complex)
    assert np.allclose(apply_jump(d, 0), np.diag([1.0, 0.0]), atol=1e-12)


def test_apply_jump_rejects_empty_site():
    d = correlation_matrix(neel_state(4))
    with pytest.raises(ValueError):
        apply_jump(d, 1)


def test_apply_jump_preserves_structure(rng):
    d = correlation_matrix(random_state(8, 4, rng))
    j = int(np.argmax(np.diagonal(d).real))
    out = apply_jump(d, j)
    assert out[j, j] == 1.0
    assert np.abs(out[j, :j]).max(initial=0.0) == 0.0
    assert abs(np.trace(out).real - 4) < 1e-8
    assert projector_defect(out) < 1e-8


# ---------------------------------------------------------------------------
# trajectories


def test_trajectory_determinism():
    model = HoppingModel(8)
    runs = [
        run_jump_trajectory(model, 1.0, 6.0, (4.0, 6.0), half_chain(8), derive_stream(3, 1))
        for _ in range(2)
    ]
    for key in ("t", "site", "ds_meas", "tau", "ds_between_rate"):
        assert np.array_equal(runs[0].events[key], runs[1].events[key], equal_nan=True)


def test_trajectory_entropy_chain_telescopes():
    model = HoppingModel(8)
    traj = run_jump_trajectory(model, 1.0, 10.0, (0.0, 10.0), half_chain(8), derive_stream(21, 0))
    assert traj.n_events > 10
    # S starts at 0 (Néel); every segment's dS_between and dS_meas chain exactly
    total = (traj.events["ds_between"] + traj.events["ds_meas"]).sum()
    assert abs(total - traj.ee[-1]) < 1e-9


def test_trajectory_window_flags():
    model = HoppingModel(8)
    traj = run_jump_trajectory(model, 1.5, 6.0, (3.0, 5.0), half_chain(8), derive_stream(4, 0))
    t = traj.events["t"]
    expected = (t >= 3.0 - 1e-9) & (t <= 5.0 + 1e-9)
    assert np.array_equal(traj.events["in_window"], expected)
    assert traj.events["outcome"].size == 0 or np.all(traj.events["outcome"] == -1)


def test_trajectory_event_invariants():
    model = HoppingModel(8)
    traj = run_jump_trajectory(model, 1.0, 8.0, (0.0, 8.0), half_chain(8), derive_stream(9, 2))
    ev = traj.events
    assert np.all(ev["tau"] > 0)
    assert np.all(ev["n_before"] > 1e-12)
    assert np.all(ev["n_before"] <= 1 + 1e-9)
    assert np.all((ev["site"] >= 0) & (ev["site"] < 8))


def test_trajectory_gamma_zero_has_no_events():
    model = HoppingModel(8)
    traj = run_jump_trajectory(model, 0.0, 4.0, (2.0, 4.0), half_chain(8), derive_stream(1, 0))
    assert traj.n_events == 0
    assert traj.tiny_tau_excluded == 0


def test_trajectory_snapshots_in_window():
    model = HoppingModel(8)
    traj = run_jump_trajectory(model, 2.0, 6.0, (3.0, 6.0), half_chain(8),
                               derive_stream(6, 0), snapshot_dt=0.5)
    assert len(traj.snapshots) >= 5
    for d in traj.snapshots:
        assert projector_defect(d) < 1e-8
