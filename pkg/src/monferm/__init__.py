"""Monitored free fermions on a chain: Gaussian-state quantum trajectories.

Three measurement protocols for the occupation number of a
nearest-neighbour fermion chain at half filling:

* ``qsd``: diffusive weak monitoring of every site at every time step,
* ``qj``: jump-style detection of occupied sites at random times,
* ``pm``: projective collapse at Poisson-distributed times.

All observables (entanglement entropy, mutual information, occupation
profiles) come from the two-point correlation matrix of the Gaussian
trajectory state.  An exact Fock-space oracle validates every update on
small chains.
"""

__version__ = "0.1.0"

from .gaussian import (  # noqa: F401
    GaussianState,
    HoppingModel,
    correlation_matrix,
    entanglement_entropy,
    evolve_one_body,
    half_chain,
    mutual_information,
    neel_state,
    orthonormalize,
    state_from_correlation,
)
from .runner import (  # noqa: F401
    RunConfig,
    derive_stream,
    merge_summaries,
    run_ensemble,
    run_trajectory,
)
