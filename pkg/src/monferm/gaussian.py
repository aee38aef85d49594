"""Gaussian-state algebra for free fermions on a periodic chain.

A pure number-conserving Gaussian state of N fermions on L sites is stored
as an L x N complex matrix U with orthonormal columns.  Every observable
used in this package is derived from the two-point correlation matrix
D_mn = sum_k U*_mk U_nk, which for pure states is a rank-N Hermitian
projector.  All site indices are 0-based.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

EIG_CLAMP = 1e-12


class RankCollapseError(RuntimeError):
    """Raised when a coefficient matrix loses full column rank."""


@dataclass
class GaussianState:
    """Slater-determinant state: L x N coefficient matrix plus a clock."""

    u: np.ndarray
    t: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.u.shape[0]

    @property
    def n_particles(self) -> int:
        return self.u.shape[1]


@dataclass
class HoppingModel:
    """Nearest-neighbour hopping on a periodic chain of even length."""

    L: int
    J: float = 1.0
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.L < 4 or self.L % 2 != 0:
            raise ValueError(f"lattice size must be even and >= 4, got {self.L}")
        h = np.zeros((self.L, self.L))
        for i in range(self.L):
            h[i, (i + 1) % self.L] = self.J
            h[(i + 1) % self.L, i] = self.J
        self.matrix = h

    @cached_property
    def eig(self):
        """Eigendecomposition of the one-body matrix, computed once."""
        vals, vecs = np.linalg.eigh(self.matrix)
        return vals, vecs

    def generator(self) -> np.ndarray:
        """Anti-Hermitian generator -i*H of the unitary one-body flow."""
        return -1j * self.matrix


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def neel_state(L: int) -> GaussianState:
    """Alternating occupation |1010...> at half filling, t = 0."""
    if L % 2 != 0:
        raise ValueError(f"lattice size must be even, got {L}")
    n = L // 2
    u = np.zeros((L, n), dtype=complex)
    u[2 * np.arange(n), np.arange(n)] = 1.0
    return GaussianState(u=u, t=0.0)


def correlation_matrix(state: GaussianState) -> np.ndarray:
    """D_mn = sum_k U*_mk U_nk = <c_m^dag c_n>, Hermitized."""
    u = state.u
    return hermitize(u.conj() @ u.T)


def orthonormality_defect(u: np.ndarray) -> float:
    n = u.shape[1]
    return float(np.abs(u.conj().T @ u - np.eye(n)).max())


def projector_defect(d: np.ndarray) -> float:
    return float(np.abs(d @ d - d).max())


def trace_defect(d: np.ndarray, n_particles: int) -> float:
    return abs(float(np.trace(d).real) - n_particles)


def orthonormalize(u: np.ndarray) -> np.ndarray:
    """QR-based column orthonormalization with positive-diagonal R.

    Forcing the diagonal of R to be real positive makes the factorization
    unique, so repeated runs with the same seed are bit-reproducible.
    Raises RankCollapseError if a column is (numerically) dependent.
    """
    q, r = np.linalg.qr(u)
    diag = np.diagonal(r)
    if np.abs(diag).min() < 1e-12:
        raise RankCollapseError("coefficient matrix is rank deficient")
    phases = diag / np.abs(diag)
    return q * phases.conj()


def binary_entropy(x: float) -> float:
    """-x ln x - (1-x) ln(1-x) with arguments clamped away from {0,1}."""
    x = min(max(float(x), EIG_CLAMP), 1.0 - EIG_CLAMP)
    return -x * np.log(x) - (1.0 - x) * np.log(1.0 - x)


def entanglement_entropy(d: np.ndarray, indices) -> float:
    """Von Neumann entropy (nats) of the region spanned by ``indices``.

    Uses the eigenvalues of the region-restricted block of the correlation
    matrix; each eigenvalue contributes the binary entropy term.
    """
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0:
        raise ValueError("region must be nonempty")
    sub = d[np.ix_(idx, idx)]
    lam = np.linalg.eigvalsh(sub)
    if lam.min() < -1e-6 or lam.max() > 1 + 1e-6:
        raise FloatingPointError(
            f"correlation eigenvalue out of range: [{lam.min()}, {lam.max()}]"
        )
    lam = np.clip(lam, EIG_CLAMP, 1.0 - EIG_CLAMP)
    return float(-np.sum(lam * np.log(lam) + (1 - lam) * np.log(1 - lam)))


def min_periodic_distance(L: int, indices, r: int) -> int:
    """Minimal periodic distance from site r to the region."""
    idx = np.asarray(indices, dtype=int)
    raw = np.abs(idx - r)
    return int(np.minimum(raw, L - raw).min())


def mutual_information(d: np.ndarray, indices, r: int):
    """I = S_A + S_r - S_{A u r} and the periodic distance from r to A."""
    idx = np.asarray(indices, dtype=int)
    if r in idx:
        raise ValueError(f"site {r} lies inside the region")
    s_a = entanglement_entropy(d, idx)
    s_r = binary_entropy(d[r, r].real)
    s_both = entanglement_entropy(d, np.append(idx, r))
    dist = min_periodic_distance(d.shape[0], idx, r)
    return s_a + s_r - s_both, dist


def state_from_correlation(d: np.ndarray, n_particles: int, t: float = 0.0) -> GaussianState:
    """Rebuild a coefficient matrix from a (projector-like) correlation matrix.

    The Hermitian eigendecomposition D = W diag(s) W^dag with eigenvalues
    sorted descending yields the occupied one-body orbitals as the leading
    N columns of W.  For an exact projector this coincides with the
    singular-value factorization D = U S U^dag with S = diag(1..1,0..0).
    """
    if projector_defect(d) > 1e-6:
        raise ValueError("correlation matrix is not close to a projector")
    vals, vecs = np.linalg.eigh(d)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if n_particles < d.shape[0] and vals[n_particles - 1] - vals[n_particles] < 1e-6:
        raise ValueError("ambiguous occupied subspace: eigenvalue gap too small")
    # D_mn = sum_k U*_mk U_nk means D = conj(U) U^T, so the coefficient
    # matrix is the conjugate of the occupied eigenvectors of D.
    return GaussianState(u=np.ascontiguousarray(vecs[:, :n_particles].conj()), t=t)


def _rk4(u: np.ndarray, generator: np.ndarray, duration: float, max_substep: float = 0.05) -> np.ndarray:
    nsub = max(1, int(np.ceil(duration / max_substep)))
    h = duration / nsub
    for _ in range(nsub):
        k1 = generator @ u
        k2 = generator @ (u + 0.5 * h * k1)
        k3 = generator @ (u + 0.5 * h * k2)
        k4 = generator @ (u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def evolve_one_body(
    state: GaussianState,
    generator: np.ndarray,
    duration: float,
    method: str = "spectral",
    eig=None,
    max_substep: float = 0.05,
) -> GaussianState:
    """Apply exp(generator * duration) to the coefficient matrix.

    ``spectral`` requires an anti-Hermitian generator -i*H; the phases
    exp(-i e_k duration) are applied in the eigenbasis of H (pass ``eig``
    to reuse a cached decomposition).  ``rk4`` integrates U' = generator U
    with the generator frozen and substeps of at most ``max_substep``;
    its truncation error scales as (|e_max| h)^5 per substep, so tighten
    the substep when sub-1e-8 agreement with the exact flow is needed.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if duration == 0:
        return GaussianState(u=state.u.copy(), t=state.t)
    if method == "spectral":
        h = 1j * generator
        if np.abs(h - h.conj().T).max() > 1e-10:
            raise ValueError("spectral method needs an anti-Hermitian generator")
        if eig is None:
            vals, vecs = np.linalg.eigh(hermitize(h))
        else:
            vals, vecs = eig
        phases = np.exp(-1j * vals * duration)
        u = vecs @ (phases[:, None] * (vecs.conj().T @ state.u))
    elif method == "rk4":
        u = _rk4(state.u, generator, duration, max_substep=max_substep)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    return GaussianState(u=orthonormalize(u), t=state.t + duration)


def energy(model: HoppingModel, d: np.ndarray) -> float:
    """<H> = Tr(H D) for the one-body hopping matrix."""
    return float(np.trace(model.matrix @ d).real)


def half_chain(L: int) -> np.ndarray:
    """Default region: the first L/2 sites."""
    return np.arange(L // 2)
