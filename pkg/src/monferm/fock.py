"""Exact many-body reference on the full fixed-N occupation basis.

Dense brute-force companion to the Gaussian formalism for small chains
(L <= 10, dimension C(L, N)).  Used in tests and by the oracle-check
command; never on the production path.

Basis convention: a bitmask m encodes occupied sites (bit j = site j),
and the basis ket is c_{j1}^dag ... c_{jN}^dag |vac> with j1 < ... < jN.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.linalg import expm

MAX_SITES = 10


@lru_cache(maxsize=None)
def basis(L: int, N: int):
    """All N-particle bitmasks on L sites (ascending) and their index map."""
    masks = tuple(
        sum(1 << j for j in occ) for occ in combinations(range(L), N)
    )
    index = {m: i for i, m in enumerate(masks)}
    return masks, index


def _ann_sign(mask: int, j: int) -> int:
    """Sign from anticommuting c_j past the occupied sites below j."""
    return -1 if bin(mask & ((1 << j) - 1)).count("1") % 2 else 1


@dataclass
class FockState:
    L: int
    N: int
    amp: np.ndarray  # complex amplitudes over basis(L, N), unit norm

    def normalized(self) -> "FockState":
        return FockState(self.L, self.N, self.amp / np.linalg.norm(self.amp))


def fock_from_gaussian(u: np.ndarray, t: float = 0.0) -> FockState:
    """Expand a coefficient matrix into Slater-determinant amplitudes."""
    L, N = u.shape
    if L > MAX_SITES:
        raise ValueError(f"exact expansion capped at {MAX_SITES} sites, got {L}")
    masks, _ = basis(L, N)
    amp = np.empty(len(masks), dtype=complex)
    for i, m in enumerate(masks):
        rows = [j for j in range(L) if m >> j & 1]
        amp[i] = np.linalg.det(u[rows, :])
    return FockState(L, N, amp).normalized()


def quadratic_operator(a: np.ndarray, L: int, N: int) -> np.ndarray:
    """Matrix of sum_ij a_ij c_i^dag c_j on the fixed-N basis."""
    masks, index = basis(L, N)
    dim = len(masks)
    op = np.zeros((dim, dim), dtype=complex)
    nz = [(i, j) for i in range(L) for j in range(L) if a[i, j] != 0]
    for col, m in enumerate(masks):
        for i, j in nz:
            if not m >> j & 1:
                continue
            m1 = m & ~(1 << j)
            if m1 >> i & 1:
                continue
            sign = _ann_sign(m, j) * _ann_sign(m1, i)
            op[index[m1 | (1 << i)], col] += sign * a[i, j]
    return op


@lru_cache(maxsize=None)
def _hopping_eig(L: int, N: int, J: float):
    from .gaussian import HoppingModel

    h = quadratic_operator(HoppingModel(L, J).matrix, L, N)
    vals, vecs = np.linalg.eigh(h)
    return vals, vecs


def fock_evolve(state: FockState, duration: float, J: float = 1.0) -> FockState:
    """Unitary evolution under the hopping Hamiltonian."""
    vals, vecs = _hopping_eig(state.L, state.N, J)
    amp = vecs @ (np.exp(-1j * vals * duration) * (vecs.conj().T @ state.amp))
    return FockState(state.L, state.N, amp)


def fock_apply_exponential(state: FockState, a: np.ndarray, scale: float = 1.0) -> FockState:
    """exp(scale * sum a_ij c_i^dag c_j) applied and renormalized."""
    op = quadratic_operator(np.asarray(a, dtype=complex), state.L, state.N)
    return FockState(state.L, state.N, expm(scale * op) @ state.amp).normalized()


def fock_measure(state: FockState, j: int, outcome: int):
    """Collapse site j onto the given occupation; returns (state, probability)."""
    masks, _ = basis(state.L, state.N)
    keep = np.fromiter(((m >> j & 1) == outcome for m in masks), dtype=bool)
    prob = float(np.sum(np.abs(state.amp[keep]) ** 2))
    if prob <= 1e-12:
        raise ValueError(f"measuring outcome {outcome} at site {j} has probability ~0")
    amp = np.where(keep, state.amp, 0.0)
    return FockState(state.L, state.N, amp / np.sqrt(prob)), prob


def fock_correlation(state: FockState) -> np.ndarray:
    """<c_i^dag c_j> from the amplitudes (D_ij = <c_i psi | c_j psi>)."""
    L, N = state.L, state.N
    masks, _ = basis(L, N)
    lowered, low_index = basis(L, N - 1)
    c = np.zeros((len(lowered), L), dtype=complex)
    for col_idx, m in enumerate(masks):
        a = state.amp[col_idx]
        if a == 0:
            continue
        for j in range(L):
            if m >> j & 1:
                c[low_index[m & ~(1 << j)], j] += _ann_sign(m, j) * a
    return c.conj().T @ c


def fock_jump_probabilities(state: FockState) -> np.ndarray:
    """Born weights <n_j>/N for detection of an occupied site."""
    return np.diagonal(fock_correlation(state)).real / state.N


def fock_entropy(state: FockState, indices) -> float:
    """Entanglement entropy of a site region via the reduced density matrix.

    Creation operators are reordered region-first; each basis state picks
    up the parity of that reordering, which handles non-contiguous
    regions exactly.
    """
    region = sorted(int(i) for i in indices)
    rest = [i for i in range(state.L) if i not in region]
    rmask = sum(1 << j for j in region)
    masks, _ = basis(state.L, state.N)

    def squash(m: int, sites) -> int:
        return sum(1 << k for k, j in enumerate(sites) if m >> j & 1)

    mat = np.zeros((1 << len(region), 1 << len(rest)), dtype=complex)
    for idx, m in enumerate(masks):
        a = state.amp[idx]
        if a == 0:
            continue
        # parity of moving the occupied region sites in front of the
        # occupied rest sites, keeping ascending order inside each group
        inv = 0
        for b in region:
            if m >> b & 1:
                inv += bin(m & ~rmask & ((1 << b) - 1)).count("1")
        sign = -1 if inv % 2 else 1
        mat[squash(m, region), squash(m & ~rmask, rest)] += sign * a
    rho = mat @ mat.conj().T
    lam = np.linalg.eigvalsh(rho)
    lam = np.clip(lam, 1e-12, None)
    return float(-np.sum(lam * np.log(lam)))


def fock_mutual_information(state: FockState, indices, r: int) -> float:
    region = list(indices)
    return (
        fock_entropy(state, region)
        + fock_entropy(state, [r])
        - fock_entropy(state, region + [r])
    )
