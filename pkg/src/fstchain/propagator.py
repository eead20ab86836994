"""Exact chain evolution: single-excitation propagator, free-fermion lift,
and a dense brute-force oracle on the full 2^N space.

Basis conventions used throughout the package:

* site 1 is the most significant bit of a computational basis index;
* an occupation subset {i1 < ... < ik} labels both the Fock state
  a+_{i1} ... a+_{ik} |vac> and the bitstring with ones at those sites,
  with relative amplitude +1 (the sign convention of the annihilation
  operators cancels in number-conserving bilinears).
"""

from __future__ import annotations

import json
from itertools import combinations

import numpy as np

from .synthesis import ChainParams, single_excitation_hamiltonian

__all__ = [
    "DENSE_SITE_LIMIT",
    "LIFT_SITE_LIMIT",
    "single_propagator",
    "extract_transfer_phase",
    "lift_to_full",
    "sector_indices",
    "sector_propagator",
    "dense_oracle",
    "dense_hamiltonian",
    "evolve_state",
    "basis_state",
    "state_to_json",
    "state_from_json",
]

DENSE_SITE_LIMIT = 10
LIFT_SITE_LIMIT = 12


def single_propagator(params: ChainParams, t: float) -> np.ndarray:
    """U = exp(-i H^(1) t) on the single-excitation manifold."""
    if t < 0:
        raise ValueError("t must be >= 0")
    h = single_excitation_hamiltonian(params)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def extract_transfer_phase(u: np.ndarray, theta: float) -> float:
    """Transfer phase phi of an FST propagator at t = tau.

    The propagator maps |n> to e^{-i phi}(cos(theta/2)|n> -
    i sin(theta/2)|N+1-n>); phi is read off the (1,1) element, or off the
    antidiagonal element when cos(theta/2) vanishes.
    """
    n = u.shape[0]
    c = np.cos(theta / 2)
    if abs(c) >= 1e-6:
        amp = u[0, 0] / c
    else:
        amp = 1j * u[n - 1, 0] / np.sin(theta / 2)
    if abs(amp) < 0.5:
        raise ValueError("input does not look like an FST propagator at t=tau")
    return float(-np.angle(amp))


def sector_indices(n_sites: int, k: int) -> np.ndarray:
    """Basis indices (site 1 = MSB) of all k-excitation bitstrings,
    ordered by their occupation subsets lexicographically."""
    out = []
    for subset in combinations(range(1, n_sites + 1), k):
        idx = 0
        for s in subset:
            idx |= 1 << (n_sites - s)
        out.append(idx)
    return np.array(out, dtype=np.int64)


def sector_propagator(u: np.ndarray, k: int) -> np.ndarray:
    """Determinant lift of the single-particle matrix u to the k-excitation
    sector: element (S', S) = det(u[S', S])."""
    n = u.shape[0]
    subsets = list(combinations(range(n), k))
    m = len(subsets)
    if k == 0:
        return np.ones((1, 1), dtype=complex)
    rows = np.array(subsets)
    # stack all (S', S) submatrices and take dets in one vectorized call
    sub = u[rows[:, None, :, None], rows[None, :, None, :]]
    return np.linalg.det(sub.reshape(m * m, k, k)).reshape(m, m)


def lift_to_full(u: np.ndarray, tol_unitary: float = 1e-9) -> np.ndarray:
    """Lift a single-particle unitary to the full 2^N space via Slater
    determinants.  Block diagonal in total excitation number."""
    n = u.shape[0]
    if n > LIFT_SITE_LIMIT:
        raise ValueError(f"lift limited to N <= {LIFT_SITE_LIMIT}, got {n}")
    dim = 2**n
    full = np.zeros((dim, dim), dtype=complex)
    for k in range(n + 1):
        idx = sector_indices(n, k)
        full[np.ix_(idx, idx)] = sector_propagator(u, k)
    return full


def _site_ops(n_sites: int):
    sp = np.array([[0, 0], [1, 0]], dtype=complex)   # |1><0|
    sm = sp.T.conj()
    num = np.array([[0, 0], [0, 1]], dtype=complex)
    eye = np.eye(2, dtype=complex)

    def embed(op, site):
        out = np.eye(1, dtype=complex)
        for s in range(1, n_sites + 1):
            out = np.kron(out, op if s == site else eye)
        return out

    return sp, sm, num, embed


def dense_hamiltonian(params: ChainParams) -> np.ndarray:
    """Full 2^N matrix of the chain Hamiltonian built from ladder operators."""
    n = params.n_sites
    if n > DENSE_SITE_LIMIT:
        raise ValueError(f"dense oracle limited to N <= {DENSE_SITE_LIMIT}, got {n}")
    sp, sm, num, embed = _site_ops(n)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for s in range(1, n + 1):
        h += params.detunings[s - 1] * embed(num, s)
    for s in range(1, n):
        hop = embed(sp, s) @ embed(sm, s + 1)
        h += params.couplings[s - 1] * (hop + hop.conj().T)
    return h


def dense_oracle(params: ChainParams, t: float) -> np.ndarray:
    """exp(-i H t) on the full 2^N space, by direct diagonalization."""
    h = dense_hamiltonian(params)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def basis_state(n_sites: int, sites) -> np.ndarray:
    """Computational basis state with excitations at the given 1-based sites."""
    idx = 0
    for s in sites:
        if not 1 <= s <= n_sites:
            raise ValueError(f"site {s} outside 1..{n_sites}")
        idx |= 1 << (n_sites - s)
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[idx] = 1.0
    return psi


def evolve_state(
    psi: np.ndarray, params: ChainParams, t: float, method: str = "lift"
) -> np.ndarray:
    """Evolve a 2^N state vector for time t.

    method="lift" uses the free-fermion determinant lift (N <= 12),
    method="dense" the brute-force exponential (N <= 10), and
    method="sector" lifts only the excitation-number sectors the state
    actually occupies (the only option for long chains; cheap for a few
    excitations).  method="auto" picks sector for N > 12, lift otherwise.
    """
    n = params.n_sites
    if psi.shape != (2**n,):
        raise ValueError(f"state dimension {psi.shape} does not match N={n}")
    if method == "auto":
        method = "sector" if n > LIFT_SITE_LIMIT else "lift"
    if method == "sector":
        u1 = single_propagator(params, t)
        out = np.zeros_like(psi, dtype=complex)
        occupied = np.unique(np.bitwise_count(np.flatnonzero(np.abs(psi) > 0)))
        for k in occupied:
            idx = sector_indices(n, int(k))
            out[idx] = sector_propagator(u1, int(k)) @ psi[idx]
        return out
    if method == "lift":
        full = lift_to_full(single_propagator(params, t))
    elif method == "dense":
        full = dense_oracle(params, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return full @ psi


def state_to_json(psi: np.ndarray) -> str:
    return json.dumps([[float(a.real), float(a.imag)] for a in psi])


def state_from_json(s: str) -> np.ndarray:
    pairs = json.loads(s)
    return np.array([complex(re, im) for re, im in pairs])
