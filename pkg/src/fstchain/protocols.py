"""Application protocols: ancilla parity measurement, correlator
measurement, and chain dynamics scenarios with instantaneous events.

The parity protocol follows Eq.-(8) ordering: Y^{pi/2} on the right
ancilla, then the full-transfer gate K_{N+2}^{(pi)} on the extended chain,
then X^{pi/2} on the left ancilla; the left ancilla then reads out the
excitation-number parity of the register.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import gates
from .propagator import (
    LIFT_SITE_LIMIT,
    extract_transfer_phase,
    lift_to_full,
    sector_indices,
    sector_propagator,
    single_propagator,
)
from .synthesis import ChainSpec, synthesize

__all__ = [
    "ParityProtocolResult",
    "Scenario",
    "ScenarioResult",
    "parity_measure",
    "correlator_measure",
    "run_scenario",
    "repeated_parity",
    "k_pi_gate",
    "populations_csv",
]

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S_DAG = np.diag([1.0, -1.0j])
_BASIS_CHANGE = {
    "Z": np.eye(2, dtype=complex),
    "X": _HADAMARD,
    "Y": _HADAMARD @ _S_DAG,
}


@lru_cache(maxsize=8)
def k_pi_gate(n_sites: int) -> np.ndarray:
    """K_N at theta=pi via the determinant lift of the PST propagator.

    Synthesizes the theta=pi chain, lifts its propagator at t=tau, and
    removes the transfer phase (phi per excitation, pi/2 on the middle
    site of odd chains) so the result is exactly exp(-i (pi/2) G_N).
    """
    if n_sites > LIFT_SITE_LIMIT:
        raise ValueError(f"k_pi_gate limited to N <= {LIFT_SITE_LIMIT}")
    params = synthesize(ChainSpec(n_sites=n_sites, theta=np.pi, tau=1.0))
    u1 = single_propagator(params, params.tau)
    phi = extract_transfer_phase(u1, np.pi)
    full = lift_to_full(u1)
    idx = np.arange(2**n_sites)
    phase = phi * np.bitwise_count(idx).astype(float)
    if n_sites % 2 == 1:
        phase = phase + (np.pi / 2) * ((idx >> (n_sites - (n_sites + 1) // 2)) & 1)
    return full * np.exp(1j * phase)[np.newaxis, :]


@dataclass(frozen=True)
class ParityProtocolResult:
    left_ancilla_one_probability: float
    inferred_parity: str  # "even" | "odd"
    post_state: np.ndarray  # full (N+2)-site state, site 1 = left ancilla
    protocol_duration: float


def _apply_single(psi: np.ndarray, gate2: np.ndarray, site: int, n: int) -> np.ndarray:
    """Apply a one-qubit gate at the 1-based site of an n-site state."""
    shaped = psi.reshape(2 ** (site - 1), 2, 2 ** (n - site))
    return np.einsum("ab,ibj->iaj", gate2, shaped).reshape(-1)


def parity_measure(psi: np.ndarray, j_max: float = 1.0) -> ParityProtocolResult:
    """Run the Eq.-(8) parity-measurement protocol on an N-site register.

    Returns the probability of reading the left ancilla in |1> (equal to
    the total even-excitation weight of psi), the inferred parity, the
    full post-protocol state on N+2 sites, and the protocol duration
    ((N+2)/2) * tau_iSWAP with tau_iSWAP = pi/(2 j_max).
    """
    n = int(np.log2(psi.size))
    if psi.shape != (2**n,):
        raise ValueError("state size is not a power of two")
    if n + 2 > LIFT_SITE_LIMIT:
        raise ValueError(f"register too large: N + 2 must be <= {LIFT_SITE_LIMIT}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("input state is not normalized")
    m = n + 2
    # |0>_L (x) psi (x) |0>_R
    ext = np.zeros(2**m, dtype=complex)
    ext[0 : 2 ** (m - 1) : 2] = psi  # L bit 0 (MSB), R bit 0 (LSB)
    half_y = gates.GateOp("HalfY", (m,)).matrix()
    half_x = gates.GateOp("HalfX", (1,)).matrix()
    ext = _apply_single(ext, half_y, m, m)
    ext = k_pi_gate(m) @ ext
    ext = _apply_single(ext, half_x, 1, m)
    # probability that the left ancilla (MSB) reads 1
    p_one = float(np.clip(np.sum(np.abs(ext[2 ** (m - 1) :]) ** 2), 0.0, 1.0))
    duration = (m / 2) * np.pi / (2 * j_max)
    return ParityProtocolResult(
        left_ancilla_one_probability=p_one,
        inferred_parity="even" if p_one >= 0.5 else "odd",
        post_state=ext,
        protocol_duration=duration,
    )


def correlator_measure(psi: np.ndarray, paulis, j_max: float = 1.0) -> float:
    """<P_1 (x) ... (x) P_N> via the parity protocol, P_n in {X, Y, Z}.

    Rotates each site into the Z basis, measures the Z-string parity with
    the ancilla protocol, and returns 1 - 2 P(odd).
    """
    n = int(np.log2(psi.size))
    if len(paulis) != n:
        raise ValueError(f"need {n} Pauli labels, got {len(paulis)}")
    rotated = psi
    for site, p in enumerate(paulis, start=1):
        try:
            v = _BASIS_CHANGE[p.upper()]
        except KeyError:
            raise ValueError(f"unknown Pauli {p!r}") from None
        rotated = _apply_single(rotated, v, site, n)
    result = parity_measure(rotated, j_max=j_max)
    p_odd = 1.0 - result.left_ancilla_one_probability
    return 1.0 - 2.0 * p_odd


@dataclass(frozen=True)
class Scenario:
    """Dynamics scenario: initial excitations plus timed instantaneous
    events ({"t", "kind": "xflip", "site"}).  Event times non-decreasing."""

    n_sites: int
    theta: float
    excitations: tuple
    events: tuple = ()
    t_final: float | None = None  # defaults to 2 tau

    def __post_init__(self):
        ts = [e["t"] for e in self.events]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("event times must be non-decreasing")
        if len(set(self.excitations)) != len(self.excitations):
            raise ValueError("duplicate excitation sites")

    @classmethod
    def from_json(cls, s: str) -> "Scenario":
        d = json.loads(s)
        return cls(
            n_sites=int(d["n_sites"]),
            theta=float(d["theta"]),
            excitations=tuple(d.get("excitations", ())),
            events=tuple(d.get("events", ())),
            t_final=float(d["t_final"]) if "t_final" in d else None,
        )

    def to_json(self) -> str:
        d = {
            "n_sites": self.n_sites,
            "theta": self.theta,
            "excitations": list(self.excitations),
            "events": list(self.events),
        }
        if self.t_final is not None:
            d["t_final"] = self.t_final
        return json.dumps(d)


@dataclass(frozen=True)
class ScenarioResult:
    times: np.ndarray          # in units of tau
    populations: np.ndarray    # shape (len(times), N)
    tau: float


class _SectorState:
    """State spread over excitation-number sectors, stored per sector as an
    amplitude vector over the subsets of sector_indices ordering.  Keeps
    Fig.-2-scale chains (N=15) cheap: only occupied sectors are evolved,
    via C(N,k)-dimensional determinant lifts."""

    def __init__(self, n_sites: int, excitations):
        self.n = n_sites
        k = len(excitations)
        idx = 0
        for s in excitations:
            if not 1 <= s <= n_sites:
                raise ValueError(f"site {s} outside 1..{n_sites}")
            idx |= 1 << (n_sites - s)
        sector = sector_indices(n_sites, k)
        amp = np.zeros(len(sector), dtype=complex)
        amp[np.flatnonzero(sector == idx)[0]] = 1.0
        self.sectors = {k: amp}

    def evolved(self, u1: np.ndarray) -> dict:
        return {
            k: sector_propagator(u1, k) @ amp for k, amp in self.sectors.items()
        }

    def apply_xflip(self, site: int) -> None:
        """Toggle the occupation of one site, rerouting amplitudes across
        neighboring sectors."""
        bit = 1 << (self.n - site)
        new: dict = {}
        for k, amp in self.sectors.items():
            src = sector_indices(self.n, k)
            occupied = (src & bit) != 0
            for dk, mask in ((-1, occupied), (+1, ~occupied)):
                if not mask.any():
                    continue
                dst_sector = sector_indices(self.n, k + dk)
                lookup = {int(v): i for i, v in enumerate(dst_sector)}
                tgt = new.setdefault(
                    k + dk, np.zeros(len(dst_sector), dtype=complex)
                )
                for i in np.flatnonzero(mask):
                    tgt[lookup[int(src[i]) ^ bit]] += amp[i]
        self.sectors = new

    def populations(self, sectors: dict) -> np.ndarray:
        p = np.zeros(self.n)
        for k, amp in sectors.items():
            idx = sector_indices(self.n, k)
            prob = np.abs(amp) ** 2
            for s in range(1, self.n + 1):
                occ = (idx & (1 << (self.n - s))) != 0
                p[s - 1] += prob[occ].sum()
        return p


def run_scenario(scenario: Scenario, n_steps: int = 200) -> ScenarioResult:
    """Site-population time series p_n(t) on a uniform grid.

    Events are applied instantaneously at their times; the evolution
    between events uses the exact sector-restricted determinant lift.
    """
    params = synthesize(
        ChainSpec(n_sites=scenario.n_sites, theta=scenario.theta, tau=1.0)
    )
    tau = params.tau
    t_final = scenario.t_final if scenario.t_final is not None else 2 * tau
    times = np.linspace(0.0, t_final, n_steps + 1)
    state = _SectorState(scenario.n_sites, scenario.excitations)

    events = list(scenario.events)
    pops = np.empty((len(times), scenario.n_sites))
    t_anchor = 0.0  # time at which `state` is current
    for i, t in enumerate(times):
        while events and events[0]["t"] <= t + 1e-12 * max(t_final, 1.0):
            ev = events.pop(0)
            # advance the stored state to the event time, then apply
            u1 = single_propagator(params, ev["t"] - t_anchor)
            state.sectors = state.evolved(u1)
            t_anchor = ev["t"]
            if ev["kind"] == "xflip":
                state.apply_xflip(int(ev["site"]))
            else:
                raise ValueError(f"unknown event kind {ev['kind']!r}")
        u1 = single_propagator(params, t - t_anchor)
        pops[i] = state.populations(state.evolved(u1))
    return ScenarioResult(times=times / tau, populations=pops, tau=tau)


def repeated_parity(psi: np.ndarray, rounds: int, j_max: float = 1.0):
    """Run the parity protocol `rounds` times on the same register,
    projecting the ancillas on the read-out outcome between rounds."""
    if rounds < 2:
        raise ValueError("rounds must be >= 2")
    n = int(np.log2(psi.size))
    results = []
    current = psi
    for _ in range(rounds):
        res = parity_measure(current, j_max=j_max)
        results.append(res)
        # project left ancilla on the inferred outcome, right ancilla on |0>
        shaped = res.post_state.reshape(2, 2**n, 2)
        register = shaped[1 if res.inferred_parity == "even" else 0, :, 0]
        norm = np.linalg.norm(register)
        if norm < 1e-9:
            raise RuntimeError("projection annihilated the register")
        current = register / norm
    return results, current


def populations_csv(result: ScenarioResult) -> str:
    """CSV time series `t, p_1, ..., p_N` (t in units of tau)."""
    n = result.populations.shape[1]
    lines = ["t," + ",".join(f"p_{i}" for i in range(1, n + 1))]
    for t, row in zip(result.times, result.populations):
        lines.append(
            ",".join(f"{v:.17g}" for v in np.concatenate(([t], row)))
        )
    return "\n".join(lines) + "\n"
