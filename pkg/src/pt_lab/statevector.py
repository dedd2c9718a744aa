"""Exact quantum dynamics: Trotter evolution and dense diagonalization.

The Hamiltonian is H = H_cl + H_D with H_cl diagonal in the computational
basis and H_D diagonal in the x basis, so evolution alternates between the
two bases via a fast Walsh-Hadamard transform. Two drivers are supported:

* uniform transverse field, H_D = -B_perp * sum_i sigma^x_i;
* matched driver for the spin glass,
  H_D = driver_scale * [sum_i (|h_i|+1) sigma^x_i
                        + sum_{i<j} (|J_ij|+1) sigma^x_i sigma^x_j].

A dense eigensolver backend covers small systems for cross-checks and for
spectral formulas that need the full eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import check_bitstring, check_n, index_array
from .instances import (
    ImpurityBandInstance,
    SpinGlassInstance,
    all_classical_energies,
    pair_energies,
)

TROTTER_MAX_N = 24
DENSE_MAX_N = 14
NORM_TOL = 1e-8
_BLOCK = 1 << 18


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        check_n(self.n)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n,):
            raise ValueError("amplitudes must have length 2^n")
        self.amplitudes = amps

    @classmethod
    def basis_state(cls, n: int, z: int) -> "StateVector":
        z = check_bitstring(z, n)
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[z] = 1.0
        return cls(amps, n)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(other.amplitudes, self.amplitudes))


@dataclass
class EvolutionConfig:
    """Time grid and splitting choices for the Trotter backend.

    With total_time set, trotter_steps (default 300) fixes dt; passing dt
    instead derives the step count. With total_time = None the transfer
    protocol runs a doubling ladder starting at start_time and stops when
    the transferred weight changes by less than saturation_rtol over one
    doubling of t.
    """

    total_time: float | None = None
    trotter_steps: int | None = None
    dt: float | None = None
    splitting: str = "symmetric"
    driver: str = "auto"
    start_time: float = 1.0
    saturation_rtol: float = 0.01
    max_doublings: int = 16
    trace_points: int = 257

    def __post_init__(self):
        if self.splitting not in ("symmetric", "first"):
            raise ValueError("splitting must be 'symmetric' or 'first'")
        if self.driver not in ("auto", "uniform", "matched"):
            raise ValueError("driver must be 'auto', 'uniform' or 'matched'")
        if self.total_time is not None and not np.isfinite(self.total_time):
            raise ValueError("total_time must be finite")
        if self.total_time is not None and self.total_time < 0:
            raise ValueError("total_time must be >= 0")
        if self.trotter_steps is not None and self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")

    def resolve_steps(self, total_time: float) -> int:
        if self.trotter_steps is not None:
            return self.trotter_steps
        if self.dt is not None:
            return max(1, int(np.ceil(total_time / self.dt)))
        return 300


def driver_terms(inst, driver: str = "auto"):
    """Per-flip driver coefficients (hx, Jx); Jx is None for one-body drivers."""
    if isinstance(inst, ImpurityBandInstance):
        if driver == "matched":
            raise ValueError("matched driver needs a spin-glass instance")
        return np.full(inst.n, -inst.B_perp), None
    if isinstance(inst, SpinGlassInstance):
        if driver == "uniform":
            raise ValueError("uniform driver needs an impurity-band instance")
        return inst.driver_coefficients()
    raise TypeError(f"not an instance: {type(inst)!r}")


def driver_x_diagonal(inst, driver: str = "auto") -> np.ndarray:
    """Eigenvalues of H_D over the x basis, ordered by x-basis label."""
    hx, Jx = driver_terms(inst, driver)
    n = inst.n
    N = 1 << n
    if Jx is None:
        k = index_array(n)
        pop = np.bitwise_count(k).astype(np.int64)
        return hx[0] * (n - 2.0 * pop)
    D = np.empty(N)
    labels = index_array(n)
    for lo in range(0, N, _BLOCK):
        block = labels[lo:lo + _BLOCK]
        D[lo:lo + _BLOCK] = pair_energies(hx, Jx, block)
    return D


def _fwht(a: np.ndarray) -> np.ndarray:
    """In-place unnormalized Walsh-Hadamard transform (matrix entries +-1)."""
    N = a.shape[0]
    h = 1
    while h < N:
        a = a.reshape(-1, 2, h)
        x = a[:, 0, :].copy()
        a[:, 0, :] = x + a[:, 1, :]
        a[:, 1, :] = x - a[:, 1, :]
        a = a.reshape(N)
        h *= 2
    return a


def _trotter_segment(psi, ph_cl, ph_half, ph_full, steps, splitting):
    """Advance by `steps` Trotter steps in place; psi enters and leaves in the z basis.

    Segments at fixed dt compose exactly, so a long run may be split into
    chunks for trace recording without changing the result.
    """
    N = psi.shape[0]
    inv_N = 1.0 / N
    if splitting == "first":
        for _ in range(steps):
            psi *= ph_cl
            psi = _fwht(psi)
            psi *= ph_full
            psi = _fwht(psi)
            psi *= inv_N
        return psi
    psi = _fwht(psi)
    psi *= ph_half
    for k in range(steps):
        psi = _fwht(psi)
        psi *= inv_N
        psi *= ph_cl
        psi = _fwht(psi)
        psi *= ph_full if k < steps - 1 else ph_half
    psi = _fwht(psi)
    psi *= inv_N
    return psi


def _phase_tables(E, Dx, dt):
    ph_cl = np.exp(-1j * dt * E)
    ph_half = np.exp(-0.5j * dt * Dx)
    return ph_cl, ph_half, ph_half * ph_half


def evolve_trotter(state: StateVector, inst, config: EvolutionConfig) -> StateVector:
    """Product-formula propagation of `state` under inst's Hamiltonian.

    The symmetric splitting applies
    e^{-i H_D dt/2} e^{-i H_cl dt} e^{-i H_D dt/2} per step; the "first"
    mode applies the plain product (e^{-i H_D dt} e^{-i H_cl dt})^steps.
    """
    if inst.n != state.n:
        raise ValueError("state and instance sizes differ")
    if inst.n > TROTTER_MAX_N:
        raise ValueError(f"Trotter backend capped at n = {TROTTER_MAX_N}")
    if abs(state.norm() - 1.0) > NORM_TOL:
        raise ValueError("input state is not normalized")
    if config.total_time is None:
        raise ValueError("evolve_trotter needs an explicit total_time")
    T = float(config.total_time)
    psi = state.amplitudes.copy()
    if T == 0.0:
        return StateVector(psi, state.n)
    steps = config.resolve_steps(T)
    dt = T / steps
    E = all_classical_energies(inst)
    Dx = driver_x_diagonal(inst, config.driver)
    ph_cl, ph_half, ph_full = _phase_tables(E, Dx, dt)
    psi = _trotter_segment(psi, ph_cl, ph_half, ph_full, steps, config.splitting)
    return StateVector(psi, state.n)


def dense_hamiltonian(inst, driver: str = "auto") -> np.ndarray:
    """Full 2^n x 2^n real symmetric matrix of H_cl + H_D."""
    n = inst.n
    if n > DENSE_MAX_N:
        raise ValueError(f"dense backend capped at n = {DENSE_MAX_N}")
    N = 1 << n
    idx = np.arange(N)
    H = np.zeros((N, N))
    H[idx, idx] = all_classical_energies(inst)
    hx, Jx = driver_terms(inst, driver)
    for i in range(n):
        H[idx, idx ^ (1 << i)] += hx[i]
    if Jx is not None:
        for i in range(n):
            for j in range(i + 1, n):
                H[idx, idx ^ (1 << i) ^ (1 << j)] += Jx[i, j]
    return H


def exact_eigs(inst, driver: str = "auto", B_perp: float | None = None):
    """Dense eigendecomposition; eigenvalues ascending, eigenvectors in columns."""
    if B_perp is not None:
        if not isinstance(inst, ImpurityBandInstance):
            raise ValueError("B_perp override applies to impurity-band instances")
        inst = ImpurityBandInstance(n=inst.n, marked=inst.marked, eps=inst.eps,
                                    W=inst.W, B_perp=B_perp,
                                    base_energy=inst.base_energy, seed=inst.seed)
    H = dense_hamiltonian(inst, driver)
    vals, vecs = np.linalg.eigh(H)
    return vals, vecs


def transition_probability(eigs, z0: int, z: int, t):
    """P(t, z | z0) = |sum_gamma <z|psi_gamma><psi_gamma|z0> e^{-i E_gamma t}|^2."""
    vals, vecs = eigs
    weights = vecs[z] * vecs[z0]
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    amp = np.exp(-1j * np.outer(t_arr, vals)) @ weights.astype(complex)
    P = np.abs(amp) ** 2
    return float(P[0]) if np.isscalar(t) or np.ndim(t) == 0 else P


def transition_distribution(eigs, z0: int, t: float) -> np.ndarray:
    """Full output distribution P(t, . | z0) in one matrix-vector product."""
    vals, vecs = eigs
    c = vecs[z0] * np.exp(-1j * vals * t)
    return np.abs(vecs @ c) ** 2


def survival_probability(eigs, z0: int, times):
    """psi^2(z0, t) = |sum_gamma |<psi_gamma|z0>|^2 e^{-i E_gamma t}|^2."""
    vals, vecs = eigs
    w = (vecs[z0] ** 2).astype(complex)
    t_arr = np.atleast_1d(np.asarray(times, dtype=float))
    amp = np.exp(-1j * np.outer(t_arr, vals)) @ w
    P = np.abs(amp) ** 2
    return float(P[0]) if np.ndim(times) == 0 else P


@dataclass
class PTResult:
    """Outcome of one transfer run: exact output distribution plus traces."""

    n: int
    z0: int
    total_time: float
    probabilities: np.ndarray
    times: np.ndarray
    survival: np.ndarray
    energy_edges: np.ndarray
    energy_hist: np.ndarray
    hamming_hist: np.ndarray
    transferred_weight: float
    saturated: bool | None = None
    ladder_times: list = field(default_factory=list)
    ladder_weights: list = field(default_factory=list)


def transferred_weight(inst, z0: int, probabilities: np.ndarray) -> float:
    """Weight moved out of |z0>: onto the other marked states for the
    impurity band, onto everything else for generic instances."""
    if isinstance(inst, ImpurityBandInstance):
        others = [z for z in inst.marked if z != z0]
        return float(probabilities[others].sum())
    return float(1.0 - probabilities[z0])


def run_pt_protocol(inst, z0: int, config: EvolutionConfig | None = None) -> PTResult:
    """Prepare |z0>, switch the driver on at constant strength, evolve, measure.

    The diabatic ramps are idealized as instantaneous. With
    config.total_time = None the run doubles its length until the
    transferred weight is stationary at the configured tolerance (the
    saturation criterion is a relative change below saturation_rtol over
    one doubling of t); otherwise it runs for exactly total_time.
    """
    config = config or EvolutionConfig()
    n = inst.n
    z0 = check_bitstring(z0, n)
    if n > TROTTER_MAX_N:
        raise ValueError(f"Trotter backend capped at n = {TROTTER_MAX_N}")
    E = all_classical_energies(inst)
    Dx = driver_x_diagonal(inst, config.driver)
    psi = StateVector.basis_state(n, z0).amplitudes

    ladder = config.total_time is None
    if ladder:
        dt = config.dt if config.dt is not None else 0.05
        seg_steps = max(1, int(round(config.start_time / dt)))
    else:
        steps = config.resolve_steps(config.total_time)
        dt = config.total_time / steps if steps else 0.0

    times = [0.0]
    survival = [1.0]
    ladder_times: list = []
    ladder_weights: list = []
    saturated: bool | None = None

    if not ladder and (config.total_time == 0.0 or dt == 0.0):
        probs = np.abs(psi) ** 2
        total_t = 0.0
    else:
        ph_cl, ph_half, ph_full = _phase_tables(E, Dx, dt)

        def advance(n_steps, t_base):
            nonlocal psi
            rec = max(1, n_steps // max(1, config.trace_points - 1))
            done = 0
            while done < n_steps:
                chunk = min(rec, n_steps - done)
                psi = _trotter_segment(psi, ph_cl, ph_half, ph_full, chunk,
                                       config.splitting)
                done += chunk
                times.append(t_base + done * dt)
                survival.append(float(np.abs(psi[z0]) ** 2))

        if ladder:
            advance(seg_steps, 0.0)
            total_steps = seg_steps
            w_prev = transferred_weight(inst, z0, np.abs(psi) ** 2)
            ladder_times.append(total_steps * dt)
            ladder_weights.append(w_prev)
            saturated = False
            for _ in range(config.max_doublings):
                advance(total_steps, total_steps * dt)
                total_steps *= 2
                w_new = transferred_weight(inst, z0, np.abs(psi) ** 2)
                ladder_times.append(total_steps * dt)
                ladder_weights.append(w_new)
                if abs(w_new - w_prev) <= config.saturation_rtol * max(w_new, 1e-12):
                    saturated = True
                    break
                w_prev = w_new
            total_t = total_steps * dt
        else:
            advance(steps, 0.0)
            total_t = config.total_time
        probs = np.abs(psi) ** 2

    edges = np.histogram_bin_edges(E, bins=64)
    e_hist, _ = np.histogram(E, bins=edges, weights=probs)
    d = np.bitwise_count(index_array(n) ^ np.uint64(z0)).astype(np.int64)
    h_hist = np.bincount(d, weights=probs, minlength=n + 1)
    return PTResult(
        n=n, z0=z0, total_time=float(total_t), probabilities=probs,
        times=np.asarray(times), survival=np.asarray(survival),
        energy_edges=edges, energy_hist=e_hist, hamming_hist=h_hist,
        transferred_weight=transferred_weight(inst, z0, probs),
        saturated=saturated, ladder_times=ladder_times,
        ladder_weights=ladder_weights,
    )


def sample_output(result: PTResult, shots: int, seed: int = 0) -> np.ndarray:
    """Draw measurement outcomes (basis-state labels) from the exact distribution."""
    rng = np.random.default_rng(seed)
    p = result.probabilities / result.probabilities.sum()
    return rng.choice(len(p), size=shots, p=p)
