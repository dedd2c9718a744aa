"""Effective marked-subspace Hamiltonian for the impurity-band model.

Away from resonances the transverse field only virtually visits the
unmarked states, so the dynamics inside the impurity band is captured by
an M x M matrix: strip energies on the diagonal, pairwise tunneling
amplitudes off the diagonal. The closed-form amplitude at Hamming
distance d is

    V(d) = sqrt(A) * n^(5/4) * exp(-n*theta(B)) / sqrt(C(n, d)),

with theta the inverse-field series and A a smooth prefactor taken as 1
by default. The squared amplitude ratio w = V^2(d)/V_typ^2 follows the
heavy-tailed law PDF(w) = 1/(w^2 sqrt(pi log w)) for large n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .instances import ImpurityBandInstance


@dataclass(frozen=True)
class TunnelingParams:
    n: int
    B_perp: float
    amplitude_prefactor_mode: str = "unit_A"
    phase_mode: str = "random_sign"
    calibration_A: float = 1.0
    diagonal_shift: float | None = None

    def __post_init__(self):
        if self.B_perp <= 0:
            raise ValueError("B_perp must be positive")
        if self.amplitude_prefactor_mode not in ("unit_A", "calibrated_A"):
            raise ValueError("amplitude_prefactor_mode must be unit_A or calibrated_A")
        if self.phase_mode not in ("random_sign", "random_phase", "numeric_extraction"):
            raise ValueError(
                "phase_mode must be random_sign, random_phase or numeric_extraction")

    @property
    def A(self) -> float:
        return self.calibration_A if self.amplitude_prefactor_mode == "calibrated_A" else 1.0

    @property
    def shift(self) -> float:
        # Second-order common shift of the marked levels; any common value
        # drops out of the intra-band dynamics.
        if self.diagonal_shift is not None:
            return self.diagonal_shift
        return -self.B_perp ** 2


@dataclass
class DownfoldedMatrix:
    """Real symmetric M x M effective Hamiltonian plus its build metadata."""

    matrix: np.ndarray
    V_typ: float
    W: float
    B_perp: float | None = None
    n: int | None = None
    shift: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("matrix must be exactly symmetric")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        self.matrix = m

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix)

    @property
    def offdiagonal(self) -> np.ndarray:
        out = self.matrix.copy()
        np.fill_diagonal(out, 0.0)
        return out


def theta(B_perp: float) -> float:
    """Truncated inverse-field series 1/(4B^2) + 1/(24B^4) + 1/(60B^6).

    The series is asymptotic in large B; values at B_perp <= 1 are
    returned with a validity warning instead of an error so sweeps can
    cross the boundary.
    """
    if B_perp <= 0:
        raise ValueError("B_perp must be positive")
    if B_perp <= 1:
        warnings.warn("theta series is asymptotic in large B_perp; "
                      f"B_perp = {B_perp} is outside its validity range",
                      stacklevel=2)
    b2 = B_perp * B_perp
    return 1.0 / (4 * b2) + 1.0 / (24 * b2 ** 2) + 1.0 / (60 * b2 ** 3)


def v_typ(n: int, B_perp: float) -> float:
    """Typical tunneling scale n^2 2^{-n/2} e^{-n/(4B^2)} (unit prefactor).

    Uses only the leading theta term, matching the quoted asymptotic
    form; tunneling_amplitude keeps the full series.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if B_perp <= 0:
        raise ValueError("B_perp must be positive")
    return n * n * 2.0 ** (-n / 2.0) * math.exp(-n / (4.0 * B_perp ** 2))


def _log_binomial(n: int, d: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(d + 1) - math.lgamma(n - d + 1)


def tunneling_amplitude(d: int, params: TunnelingParams) -> float:
    """V(d) = sqrt(A) n^{5/4} e^{-n theta} / sqrt(C(n, d)); logs avoid overflow."""
    n = params.n
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got d = {d}")
    log_v = (0.5 * math.log(params.A) + 1.25 * math.log(n)
             - n * theta(params.B_perp) - 0.5 * _log_binomial(n, d))
    return math.exp(log_v)


def amplitude_table(params: TunnelingParams) -> np.ndarray:
    """V(d) for d = 0..n in one pass (entry 0 unused, set to 0)."""
    n = params.n
    th = theta(params.B_perp)
    log_c = np.array([_log_binomial(n, d) for d in range(n + 1)])
    tab = np.exp(0.5 * math.log(params.A) + 1.25 * math.log(n) - n * th - 0.5 * log_c)
    tab[0] = 0.0
    return tab


def reference_amplitude(params: TunnelingParams) -> float:
    """Amplitude at the typical distance d = n//2 (normalizes w below)."""
    return tunneling_amplitude(params.n // 2, params)


def build_downfolded(inst: ImpurityBandInstance, params: TunnelingParams,
                     seed: int = 0) -> DownfoldedMatrix:
    """Assemble the M x M effective matrix for a concrete instance.

    Off-diagonal magnitudes are V(d_ij); the unknown phase factor is
    drawn per phase_mode: independent signs (default) or sqrt(2) sin of
    a uniform phase. numeric_extraction instead projects the exact
    Hamiltonian onto its M impurity-band eigenstates (n <= 14) and keeps
    whatever diagonal that projection produces.
    """
    if inst.n != params.n:
        raise ValueError("instance and params disagree on n")
    M = inst.M
    if params.phase_mode == "numeric_extraction":
        mat = _numeric_downfold(inst)
        shift = float(np.mean(np.diag(mat) - inst.eps)) if M else 0.0
    else:
        rng = np.random.default_rng(seed)
        z = np.fromiter(inst.marked, dtype=np.uint64)
        dist = np.bitwise_count(z[:, None] ^ z[None, :]).astype(np.int64)
        V = amplitude_table(params)[dist]
        iu = np.triu_indices(M, 1)
        if params.phase_mode == "random_sign":
            phase = rng.choice(np.array([-1.0, 1.0]), size=len(iu[0]))
        else:
            phase = math.sqrt(2.0) * np.sin(rng.uniform(0.0, 2.0 * math.pi,
                                                        size=len(iu[0])))
        mat = np.zeros((M, M))
        mat[iu] = V[iu] * phase
        mat = mat + mat.T
        shift = params.shift
        mat[np.diag_indices(M)] = inst.eps + shift
    return DownfoldedMatrix(matrix=mat, V_typ=reference_amplitude(params),
                            W=inst.W, B_perp=params.B_perp, n=inst.n, shift=shift)


def _numeric_downfold(inst: ImpurityBandInstance) -> np.ndarray:
    """Orthogonalized projection of the dense H onto the band eigenstates.

    The M eigenstates with the largest total marked weight define the
    band; projecting onto the marked basis and symmetrically
    orthogonalizing yields an M x M matrix whose spectrum equals the band
    eigenvalues whenever the overlap matrix is well conditioned.
    """
    from .statevector import exact_eigs

    vals, vecs = exact_eigs(inst)
    marked = np.fromiter(inst.marked, dtype=np.int64)
    amp = vecs[marked, :]
    weight = (amp ** 2).sum(axis=0)
    sel = np.sort(np.argsort(weight)[-inst.M:])
    A = amp[:, sel]
    S = A @ A.T
    s_vals, s_vecs = np.linalg.eigh(S)
    if s_vals.min() < 1e-10:
        raise ValueError("band projection is ill-conditioned; marked states "
                         "hybridize too strongly with the bulk")
    S_inv_half = (s_vecs / np.sqrt(s_vals)) @ s_vecs.T
    H_eff = S_inv_half @ (A * vals[sel]) @ A.T @ S_inv_half
    H_eff = 0.5 * (H_eff + H_eff.T)
    # remove the common band offset so the diagonal reads eps + shift
    H_eff[np.diag_indices(inst.M)] -= inst.base_energy
    return H_eff


def pdf_w(w):
    """Density 1/(w^2 sqrt(pi log w)) of the squared amplitude ratio, w > 1."""
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr <= 1.0):
        raise ValueError("the density is supported on w > 1")
    out = 1.0 / (w_arr ** 2 * np.sqrt(np.pi * np.log(w_arr)))
    return float(out) if np.ndim(w) == 0 else out


def cdf_w(w):
    """CDF erf(sqrt(log w)); log w is Gamma(1/2, 1) distributed."""
    from scipy.special import erf

    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 1.0):
        raise ValueError("the law is supported on w >= 1")
    out = erf(np.sqrt(np.log(w_arr)))
    return float(out) if np.ndim(w) == 0 else out


def sample_w(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Physical sampler: d ~ Binomial(n, 1/2) conditioned on d >= 1,
    w = V^2(d)/V^2(n//2) in unit-prefactor mode."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = rng.binomial(n, 0.5, size=count)
    while np.any(d < 1):
        redo = d < 1
        d[redo] = rng.binomial(n, 0.5, size=int(redo.sum()))
    # w = C(n, n//2) / C(n, d), computed in logs
    log_ref = _log_binomial(n, n // 2)
    log_c = np.array([_log_binomial(n, k) for k in range(n + 1)])
    return np.exp(log_ref - log_c[d])


def extract_numeric_elements(inst: ImpurityBandInstance,
                             atol: float = 1e-9) -> float:
    """|V| between two degenerate marked states, read off the exact spectrum.

    For a resonant pair the two band eigenvalues split by 2|V|; the band
    states are identified by their marked weight. Requires M = 2 and
    eps_1 = eps_2 within atol.
    """
    from .statevector import exact_eigs

    if inst.M != 2:
        raise ValueError("needs exactly two marked states")
    if abs(inst.eps[0] - inst.eps[1]) > atol:
        raise ValueError("marked energies must be degenerate for a resonant pair")
    vals, vecs = exact_eigs(inst)
    marked = np.fromiter(inst.marked, dtype=np.int64)
    weight = (vecs[marked, :] ** 2).sum(axis=0)
    sel = np.argsort(weight)[-2:]
    return float(abs(vals[sel[0]] - vals[sel[1]]) / 2.0)


def calibrate_prefactor(n: int, B_perp: float, distances, seed: int = 0) -> float:
    """Fit the d-independent prefactor A from resonant-pair numerics.

    For each requested distance a degenerate two-state instance is built
    (first state random, second at the given Hamming distance), the
    numeric |V| extracted, and A_d = (|V| / V_unit(d))^2 computed; the
    geometric mean over distances is returned.
    """
    params = TunnelingParams(n=n, B_perp=B_perp)
    rng = np.random.default_rng(seed)
    logs = []
    for d in distances:
        z1 = int(rng.integers(0, 1 << n))
        flip = rng.permutation(n)[:d]
        z2 = z1
        for b in flip:
            z2 ^= 1 << int(b)
        inst = ImpurityBandInstance(n=n, marked=(z1, z2), eps=np.zeros(2),
                                    W=1.0, B_perp=B_perp)
        v_num = extract_numeric_elements(inst)
        logs.append(2.0 * (math.log(v_num) - math.log(tunneling_amplitude(d, params))))
    return math.exp(float(np.mean(logs)))
