"""Quantum-state math: density matrices, the tetrahedral POVM, Born
probabilities, linear state reconstruction, operator expectations, fidelity,
Kullback-Leibler divergence, and the CHSH Bell-correlation witness.

Conventions used throughout:

* Qubit 1 is the most significant tensor factor, i.e. an N-qubit operator is
  ``A_1 (x) A_2 (x) ... (x) A_N`` with numpy ``kron`` in that order.
* A measurement record ``a = (a_1, ..., a_N)`` with ``a_i in {0,1,2,3}`` is
  flattened to the index ``a_1*4^(N-1) + ... + a_N`` (big-endian base 4).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
PSD_ATOL = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_hermitian(m: np.ndarray, what: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {m.shape}")
    dev = np.abs(m - m.conj().T).max()
    if dev > HERMITIAN_ATOL:
        raise ValueError(f"{what} is not Hermitian (max |m - m^dag| = {dev:.3e})")


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, trace-1 matrix on N qubits.

    Positive semi-definiteness is required for constructed states; matrices
    reconstructed from sampled probabilities may carry small negative
    eigenvalues and are kept with ``min_eigenvalue`` recording the violation
    (``is_psd`` is False for those).
    """

    n_qubits: int
    entries: np.ndarray
    min_eigenvalue: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        dim = 2 ** self.n_qubits
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix for {self.n_qubits} qubits, got {m.shape}")
        _check_hermitian(m, "density matrix")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"density matrix trace {tr} differs from 1")
        object.__setattr__(self, "entries", _as_readonly(m))

    @classmethod
    def from_matrix(cls, entries: np.ndarray, *, allow_non_psd: bool = False) -> "DensityMatrix":
        """Validate and wrap a matrix; rejects non-PSD input unless allowed."""
        m = np.asarray(entries, dtype=complex)
        n_qubits = int(round(np.log2(m.shape[0]))) if m.ndim == 2 and m.shape[0] > 0 else 0
        if m.ndim != 2 or m.shape != (2 ** n_qubits, 2 ** n_qubits) or n_qubits < 1:
            raise ValueError(f"matrix shape {m.shape} is not 2^N x 2^N with N >= 1")
        _check_hermitian(m, "density matrix")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -PSD_ATOL and not allow_non_psd:
            raise ValueError(f"density matrix is not PSD (min eigenvalue {lam_min:.3e})")
        return cls(n_qubits, m, min_eigenvalue=min(lam_min, 0.0))

    @property
    def is_psd(self) -> bool:
        return self.min_eigenvalue >= -PSD_ATOL

    def to_json(self) -> dict:
        m = self.entries.reshape(-1)
        return {"n_qubits": self.n_qubits, "re": m.real.tolist(), "im": m.imag.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        n = int(obj["n_qubits"])
        dim = 2 ** n
        m = (np.asarray(obj["re"], float) + 1j * np.asarray(obj["im"], float)).reshape(dim, dim)
        lam_min = float(np.linalg.eigvalsh(m)[0])
        return cls(n, m, min_eigenvalue=min(lam_min, 0.0))


@dataclass(frozen=True)
class TetrahedralPovm:
    """The 4-outcome single-qubit POVM whose Bloch vectors span a regular
    tetrahedron, plus the inverse overlap matrix used for reconstruction."""

    bloch_vectors: np.ndarray   # (4, 3)
    elements: np.ndarray        # (4, 2, 2) complex
    overlap_inverse: np.ndarray  # (4, 4) real

    def __post_init__(self):
        object.__setattr__(self, "bloch_vectors", _as_readonly(np.asarray(self.bloch_vectors, float)))
        object.__setattr__(self, "elements", _as_readonly(np.asarray(self.elements, complex)))
        object.__setattr__(self, "overlap_inverse", _as_readonly(np.asarray(self.overlap_inverse, float)))


def make_tetrahedral_povm() -> TetrahedralPovm:
    """Build the tetrahedral POVM ``M_a = (1 + s_a . sigma) / 4``.

    The four Bloch vectors are (0,0,1), (2*sqrt2,0,-1)/3, (-sqrt2,+sqrt6,-1)/3
    and (-sqrt2,-sqrt6,-1)/3.  The single-qubit overlap matrix
    ``T_{ab} = Tr[M_a M_b]`` has the exact integer inverse ``6*I - J``.
    """
    s = np.array([
        [0.0, 0.0, 1.0],
        [2.0 * np.sqrt(2.0) / 3.0, 0.0, -1.0 / 3.0],
        [-np.sqrt(2.0) / 3.0, np.sqrt(6.0) / 3.0, -1.0 / 3.0],
        [-np.sqrt(2.0) / 3.0, -np.sqrt(6.0) / 3.0, -1.0 / 3.0],
    ])
    elements = np.stack([
        (IDENTITY_2 + v[0] * PAULI_X + v[1] * PAULI_Y + v[2] * PAULI_Z) / 4.0 for v in s
    ])
    t_inv = 6.0 * np.eye(4) - np.ones((4, 4))
    return TetrahedralPovm(bloch_vectors=s, elements=elements, overlap_inverse=t_inv)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities over the 4^N outcomes of the per-qubit tetrahedral POVM."""

    n_qubits: int
    probs: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (4 ** self.n_qubits,):
            raise ValueError(f"expected {4 ** self.n_qubits} probabilities, got shape {p.shape}")
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "probs", _as_readonly(p))

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "probs": self.probs.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "OutcomeDistribution":
        return cls(int(obj["n_qubits"]), np.asarray(obj["probs"], float))


@dataclass(frozen=True)
class Observable:
    """Hermitian operator on N qubits."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        _check_hermitian(m, "observable")
        object.__setattr__(self, "entries", _as_readonly(m))

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.entries.shape[0])))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def bell_state() -> DensityMatrix:
    """|Psi+><Psi+| with |Psi+> = (|00> + |11>)/sqrt(2)."""
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[0, 3] = m[3, 0] = m[3, 3] = 0.5
    return DensityMatrix(2, m)


def werner_state(r: float) -> DensityMatrix:
    """Convex mixture r*bell + (1-r)*identity/4."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"werner parameter r={r} outside [0, 1]")
    m = r * bell_state().entries + (1.0 - r) * np.eye(4, dtype=complex) / 4.0
    return DensityMatrix(2, m)


def ghz_state(n: int) -> DensityMatrix:
    """N-qubit GHZ state (|0...0> + |1...1>)/sqrt(2) as a density matrix."""
    if n < 2:
        raise ValueError(f"GHZ state needs n >= 2 qubits, got {n}")
    dim = 2 ** n
    m = np.zeros((dim, dim), dtype=complex)
    m[0, 0] = m[0, -1] = m[-1, 0] = m[-1, -1] = 0.5
    return DensityMatrix(n, m)


# ---------------------------------------------------------------------------
# POVM maps
# ---------------------------------------------------------------------------

def _contract_with_elements(matrix: np.ndarray, n_qubits: int, povm: TetrahedralPovm) -> np.ndarray:
    """Return the tensor c[a_1..a_N] = Tr[matrix * (M_{a_1} (x) ... (x) M_{a_N})]
    as a flat real vector of length 4^N, without building any Kronecker products."""
    m4 = povm.elements  # (4, 2, 2), M[a, s', s] applied as sum_{s,s'} rho_{..s..s'..} M[a, s', s]
    t = matrix.reshape((2,) * (2 * n_qubits))
    for q in range(n_qubits):
        nrem = n_qubits - q
        # axes: (a_0..a_{q-1}, s_q..s_N, s'_q..s'_N); contract the leading s/s' pair
        t = np.tensordot(m4, t, axes=([1, 2], [q + nrem, q]))
        # tensordot put the new outcome axis first; move it behind earlier outcome axes
        t = np.moveaxis(t, 0, q)
    return np.real(t.reshape(-1))


def _apply_overlap_inverse(vec: np.ndarray, n_qubits: int, povm: TetrahedralPovm) -> np.ndarray:
    """Contract every base-4 axis of vec with the single-qubit T^{-1}."""
    t_inv = povm.overlap_inverse
    c = vec.reshape((4,) * n_qubits)
    for q in range(n_qubits):
        c = np.moveaxis(np.tensordot(t_inv, c, axes=([1], [q])), 0, q)
    return c.reshape(-1)


def born_distribution(rho: DensityMatrix, povm: TetrahedralPovm) -> OutcomeDistribution:
    """Outcome probabilities P(a) = Tr[rho * (M_{a_1} (x) ... (x) M_{a_N})]."""
    p = _contract_with_elements(np.asarray(rho.entries), rho.n_qubits, povm)
    return OutcomeDistribution(rho.n_qubits, p)


def reconstruct_density(p: OutcomeDistribution, povm: TetrahedralPovm) -> DensityMatrix:
    """Invert the Born map: rho = sum_a P(a) Q_a with
    Q_a = sum_{a'} (prod_i T^{-1}_{a_i a'_i}) M_{a'_1} (x) ... (x) M_{a'_N}.

    The result is Hermitian and trace-1 by construction; for sampled inputs it
    may fail positivity, which is recorded on the returned matrix rather than
    rejected.
    """
    n = p.n_qubits
    c = _apply_overlap_inverse(p.probs, n, povm)
    dim = 2 ** n
    # rho as a (2,2)-per-qubit tensor: contract each base-4 axis with M[a, s', s]
    t = c.reshape((4,) * n)
    rho = np.zeros((), dtype=complex)
    m4 = povm.elements
    # build sum_a c_a M_{a_1} (x) ... by sequential contraction into row/col axes
    t = np.tensordot(t, m4, axes=([0], [0]))  # axes: (a_2..a_N, s'_1, s_1)
    for _ in range(n - 1):
        t = np.tensordot(t, m4, axes=([0], [0]))
    # axes now (s'_1, s_1, s'_2, s_2, ...): reorder to rows then cols
    rows = tuple(range(0, 2 * n, 2))
    cols = tuple(range(1, 2 * n, 2))
    rho = np.transpose(t, rows + cols).reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)  # scrub roundoff asymmetry
    lam_min = float(np.linalg.eigvalsh(rho)[0])
    return DensityMatrix(n, rho, min_eigenvalue=min(lam_min, 0.0))


def expectation(p: OutcomeDistribution, obs: Observable, povm: TetrahedralPovm) -> float:
    """<O> = sum_a Q^O_a P(a) with Q^O_a = sum_{a'} Tr[O M_{a'_1} (x) ...] prod_i T^{-1}_{a_i a'_i}.

    Equals Tr[rho O] when p is the exact Born distribution of rho.
    """
    n = p.n_qubits
    if obs.entries.shape[0] != 2 ** n:
        raise ValueError(f"observable dimension {obs.entries.shape[0]} does not match {n} qubits")
    b = _contract_with_elements(np.asarray(obs.entries), n, povm)  # Tr[O (x)M_{a'}]
    q_o = _apply_overlap_inverse(b, n, povm)
    return float(np.dot(q_o, p.probs))


# ---------------------------------------------------------------------------
# witnesses and distances
# ---------------------------------------------------------------------------

def _measurement_axis(theta: float) -> np.ndarray:
    """O(theta) = cos(theta) sigma_z + sin(theta) sigma_x."""
    return np.cos(theta) * PAULI_Z + np.sin(theta) * PAULI_X


def bell_witness(p: OutcomeDistribution, theta: float, povm: TetrahedralPovm | None = None) -> float:
    """CHSH combination B(theta) = E(A1,B1) + E(A2,B1) + E(A1,B2) - E(A2,B2).

    Party A measures A1 = O(0) = sigma_z or A2 = O(pi/2) = sigma_x; party B
    measures B1 = O(theta) or B2 = O(-theta), all in the x-z plane.  Each
    correlator is evaluated from the outcome distribution alone.  |B| <= 2 for
    classical statistics; the Bell state reaches 2*sqrt(2) at theta = pi/4.
    """
    if p.n_qubits != 2:
        raise ValueError(f"bell_witness needs a two-qubit distribution, got {p.n_qubits} qubits")
    if povm is None:
        povm = make_tetrahedral_povm()
    a1, a2 = _measurement_axis(0.0), _measurement_axis(np.pi / 2)
    b1, b2 = _measurement_axis(theta), _measurement_axis(-theta)

    def corr(a, b):
        return expectation(p, Observable(np.kron(a, b)), povm)

    return corr(a1, b1) + corr(a2, b1) + corr(a1, b2) - corr(a2, b2)


def _psd_sqrt(m: np.ndarray, what: str) -> np.ndarray:
    """Matrix square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues in [-1e-10, 0) are clamped to zero; anything more negative is
    a real PSD violation and raises instead of being silently clamped.
    """
    w, u = np.linalg.eigh(m)
    if w[0] < -PSD_ATOL:
        raise ValueError(f"{what} is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T


def fidelity(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """Quantum fidelity F = Tr sqrt( sqrt(rho_a) rho_b sqrt(rho_a) ).

    ``rho_a`` must be PSD; ``rho_b`` may carry small negative eigenvalues
    (sampled reconstructions), in which case negative eigenvalues of the inner
    matrix are clamped to zero before the square root.
    """
    if rho_a.n_qubits != rho_b.n_qubits:
        raise ValueError("fidelity: dimension mismatch")
    sq = _psd_sqrt(np.asarray(rho_a.entries), "first fidelity argument")
    inner = sq @ np.asarray(rho_b.entries) @ sq
    inner = 0.5 * (inner + inner.conj().T)
    w = np.linalg.eigvalsh(inner)
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))


def dkl(p_target: np.ndarray, p_model: np.ndarray) -> float:
    """Kullback-Leibler divergence sum_v p*(v) ln[p*(v)/p(v)].

    Terms with p*(v) = 0 contribute nothing; returns inf if the model assigns
    zero probability to a target-supported state (no epsilon smoothing).
    """
    pt = np.asarray(p_target, dtype=float)
    pm = np.asarray(p_model, dtype=float)
    if pt.shape != pm.shape:
        raise ValueError(f"length mismatch: {pt.shape} vs {pm.shape}")
    support = pt > 0.0
    if np.any(pm[support] == 0.0):
        return float("inf")
    return float(np.sum(pt[support] * np.log(pt[support] / pm[support])))
