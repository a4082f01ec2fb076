"""Spin-F operator algebra and operator-space coordinates.

Conventions used across the package: hbar = 1, basis states ordered by
magnetic quantum number m = +F ... -F (row/column 0 is the stretched state
m = +F), Condon-Shortley phases. Density matrices are plain complex numpy
arrays validated with :func:`check_density_matrix` where a contract requires
a physical state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "SpinSystem",
    "HermitianBasis",
    "build_spin_system",
    "measured_observable",
    "hermitian_basis",
    "state_to_coords",
    "coords_to_state",
    "clebsch_gordan",
    "test_state",
    "check_density_matrix",
    "is_hermitian",
]


def _as_twice(name: str, value) -> int:
    """Validate a half-integer and return 2*value as an exact int."""
    twice = 2.0 * float(value)
    rounded = round(twice)
    if abs(twice - rounded) > 1e-9:
        raise ValueError(f"{name} must be an integer or half-integer, got {value}")
    return int(rounded)


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """Dimension and cached angular-momentum matrices for one spin F."""

    F: float
    d: int
    Fx: np.ndarray
    Fy: np.ndarray
    Fz: np.ndarray

    def __post_init__(self):
        for op in (self.Fx, self.Fy, self.Fz):
            op.setflags(write=False)

    @property
    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order, +F ... -F."""
        return self.F - np.arange(self.d)

    def index_of_m(self, m) -> int:
        tm = _as_twice("m", m)
        tF = round(2 * self.F)
        if (tF + tm) % 2 != 0 or abs(tm) > tF:
            raise ValueError(f"m={m} is not a level of a spin-{self.F} system")
        return (tF - tm) // 2


def build_spin_system(F) -> SpinSystem:
    """Construct Fx, Fy, Fz for spin F from the ladder-operator formula.

    F must be a positive integer or half-integer; the raising operator has
    matrix elements sqrt(F(F+1) - m(m+1)).
    """
    twice = _as_twice("F", F)
    if twice <= 0:
        raise ValueError(f"F must be at least 1/2, got {F}")
    Fval = twice / 2.0
    d = twice + 1
    m = Fval - np.arange(d)
    fplus = np.zeros((d, d), dtype=complex)
    for col in range(1, d):
        mm = m[col]
        fplus[col - 1, col] = math.sqrt(Fval * (Fval + 1) - mm * (mm + 1))
    fminus = fplus.conj().T
    fx = (fplus + fminus) / 2.0
    fy = (fplus - fminus) / 2.0j
    fz = np.diag(m.astype(complex))
    return SpinSystem(F=Fval, d=d, Fx=fx, Fy=fy, Fz=fz)


def measured_observable(sys: SpinSystem) -> np.ndarray:
    """The probed spin observable Fx*Fy + Fy*Fx (Hermitian, traceless)."""
    return sys.Fx @ sys.Fy + sys.Fy @ sys.Fx


@dataclass(frozen=True, eq=False)
class HermitianBasis:
    """Orthonormal Hermitian operator basis (generalized Gell-Mann).

    Element 0 is I/sqrt(d); elements 1 .. d^2-1 are traceless and mutually
    orthonormal under the Hilbert-Schmidt inner product. Coordinates of a
    Hermitian matrix in this basis are real, and the coordinate map is an
    isometry between the Hilbert-Schmidt and Euclidean norms.
    """

    d: int
    elements: np.ndarray  # (d*d, d, d) complex

    def __post_init__(self):
        self.elements.setflags(write=False)

    def to_coords(self, mat: np.ndarray) -> np.ndarray:
        return state_to_coords(mat)

    def from_coords(self, coords: np.ndarray) -> np.ndarray:
        return coords_to_state(coords)


@lru_cache(maxsize=None)
def _basis_elements(d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("dimension must be positive")
    elements = np.zeros((d * d, d, d), dtype=complex)
    elements[0] = np.eye(d) / math.sqrt(d)
    idx = 1
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = inv_sqrt2
            sym[k, j] = inv_sqrt2
            elements[idx] = sym
            idx += 1
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k] = -1j * inv_sqrt2
            anti[k, j] = 1j * inv_sqrt2
            elements[idx] = anti
            idx += 1
    for level in range(1, d):
        diag = np.zeros(d, dtype=complex)
        diag[:level] = 1.0
        diag[level] = -level
        elements[idx] = np.diag(diag / math.sqrt(level * (level + 1)))
        idx += 1
    elements.setflags(write=False)
    return elements


def hermitian_basis(sys: SpinSystem) -> HermitianBasis:
    """The cached d^2-element Hermitian basis for this system's dimension."""
    return HermitianBasis(d=sys.d, elements=_basis_elements(sys.d))


def state_to_coords(mat: np.ndarray) -> np.ndarray:
    """Real coordinate vector Tr[B_a mat] of a Hermitian matrix, length d^2."""
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    basis = _basis_elements(mat.shape[0])
    return np.einsum("aij,ij->a", basis.conj(), mat).real


def coords_to_state(coords: np.ndarray) -> np.ndarray:
    """Hermitian matrix with the given real basis coordinates."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 1:
        raise ValueError("coordinates must be a 1-d real vector")
    d = math.isqrt(coords.size)
    if d * d != coords.size:
        raise ValueError(f"coordinate length {coords.size} is not a perfect square")
    basis = _basis_elements(d)
    return np.einsum("a,aij->ij", coords, basis)


def _half_factorial(twice: int) -> int:
    # factorial of twice/2; twice must be even and nonnegative
    if twice < 0 or twice % 2 != 0:
        raise ValueError("internal: factorial argument must be a nonnegative integer")
    return math.factorial(twice // 2)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>, Condon-Shortley phase.

    Evaluated with the Racah single-sum closed form using exact integer
    factorial arithmetic; the only float operations are the final square
    root and division. Returns 0 for violated selection rules (M != m1+m2,
    triangle rule, |m| > j, parity); rejects non-half-integer inputs.
    """
    tj1 = _as_twice("j1", j1)
    tm1 = _as_twice("m1", m1)
    tj2 = _as_twice("j2", j2)
    tm2 = _as_twice("m2", m2)
    tJ = _as_twice("J", J)
    tM = _as_twice("M", M)
    for tj, name in ((tj1, "j1"), (tj2, "j2"), (tJ, "J")):
        if tj < 0:
            raise ValueError(f"{name} must be nonnegative")
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if abs(tm) > tj or (tj + tm) % 2 != 0:
            return 0.0
    if tM != tm1 + tm2:
        return 0.0
    if tJ < abs(tj1 - tj2) or tJ > tj1 + tj2:
        return 0.0
    if (tj1 + tj2 + tJ) % 2 != 0:
        return 0.0

    prefactor = Fraction(
        (tJ + 1)
        * _half_factorial(tj1 + tj2 - tJ)
        * _half_factorial(tj1 - tj2 + tJ)
        * _half_factorial(-tj1 + tj2 + tJ),
        _half_factorial(tj1 + tj2 + tJ + 2),
    )
    prefactor *= (
        _half_factorial(tJ + tM)
        * _half_factorial(tJ - tM)
        * _half_factorial(tj1 - tm1)
        * _half_factorial(tj1 + tm1)
        * _half_factorial(tj2 - tm2)
        * _half_factorial(tj2 + tm2)
    )

    a1 = (tj1 + tj2 - tJ) // 2
    a2 = (tj1 - tm1) // 2
    a3 = (tj2 + tm2) // 2
    b1 = (tJ - tj2 + tm1) // 2
    b2 = (tJ - tj1 - tm2) // 2
    kmin = max(0, -b1, -b2)
    kmax = min(a1, a2, a3)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        denom = (
            math.factorial(k)
            * math.factorial(a1 - k)
            * math.factorial(a2 - k)
            * math.factorial(a3 - k)
            * math.factorial(b1 + k)
            * math.factorial(b2 + k)
        )
        total += Fraction(-1 if k % 2 else 1, denom)
    if total == 0:
        return 0.0
    sign = 1.0 if total > 0 else -1.0
    return sign * math.sqrt(float(prefactor * total * total))


def _unitary(H: np.ndarray, t: float) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def test_state(sys: SpinSystem, kind: str, **params) -> np.ndarray:
    """Factory of benchmark input states.

    Parameters
    ----------
    kind:
        One of ``basis_state`` (requires ``m``), ``spin_coherent``
        (``theta``, optional ``phi``), ``cat``, ``mixed``, ``twisted``
        (requires ``mu``).

    Returns
    -------
    A d x d density matrix. ``basis_state`` gives the projector |m><m|;
    ``spin_coherent`` rotates the stretched state |m=+F> to polar angles
    (theta, phi); ``cat`` is the equal superposition
    (|m=+F> + i|m=-F>)/sqrt(2); ``mixed`` is I/d; ``twisted`` applies
    exp(-i mu Fx^2) to the stretched state.
    """
    d = sys.d

    def _only(*names):
        extra = set(params) - set(names)
        if extra:
            raise ValueError(f"unexpected parameters for kind {kind!r}: {sorted(extra)}")

    if kind == "basis_state":
        _only("m")
        if "m" not in params:
            raise ValueError("basis_state requires parameter m")
        ket = np.zeros(d, dtype=complex)
        ket[sys.index_of_m(params["m"])] = 1.0
    elif kind == "spin_coherent":
        _only("theta", "phi")
        if "theta" not in params:
            raise ValueError("spin_coherent requires parameter theta")
        theta = float(params["theta"])
        phi = float(params.get("phi", 0.0))
        axis = -math.sin(phi) * sys.Fx + math.cos(phi) * sys.Fy
        ket = _unitary(axis, theta)[:, 0]
    elif kind == "cat":
        _only()
        ket = np.zeros(d, dtype=complex)
        ket[0] = 1.0 / math.sqrt(2.0)
        ket[-1] = 1j / math.sqrt(2.0)
    elif kind == "mixed":
        _only()
        return np.eye(d, dtype=complex) / d
    elif kind == "twisted":
        _only("mu")
        if "mu" not in params:
            raise ValueError("twisted requires parameter mu")
        ket = _unitary(sys.Fx @ sys.Fx, float(params["mu"]))[:, 0]
    else:
        raise ValueError(f"unknown test state kind {kind!r}")
    ket = ket / np.linalg.norm(ket)
    return np.outer(ket, ket.conj())


def is_hermitian(mat: np.ndarray, tol: float = 1e-10) -> bool:
    mat = np.asarray(mat)
    return mat.ndim == 2 and mat.shape[0] == mat.shape[1] and bool(
        np.max(np.abs(mat - mat.conj().T)) <= tol
    )


def check_density_matrix(
    rho: np.ndarray,
    d: int | None = None,
    *,
    herm_tol: float = 1e-12,
    trace_tol: float = 1e-12,
    min_eigenvalue: float = -1e-10,
) -> np.ndarray:
    """Validate the physical-state contract; returns rho as a complex array.

    Raises ValueError naming the violated condition: Hermiticity, unit
    trace, or an eigenvalue below ``min_eigenvalue``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if d is not None and rho.shape[0] != d:
        raise ValueError(f"density matrix has dimension {rho.shape[0]}, expected {d}")
    herm_defect = float(np.max(np.abs(rho - rho.conj().T)))
    if herm_defect > herm_tol:
        raise ValueError(f"density matrix is not Hermitian (defect {herm_defect:.3e})")
    trace_defect = abs(np.trace(rho) - 1.0)
    if trace_defect > trace_tol:
        raise ValueError(f"density matrix trace differs from 1 by {trace_defect:.3e}")
    lo = float(np.linalg.eigvalsh(rho)[0])
    if lo < min_eigenvalue:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho
