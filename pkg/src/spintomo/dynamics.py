"""Piecewise-constant control dynamics for a probed spin.

A :class:`ControlWaveform` describes the drive: a magnetic field of fixed
magnitude rotating in the x-y plane (angle ``phi`` per segment, Larmor rate
``omega_larmor``) plus the constant nonlinear term ``chi * Fx^2`` and an
optional Lindblad channel at rate ``gamma_dec``. States evolve in the
Schrodinger picture with :func:`propagate_state`; the probed observable
evolves in the Heisenberg picture with :func:`heisenberg_history`, which
also assembles the design matrix used for estimation.

Evolution is represented in the real coordinates of the Hermitian operator
basis, where a Lindblad generator is a d^2 x d^2 real matrix. Segment
exponentials use scaling-and-squaring Pade (scipy ``expm``); pure-state
unitaries use Hermitian eigendecomposition.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import serialize
from .spin_algebra import (
    SpinSystem,
    check_density_matrix,
    coords_to_state,
    hermitian_basis,
    is_hermitian,
    state_to_coords,
)

__all__ = [
    "ControlWaveform",
    "ObservableHistory",
    "step_hamiltonian",
    "step_propagator",
    "lindblad_superoperator",
    "resolve_jump_ops",
    "sample_times",
    "propagate_state",
    "heisenberg_history",
    "write_history",
    "read_history",
]

JUMP_PRESETS = ("isotropic", "none")
HISTORY_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ControlWaveform:
    """Piecewise-constant control schedule.

    ``phi`` holds one field angle (radians, x-y plane) per segment of
    length ``dt``; ``omega_larmor`` is the Larmor rate of the transverse
    field, ``chi`` the strength of the Fx^2 term, and ``gamma_dec`` the
    rate of the decoherence channel selected by ``jump_ops`` (a preset
    name, or an explicit tuple of jump matrices).
    """

    n_steps: int
    dt: float
    phi: tuple[float, ...]
    omega_larmor: float
    chi: float
    gamma_dec: float = 0.0
    jump_ops: str | tuple[np.ndarray, ...] = "isotropic"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("waveform needs at least one segment")
        if not self.dt > 0:
            raise ValueError("segment duration dt must be positive")
        phi = tuple(float(p) for p in self.phi)
        if len(phi) != self.n_steps:
            raise ValueError(f"phi has {len(phi)} entries for {self.n_steps} segments")
        object.__setattr__(self, "phi", phi)
        for name in ("omega_larmor", "chi", "gamma_dec"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if isinstance(self.jump_ops, str):
            if self.jump_ops not in JUMP_PRESETS:
                raise ValueError(f"unknown jump preset {self.jump_ops!r}")
        else:
            ops = tuple(np.asarray(op, dtype=complex) for op in self.jump_ops)
            for op in ops:
                op.setflags(write=False)
            object.__setattr__(self, "jump_ops", ops)

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def with_scales(self, omega_scale: float = 1.0, chi_scale: float = 1.0) -> "ControlWaveform":
        """Copy with the Larmor and nonlinear rates multiplied by scale factors."""
        return replace(
            self,
            omega_larmor=self.omega_larmor * omega_scale,
            chi=self.chi * chi_scale,
        )

    def fingerprint(self) -> str:
        """Content hash identifying this waveform (16 hex chars)."""
        parts = [
            "spintomo.waveform/1",
            f"n_steps={self.n_steps}",
            f"dt={serialize.format_float(self.dt)}",
            "phi=" + ",".join(serialize.format_float(p) for p in self.phi),
            f"omega_larmor={serialize.format_float(self.omega_larmor)}",
            f"chi={serialize.format_float(self.chi)}",
            f"gamma_dec={serialize.format_float(self.gamma_dec)}",
        ]
        if isinstance(self.jump_ops, str):
            parts.append(f"jumps={self.jump_ops}")
        else:
            flat = []
            for op in self.jump_ops:
                flat.extend(
                    serialize.format_float(v)
                    for z in op.ravel()
                    for v in (z.real, z.imag)
                )
            parts.append("jumps=explicit:" + ",".join(flat))
        digest = hashlib.sha256("|".join(parts).encode("ascii")).hexdigest()
        return digest[:16]


def resolve_jump_ops(sys: SpinSystem, spec) -> tuple[np.ndarray, ...]:
    """Expand a jump-operator preset name into matrices."""
    if isinstance(spec, str):
        if spec == "isotropic":
            return (sys.Fx, sys.Fy, sys.Fz)
        if spec == "none":
            return ()
        raise ValueError(f"unknown jump preset {spec!r}")
    ops = tuple(np.asarray(op, dtype=complex) for op in spec)
    for op in ops:
        if op.shape != (sys.d, sys.d):
            raise ValueError(f"jump operator has shape {op.shape}, expected {(sys.d, sys.d)}")
    return ops


def step_hamiltonian(sys: SpinSystem, waveform: ControlWaveform, step_index: int) -> np.ndarray:
    """Hamiltonian of segment ``step_index``: field term plus chi * Fx^2."""
    if not 0 <= step_index < waveform.n_steps:
        raise IndexError(f"step index {step_index} out of range 0..{waveform.n_steps - 1}")
    angle = waveform.phi[step_index]
    H = waveform.omega_larmor * (np.cos(angle) * sys.Fx + np.sin(angle) * sys.Fy)
    if waveform.chi:
        H = H + waveform.chi * (sys.Fx @ sys.Fx)
    return H


def step_propagator(H: np.ndarray, dt: float) -> np.ndarray:
    """Unitary exp(-i H dt) via eigendecomposition of Hermitian H.

    ``dt`` may be negative, which steps the evolution backward.
    """
    H = np.asarray(H, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    if not is_hermitian(H, tol=1e-10 * scale):
        raise ValueError("step_propagator requires a Hermitian matrix")
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * dt)) @ V.conj().T


def lindblad_superoperator(
    sys: SpinSystem,
    H: np.ndarray,
    gamma_dec: float = 0.0,
    jump_ops: tuple[np.ndarray, ...] = (),
) -> np.ndarray:
    """Lindblad generator as a real d^2 x d^2 matrix on basis coordinates.

    L(rho) = -i[H, rho] + gamma * sum_k (A_k rho A_k^dag
    - {A_k^dag A_k, rho} / 2). Trace preservation shows up as an all-zero
    top row, so coordinate 0 is conserved by the flow.
    """
    H = np.asarray(H, dtype=complex)
    if H.shape != (sys.d, sys.d):
        raise ValueError(f"Hamiltonian has shape {H.shape}, expected {(sys.d, sys.d)}")
    jumps = [np.asarray(A, dtype=complex) for A in jump_ops] if gamma_dec > 0 else []
    for A in jumps:
        if A.shape != (sys.d, sys.d):
            raise ValueError(f"jump operator has shape {A.shape}, expected {(sys.d, sys.d)}")
    anticomm = None
    if jumps:
        anticomm = sum(A.conj().T @ A for A in jumps)
    basis = hermitian_basis(sys)
    columns = np.empty((sys.d * sys.d, sys.d * sys.d), dtype=float)
    for b, B in enumerate(basis.elements):
        LB = -1j * (H @ B - B @ H)
        if jumps:
            diss = sum(A @ B @ A.conj().T for A in jumps)
            LB = LB + gamma_dec * (diss - 0.5 * (anticomm @ B + B @ anticomm))
        columns[:, b] = state_to_coords(LB)
    return columns


def sample_times(waveform: ControlWaveform, n_samples: int) -> np.ndarray:
    """Uniform sample grid t_i = i * duration / n_samples, starting at 0."""
    _samples_per_step(waveform, n_samples)
    return np.arange(n_samples) * (waveform.duration / n_samples)


def _samples_per_step(waveform: ControlWaveform, n_samples: int) -> int:
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if n_samples % waveform.n_steps != 0:
        raise ValueError(
            f"n_samples={n_samples} must be a multiple of n_steps={waveform.n_steps} "
            "so every sample interval lies inside one segment"
        )
    return n_samples // waveform.n_steps


def _segment_maps(
    sys: SpinSystem, waveform: ControlWaveform, n_samples: int, substeps: int
) -> tuple[list[np.ndarray], int]:
    """Per-segment coordinate transfer map over one sample interval."""
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    per_step = _samples_per_step(waveform, n_samples)
    dt_sub = waveform.dt / (per_step * substeps)
    jumps = resolve_jump_ops(sys, waveform.jump_ops)
    maps = []
    for s in range(waveform.n_steps):
        H = step_hamiltonian(sys, waveform, s)
        gen = lindblad_superoperator(sys, H, waveform.gamma_dec, jumps)
        sub = expm(gen * dt_sub)
        maps.append(np.linalg.matrix_power(sub, substeps))
    return maps, per_step


def propagate_state(
    rho0: np.ndarray,
    sys: SpinSystem,
    waveform: ControlWaveform,
    n_samples: int = 150,
    substeps: int = 4,
) -> list[np.ndarray]:
    """Schrodinger-picture states at every sample time (element 0 is rho0)."""
    rho0 = check_density_matrix(rho0, sys.d)
    maps, per_step = _segment_maps(sys, waveform, n_samples, substeps)
    coords = state_to_coords(rho0)
    states = [rho0.copy()]
    for i in range(n_samples - 1):
        coords = maps[i // per_step] @ coords
        states.append(coords_to_state(coords))
    return states


@dataclass(frozen=True, eq=False)
class ObservableHistory:
    """Heisenberg-evolved observables {O_i} and the induced design matrix.

    Row i of ``design_matrix`` is the coordinate vector of O_i, so
    Tr[O_i rho] = design_matrix[i] @ coords(rho) for any state rho.
    """

    times: np.ndarray
    observables: np.ndarray  # (N, d, d) complex
    design_matrix: np.ndarray  # (N, d*d) real
    waveform_fingerprint: str

    def __post_init__(self):
        n = len(self.times)
        if self.observables.shape[0] != n or self.design_matrix.shape[0] != n:
            raise ValueError("times, observables and design matrix lengths disagree")
        if self.design_matrix.shape[1] != self.d * self.d:
            raise ValueError("design matrix width must be d^2")
        for arr in (self.times, self.observables, self.design_matrix):
            arr.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def d(self) -> int:
        return self.observables.shape[1]


def heisenberg_history(
    sys: SpinSystem,
    waveform: ControlWaveform,
    observable: np.ndarray,
    n_samples: int = 150,
    substeps: int = 4,
) -> ObservableHistory:
    """Adjoint-propagate an observable over the sample grid.

    The returned O_i satisfy Tr[O_i rho0] = Tr[O rho(t_i)] for every
    initial state, with rho(t) the Schrodinger-picture evolution under the
    same waveform.
    """
    observable = np.asarray(observable, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(observable))) if observable.size else 1.0)
    if observable.shape != (sys.d, sys.d) or not is_hermitian(observable, tol=1e-10 * scale):
        raise ValueError("observable must be a Hermitian d x d matrix")
    maps, per_step = _segment_maps(sys, waveform, n_samples, substeps)
    dim = sys.d * sys.d
    target = state_to_coords(observable)
    rows = np.empty((n_samples, dim), dtype=float)
    rows[0] = target
    # cumulative state-transfer map; the Heisenberg row is its transpose
    # applied to the observable coordinates
    cumulative = np.eye(dim)
    for i in range(n_samples - 1):
        cumulative = maps[i // per_step] @ cumulative
        rows[i + 1] = cumulative.T @ target
    observables = np.empty((n_samples, sys.d, sys.d), dtype=complex)
    observables[0] = observable
    for i in range(1, n_samples):
        observables[i] = coords_to_state(rows[i])
    return ObservableHistory(
        times=sample_times(waveform, n_samples),
        observables=observables,
        design_matrix=rows,
        waveform_fingerprint=waveform.fingerprint(),
    )


def write_history(history: ObservableHistory, path) -> None:
    """Cache an observable history as a versioned JSON document."""
    doc = {
        "version": HISTORY_FORMAT_VERSION,
        "F": (history.d - 1) / 2.0,
        "times": [float(t) for t in history.times],
        "observables": [serialize.matrix_to_pairs(O) for O in history.observables],
        "design_matrix": [[float(v) for v in row] for row in history.design_matrix],
        "waveform_fingerprint": history.waveform_fingerprint,
    }
    serialize.dump_path(doc, path)


def read_history(path) -> ObservableHistory:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"history file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("history document must be a JSON object")
    required = {"version", "F", "times", "observables", "design_matrix", "waveform_fingerprint"}
    missing = required - set(doc)
    if missing:
        raise ValueError(f"history document missing field: {sorted(missing)[0]}")
    unknown = set(doc) - required
    if unknown:
        raise ValueError(f"history document has unknown field: {sorted(unknown)[0]}")
    if doc["version"] != HISTORY_FORMAT_VERSION:
        raise ValueError(f"unsupported history format version {doc['version']!r}")
    observables = np.stack(
        [serialize.pairs_to_matrix(rows, "observables") for rows in doc["observables"]]
    )
    return ObservableHistory(
        times=np.asarray(doc["times"], dtype=float),
        observables=observables,
        design_matrix=np.asarray(doc["design_matrix"], dtype=float),
        waveform_fingerprint=str(doc["waveform_fingerprint"]),
    )
