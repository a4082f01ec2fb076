"""Synthetic measurement records and their file format.

A record holds the coarse-grained samples M_i = Tr[O_i rho0] + noise, where
the noise is Gaussian with standard deviation sigma / sqrt(n_averaged).
Draw i comes from the counter-based stream keyed by the record seed (see
:mod:`spintomo.rand`), so records are bit-identical across runs and
platforms regardless of evaluation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rand, serialize
from .dynamics import ObservableHistory
from .spin_algebra import check_density_matrix, state_to_coords

__all__ = [
    "MeasurementRecord",
    "RecordFormatError",
    "synthesize_record",
    "noiseless_values",
    "write_record",
    "read_record",
]

RECORD_FORMAT_VERSION = 1

_RECORD_FIELDS = (
    "version",
    "F",
    "times",
    "values",
    "sigma",
    "seed",
    "n_averaged",
    "waveform_fingerprint",
)


class RecordFormatError(ValueError):
    """Raised for malformed, truncated, or wrong-version record documents."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """An immutable measurement record with its noise metadata."""

    F: float
    times: np.ndarray
    values: np.ndarray
    sigma: float
    seed: int
    n_averaged: int
    waveform_fingerprint: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) != len(values):
            raise ValueError("times and values must have the same length")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not isinstance(self.n_averaged, (int, np.integer)) or self.n_averaged < 1:
            raise ValueError("n_averaged must be an integer >= 1")
        rand.check_seed(self.seed)
        times.setflags(write=False)
        values.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return len(self.values)


def noiseless_values(rho0: np.ndarray, history: ObservableHistory) -> np.ndarray:
    """The exact expectation sequence Tr[O_i rho0]."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (history.d, history.d):
        raise ValueError(
            f"state dimension {rho0.shape} does not match history dimension {history.d}"
        )
    return history.design_matrix @ state_to_coords(rho0)


def synthesize_record(
    rho0: np.ndarray,
    history: ObservableHistory,
    sigma: float,
    seed: int,
    n_averaged: int = 1,
) -> MeasurementRecord:
    """Simulate one measurement record of ``rho0`` against a history.

    With ``n_averaged`` > 1 the record stands for the mean of that many
    identically-driven shots, so the additive noise per sample has standard
    deviation sigma / sqrt(n_averaged). ``sigma`` = 0 returns the exact
    expectation values with no generator draws.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    check_density_matrix(rho0, history.d)
    clean = noiseless_values(rho0, history)
    if sigma > 0:
        scale = sigma / math.sqrt(n_averaged)
        noise = np.array([rand.normal_at(seed, i) for i in range(len(clean))])
        values = clean + scale * noise
    else:
        rand.check_seed(seed)
        values = clean
    return MeasurementRecord(
        F=(history.d - 1) / 2.0,
        times=history.times.copy(),
        values=values,
        sigma=float(sigma),
        seed=int(seed),
        n_averaged=int(n_averaged),
        waveform_fingerprint=history.waveform_fingerprint,
    )


def write_record(record: MeasurementRecord, path) -> None:
    """Write the versioned JSON record document (deterministic bytes)."""
    doc = {
        "version": RECORD_FORMAT_VERSION,
        "F": float(record.F),
        "times": [float(t) for t in record.times],
        "values": [float(v) for v in record.values],
        "sigma": float(record.sigma),
        "seed": int(record.seed),
        "n_averaged": int(record.n_averaged),
        "waveform_fingerprint": record.waveform_fingerprint,
    }
    serialize.dump_path(doc, path)


def read_record(path) -> MeasurementRecord:
    """Parse a record document; strict about version and field set."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"record file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise RecordFormatError("record document must be a JSON object")
    for field in _RECORD_FIELDS:
        if field not in doc:
            raise RecordFormatError(f"record document missing field: {field}", field=field)
    unknown = set(doc) - set(_RECORD_FIELDS)
    if unknown:
        field = sorted(unknown)[0]
        raise RecordFormatError(f"record document has unknown field: {field}", field=field)
    if doc["version"] != RECORD_FORMAT_VERSION:
        raise RecordFormatError(
            f"unsupported record format version {doc['version']!r}", field="version"
        )
    if not isinstance(doc["waveform_fingerprint"], str) or not doc["waveform_fingerprint"]:
        raise RecordFormatError("waveform_fingerprint must be a nonempty string",
                                field="waveform_fingerprint")
    try:
        seed = int(doc["seed"])
        n_averaged = int(doc["n_averaged"])
    except (TypeError, ValueError) as exc:
        raise RecordFormatError(f"seed and n_averaged must be integers: {exc}") from exc
    return MeasurementRecord(
        F=float(doc["F"]),
        times=np.asarray(doc["times"], dtype=float),
        values=np.asarray(doc["values"], dtype=float),
        sigma=float(doc["sigma"]),
        seed=seed,
        n_averaged=n_averaged,
        waveform_fingerprint=doc["waveform_fingerprint"],
    )
