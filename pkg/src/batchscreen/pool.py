"""Candidate pools and observation bookkeeping.

A screening campaign runs over a fixed, finite library of candidates. Each
candidate has an id, a feature vector, and a hidden target value that is only
looked up when the candidate is "revealed" (the simulation stand-in for
running the actual experiment). The pool tracks which indices have been
revealed and which are pending inside the current batch.

Internally the engine always maximizes. Libraries whose objective should be
minimized are sign-flipped at ingestion ("engine space"), and surrogate
models are fit on z-normalized engine-space targets. Raw values are kept
around untouched for traces and metrics.

Two on-disk formats are supported:

* ``feature-csv``: header ``id,target,f0,...,f{D-1}``, one dense row per
  candidate. Feature columns are z-scored per column at load time.
* ``fingerprint-hex-csv``: header ``id,target,fp_hex`` where ``fp_hex`` is a
  hex string; each hex digit expands to 4 bits, most significant bit first.
  Bit features are used as-is (never rescaled).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTargetsError,
    LibraryFormatError,
    PoolExhaustedError,
)

FEATURE_CSV = "feature-csv"
FINGERPRINT_CSV = "fingerprint-hex-csv"

_SENSES = ("maximize", "minimize")


def _sense_sign(sense: str) -> float:
    if sense not in _SENSES:
        raise ValueError(f"sense must be one of {_SENSES}, got {sense!r}")
    return 1.0 if sense == "maximize" else -1.0


def normalize_targets(values: np.ndarray, sense: str) -> tuple[np.ndarray, float, float]:
    """Map raw targets to zero-mean, unit-variance maximization space.

    Returns ``(normalized, mean, scale)`` where ``mean`` and ``scale`` are the
    location and population standard deviation of the sign-flipped values.
    Raises :class:`DegenerateTargetsError` when fewer than two distinct raw
    values are present, since no scale is then defined.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DegenerateTargetsError("need at least two target values to normalize")
    if np.unique(v).size < 2:
        raise DegenerateTargetsError("all raw targets are equal; scale is undefined")
    eng = _sense_sign(sense) * v
    mean = float(np.mean(eng))
    scale = float(np.std(eng))
    return (eng - mean) / scale, mean, scale


def denormalize_targets(
    normalized: np.ndarray, mean: float, scale: float, sense: str
) -> np.ndarray:
    """Invert :func:`normalize_targets` back to raw native-sense values."""
    return _sense_sign(sense) * (np.asarray(normalized, dtype=float) * scale + mean)


@dataclass
class ObservationSet:
    """Revealed (feature, target) pairs in engine space.

    ``y_engine`` holds sign-flipped raw values. The normalized view is
    recomputed from the current contents, so its location and scale drift as
    observations accumulate; surrogates are always fit on the current view.
    """

    indices: list[int] = field(default_factory=list)
    x_rows: list[np.ndarray] = field(default_factory=list)
    y_engine: list[float] = field(default_factory=list)

    def append(self, index: int, x: np.ndarray, y_eng: float) -> None:
        if index in self.indices:
            raise ValueError(f"candidate {index} observed twice")
        self.indices.append(index)
        self.x_rows.append(np.asarray(x, dtype=float))
        self.y_engine.append(float(y_eng))

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def features(self) -> np.ndarray:
        if not self.x_rows:
            return np.empty((0, 0))
        return np.vstack(self.x_rows)

    def normalization(self) -> tuple[float, float]:
        """Current (mean, scale); scale falls back to 1.0 while degenerate."""
        if not self.y_engine:
            return 0.0, 1.0
        y = np.asarray(self.y_engine)
        mean = float(np.mean(y))
        scale = float(np.std(y))
        if not np.isfinite(scale) or scale < 1e-12:
            scale = 1.0
        return mean, scale

    @property
    def y_normalized(self) -> np.ndarray:
        mean, scale = self.normalization()
        return (np.asarray(self.y_engine) - mean) / scale

    def incumbent_normalized(self) -> float:
        if not self.y_engine:
            raise ValueError("no observations yet")
        return float(np.max(self.y_normalized))


@dataclass(frozen=True)
class PoolView:
    """Read-only snapshot handed to selection code and remote workers."""

    features: np.ndarray
    evaluated: frozenset[int]

    @property
    def n(self) -> int:
        return self.features.shape[0]


class CandidatePool:
    """A finite candidate library with simulated reveal-on-demand targets."""

    def __init__(
        self,
        ids: list[str],
        features: np.ndarray,
        hidden_targets: np.ndarray,
        sense: str,
        *,
        normalize_features: bool = True,
        raw_features: np.ndarray | None = None,
        library_format: str = FEATURE_CSV,
    ):
        features = np.asarray(features, dtype=float)
        hidden_targets = np.asarray(hidden_targets, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if len(ids) != features.shape[0] or hidden_targets.shape != (features.shape[0],):
            raise ValueError("ids, features, and targets must agree in length")
        if len(set(ids)) != len(ids):
            raise LibraryFormatError("duplicate candidate ids")
        _sense_sign(sense)
        if library_format not in (FEATURE_CSV, FINGERPRINT_CSV):
            raise ValueError(f"unknown library format {library_format!r}")

        self.ids = list(ids)
        self.raw_features = features if raw_features is None else np.asarray(raw_features, dtype=float)
        if normalize_features:
            mu = self.raw_features.mean(axis=0)
            sd = self.raw_features.std(axis=0)
            sd = np.where(sd < 1e-12, 1.0, sd)
            self.features = (self.raw_features - mu) / sd
        else:
            self.features = features
        self.features.setflags(write=False)
        self.raw_features.setflags(write=False)
        self.hidden_targets = hidden_targets
        self.hidden_targets.setflags(write=False)
        self.sense = sense
        self.library_format = library_format
        self.evaluated: set[int] = set()
        self.pending: set[int] = set()

    # -- introspection ------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def sign(self) -> float:
        return _sense_sign(self.sense)

    def n_unevaluated(self) -> int:
        return self.n - len(self.evaluated)

    def snapshot(self) -> PoolView:
        return PoolView(features=self.features, evaluated=frozenset(self.evaluated))

    def _check_index(self, index: int) -> None:
        if not (0 <= index < self.n):
            raise IndexError(f"candidate index {index} out of range [0, {self.n})")

    # -- state transitions ---------------------------------------------

    def mark_pending(self, indices) -> None:
        for i in indices:
            self._check_index(i)
            if i in self.evaluated:
                raise ValueError(f"candidate {i} already evaluated; cannot be pending")
            self.pending.add(i)

    def reveal(self, index: int) -> float:
        """Reveal one candidate and return its engine-space target.

        The index moves from pending (if there) to evaluated. Revealing the
        same index twice is an error, as is revealing when nothing is left.
        """
        self._check_index(index)
        if len(self.evaluated) >= self.n:
            raise PoolExhaustedError("every candidate is already evaluated")
        if index in self.evaluated:
            raise ValueError(f"candidate {index} was already revealed")
        self.pending.discard(index)
        self.evaluated.add(index)
        return self.sign * float(self.hidden_targets[index])

    def raw_target(self, index: int) -> float:
        """Raw native-sense target (simulation bookkeeping, not selection)."""
        self._check_index(index)
        return float(self.hidden_targets[index])

    # -- wire payloads ---------------------------------------------------

    def to_payload(self) -> dict:
        """JSON-safe payload carrying everything a remote worker needs."""
        return {
            "ids": list(self.ids),
            "features": self.features.tolist(),
            "hidden_targets": self.hidden_targets.tolist(),
            "sense": self.sense,
            "library_format": self.library_format,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "CandidatePool":
        return cls(
            ids=list(payload["ids"]),
            features=np.asarray(payload["features"], dtype=float),
            hidden_targets=np.asarray(payload["hidden_targets"], dtype=float),
            sense=payload["sense"],
            normalize_features=False,
            library_format=payload.get("library_format", FEATURE_CSV),
        )


# ---------------------------------------------------------------------------
# On-disk formats
# ---------------------------------------------------------------------------


def _hex_to_bits(hex_str: str, line_no: int) -> np.ndarray:
    try:
        digits = [int(c, 16) for c in hex_str]
    except ValueError:
        raise LibraryFormatError(f"line {line_no}: invalid hex fingerprint") from None
    out = np.empty(4 * len(digits), dtype=float)
    for j, d in enumerate(digits):
        out[4 * j + 0] = (d >> 3) & 1
        out[4 * j + 1] = (d >> 2) & 1
        out[4 * j + 2] = (d >> 1) & 1
        out[4 * j + 3] = d & 1
    return out


def _bits_to_hex(bits: np.ndarray) -> str:
    b = np.rint(bits).astype(int)
    if b.size % 4 != 0:
        raise ValueError("bit vector length must be a multiple of 4")
    chars = []
    for j in range(0, b.size, 4):
        val = (b[j] << 3) | (b[j + 1] << 2) | (b[j + 2] << 1) | b[j + 3]
        chars.append(format(val, "x").upper())
    return "".join(chars)


def _parse_float(text: str, line_no: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise LibraryFormatError(f"line {line_no}: non-numeric {what} {text!r}") from None


def load_library(
    path: str,
    sense: str = "maximize",
    library_format: str | None = None,
) -> CandidatePool:
    """Load a candidate library from CSV.

    When ``library_format`` is None the format is detected from the header.
    Lines starting with ``#`` before the header are ignored (generators may
    write a provenance comment); the canonical dumped form has none.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()

    line_no = 0
    header = None
    for raw in lines:
        line_no += 1
        if raw.startswith("#") or raw.strip() == "":
            continue
        header = raw
        break
    if header is None:
        raise LibraryFormatError("empty library file")

    cols = next(csv.reader([header]))
    if cols[:2] != ["id", "target"]:
        raise LibraryFormatError("header must start with 'id,target'")
    if cols[2:] == ["fp_hex"]:
        detected = FINGERPRINT_CSV
    elif cols[2:] == [f"f{i}" for i in range(len(cols) - 2)] and len(cols) > 2:
        detected = FEATURE_CSV
    else:
        raise LibraryFormatError(f"unrecognized feature columns {cols[2:]!r}")
    if library_format is not None and library_format != detected:
        raise LibraryFormatError(
            f"expected {library_format} but header looks like {detected}"
        )

    n_cols = len(cols)
    ids: list[str] = []
    targets: list[float] = []
    rows: list[np.ndarray] = []
    fp_width = None
    for offset, raw in enumerate(lines[line_no:], start=line_no + 1):
        if raw.strip() == "":
            continue
        rec = next(csv.reader([raw]))
        if len(rec) != n_cols:
            raise LibraryFormatError(
                f"line {offset}: expected {n_cols} columns, found {len(rec)}"
            )
        ids.append(rec[0])
        targets.append(_parse_float(rec[1], offset, "target"))
        if detected == FEATURE_CSV:
            rows.append(
                np.array([_parse_float(v, offset, "feature") for v in rec[2:]])
            )
        else:
            if fp_width is None:
                fp_width = len(rec[2])
            elif len(rec[2]) != fp_width:
                raise LibraryFormatError(f"line {offset}: fingerprint width differs")
            rows.append(_hex_to_bits(rec[2], offset))
    if not ids:
        raise LibraryFormatError("library has a header but no candidate rows")
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise LibraryFormatError(f"duplicate candidate ids: {dupes[:5]}")

    features = np.vstack(rows)
    return CandidatePool(
        ids=ids,
        features=features,
        hidden_targets=np.array(targets),
        sense=sense,
        normalize_features=(detected == FEATURE_CSV),
        library_format=detected,
    )


def dump_library(pool: CandidatePool, path: str) -> None:
    """Write a pool back to its canonical CSV form.

    Raw (unscaled) features and raw targets are written, so a load/dump cycle
    is byte-identical for files already in canonical form.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if pool.library_format == FINGERPRINT_CSV:
        writer.writerow(["id", "target", "fp_hex"])
        for i, cid in enumerate(pool.ids):
            writer.writerow([cid, repr(float(pool.hidden_targets[i])), _bits_to_hex(pool.raw_features[i])])
    else:
        writer.writerow(["id", "target"] + [f"f{j}" for j in range(pool.raw_features.shape[1])])
        for i, cid in enumerate(pool.ids):
            row = [cid, repr(float(pool.hidden_targets[i]))]
            row.extend(repr(float(v)) for v in pool.raw_features[i])
            writer.writerow(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
