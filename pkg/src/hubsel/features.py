"""Feature matrix loading, validation, normalization, and early fusion.

Feature collections arrive as precomputed dense matrices, one row per
fragment. Two on-disk layouts are supported: plain CSV (``id,v1,...,vd``,
UTF-8, no header row) and the compact ``fbin`` binary layout (magic
``HLF1``, little-endian u32 row and column counts, float32 values in row
major order, then length-prefixed UTF-8 ids). Values are float64 in
memory regardless of the storage format.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FBIN_MAGIC = b"HLF1"


class FeatureFormatError(ValueError):
    """A feature file violates its declared format."""


@dataclass
class FeatureMatrix:
    """Dense per-fragment feature matrix with stable string identifiers.

    Attributes
    ----------
    ids : list of str
        Fragment identifiers, one per row, unique, order preserved.
    values : ndarray of shape (n, d)
        Row-major float64 feature values, all finite.
    """

    ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        n, d = self.values.shape
        if n < 1 or d < 1:
            raise ValueError(f"need at least one row and one column, got {n}x{d}")
        if len(self.ids) != n:
            raise ValueError(f"{len(self.ids)} ids for {n} rows")
        if len(set(self.ids)) != n:
            raise ValueError("fragment ids must be unique")
        if not np.isfinite(self.values).all():
            raise ValueError("feature values must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".fbin":
        return "fbin"
    raise ValueError(f"cannot infer feature format from '{path}', pass fmt explicitly")


def load_features(path, fmt: str | None = None) -> FeatureMatrix:
    """Load a feature matrix from ``path``.

    Parameters
    ----------
    path : str or Path
        File to read.
    fmt : {'csv', 'fbin'}, optional
        Storage format. Inferred from the file suffix when omitted.

    Returns
    -------
    FeatureMatrix

    Raises
    ------
    FeatureFormatError
        On malformed rows, non-finite values, duplicate ids, or an empty
        file, each reported with the offending row number.
    OSError
        If the file cannot be read.
    """
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "fbin":
        return _load_fbin(path)
    raise ValueError(f"unknown feature format '{fmt}'")


def _load_csv(path) -> FeatureMatrix:
    ids: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    d = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise FeatureFormatError(
                    f"{path}: row {lineno}: expected 'id,v1,...,vd', "
                    f"got {len(parts)} field(s)"
                )
            ident, tokens = parts[0], parts[1:]
            if d is None:
                d = len(tokens)
            elif len(tokens) != d:
                raise FeatureFormatError(
                    f"{path}: row {lineno}: expected {d} values, got {len(tokens)}"
                )
            if ident in seen:
                raise FeatureFormatError(
                    f"{path}: row {lineno}: duplicate id '{ident}'"
                )
            seen.add(ident)
            vals = []
            for tok in tokens:
                try:
                    v = float(tok)
                except ValueError:
                    raise FeatureFormatError(
                        f"{path}: row {lineno}: invalid numeric value '{tok}'"
                    ) from None
                if not math.isfinite(v):
                    raise FeatureFormatError(
                        f"{path}: row {lineno}: non-finite value '{tok}'"
                    )
                vals.append(v)
            ids.append(ident)
            rows.append(vals)
    if not ids:
        raise FeatureFormatError(f"{path}: empty feature file")
    return FeatureMatrix(ids=ids, values=np.array(rows, dtype=np.float64))


def _load_fbin(path) -> FeatureMatrix:
    data = Path(path).read_bytes()
    if len(data) == 0:
        raise FeatureFormatError(f"{path}: empty feature file")
    if data[:4] != FBIN_MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {data[:4]!r}, expected {FBIN_MAGIC!r}")
    if len(data) < 12:
        raise FeatureFormatError(f"{path}: truncated header")
    n, d = struct.unpack_from("<II", data, 4)
    if n < 1 or d < 1:
        raise FeatureFormatError(f"{path}: invalid shape {n}x{d}")
    body = 12 + n * d * 4
    if len(data) < body:
        raise FeatureFormatError(f"{path}: truncated value block ({len(data)} of {body} bytes)")
    values = (
        np.frombuffer(data, dtype="<f4", count=n * d, offset=12)
        .astype(np.float64)
        .reshape(n, d)
    )
    bad = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad.size:
        raise FeatureFormatError(f"{path}: row {bad[0] + 1}: non-finite value")
    ids: list[str] = []
    seen: set[str] = set()
    off = body
    for row in range(n):
        if off + 2 > len(data):
            raise FeatureFormatError(f"{path}: row {row + 1}: truncated id block")
        (ln,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + ln > len(data):
            raise FeatureFormatError(f"{path}: row {row + 1}: truncated id block")
        ident = data[off : off + ln].decode("utf-8")
        off += ln
        if ident in seen:
            raise FeatureFormatError(f"{path}: row {row + 1}: duplicate id '{ident}'")
        seen.add(ident)
        ids.append(ident)
    if off != len(data):
        raise FeatureFormatError(f"{path}: {len(data) - off} trailing byte(s)")
    return FeatureMatrix(ids=ids, values=values)


def save_features(m: FeatureMatrix, path, fmt: str | None = None) -> None:
    """Write ``m`` to ``path`` in CSV or fbin format (inferred from suffix)."""
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for ident, row in zip(m.ids, m.values):
                fh.write(ident + "," + ",".join(repr(float(v)) for v in row) + "\n")
    elif fmt == "fbin":
        for ident in m.ids:
            if len(ident.encode("utf-8")) > 0xFFFF:
                raise ValueError(f"id too long for fbin: '{ident[:32]}...'")
        with open(path, "wb") as fh:
            fh.write(FBIN_MAGIC)
            fh.write(struct.pack("<II", m.n, m.d))
            fh.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())
            for ident in m.ids:
                raw = ident.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
    else:
        raise ValueError(f"unknown feature format '{fmt}'")


def zero_rows(m: FeatureMatrix) -> np.ndarray:
    """Indices of all-zero rows (rows with zero Euclidean norm)."""
    return np.flatnonzero(np.linalg.norm(m.values, axis=1) == 0.0)


def l2_normalize(m: FeatureMatrix) -> FeatureMatrix:
    """Scale every row to unit Euclidean norm.

    All-zero rows cannot be normalized; they are passed through unchanged
    and reported in a single warning listing their row indices.
    """
    norms = np.linalg.norm(m.values, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        warnings.warn(
            f"{zero.size} all-zero row(s) left unnormalized "
            f"(row indices {zero.tolist()})"
        )
    scale = np.where(norms == 0.0, 1.0, norms)
    return FeatureMatrix(ids=list(m.ids), values=m.values / scale[:, None])


def fuse(matrices: list[FeatureMatrix]) -> FeatureMatrix:
    """Early-fuse feature matrices by normalized concatenation.

    Each modality is L2-normalized per row, then the rows are concatenated
    in the given order. All inputs must list identical fragment ids in the
    same order.

    Parameters
    ----------
    matrices : list of FeatureMatrix
        One matrix per modality, at least one.

    Returns
    -------
    FeatureMatrix
        Shape (n, sum of modality dimensions).
    """
    if not matrices:
        raise ValueError("fuse needs at least one feature matrix")
    first = matrices[0].ids
    for m in matrices[1:]:
        if m.n != matrices[0].n:
            raise ValueError(f"id mismatch: {matrices[0].n} rows vs {m.n} rows")
        for pos, (a, b) in enumerate(zip(first, m.ids), start=1):
            if a != b:
                raise ValueError(f"id mismatch at row {pos}: '{a}' vs '{b}'")
    parts = [l2_normalize(m).values for m in matrices]
    return FeatureMatrix(ids=list(first), values=np.hstack(parts))
