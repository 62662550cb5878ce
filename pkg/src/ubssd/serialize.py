"""Binary and CSV serialization.

All binary records share a prefix: 4 magic bytes, a little-endian u16
format version, then record-specific fields. Matrices are written as
little-endian float64 in column-major order.

====== =========================================================
tag    layout after the prefix
====== =========================================================
BSSD   u32 D, u32 T, D*T f64 values
ARMD   u32 Q, u32 D, u32 n_sbc, u8 regularized, Q*D*D f64 coeffs,
       D*D f64 noise_cov, n_sbc*(u32 order, f64 value)
ISAR   u32 D_s, u32 D_x, u32 M, u32 d, u32 T, D_s*D_x f64 w_pca,
       D_s*D_s f64 w_isa, D_s u32 assignment, D_s*T f64 components,
       u32 n, n bytes utf-8 JSON diagnostics
====== =========================================================
"""

from __future__ import annotations

import io as _io
import json
import struct
from pathlib import Path

import numpy as np

from .core import LinearMap, Partition, TimeSeries

VERSION = 1
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    pass


def _put_matrix(buf, m: np.ndarray):
    buf.write(np.asarray(m, dtype=_F8).tobytes(order="F"))


def _get_matrix(buf, rows: int, cols: int) -> np.ndarray:
    n = rows * cols * 8
    raw = buf.read(n)
    if len(raw) != n:
        raise FormatError("truncated matrix payload")
    return np.frombuffer(raw, dtype=_F8).reshape((rows, cols), order="F").astype(np.float64)


def _unpack(buf, fmt: str):
    size = struct.calcsize(fmt)
    raw = buf.read(size)
    if len(raw) != size:
        raise FormatError("truncated header")
    return struct.unpack(fmt, raw)


def _check_prefix(buf, magic: bytes):
    got = buf.read(4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    (version,) = _unpack(buf, "<H")
    if version != VERSION:
        raise FormatError(f"unsupported {magic.decode()} version {version}")


def series_to_bytes(series: TimeSeries) -> bytes:
    buf = _io.BytesIO()
    buf.write(b"BSSD")
    buf.write(struct.pack("<HII", VERSION, series.dim, series.len))
    _put_matrix(buf, series.values)
    return buf.getvalue()


def series_from_bytes(data: bytes) -> TimeSeries:
    buf = _io.BytesIO(data)
    _check_prefix(buf, b"BSSD")
    D, T = _unpack(buf, "<II")
    return TimeSeries(_get_matrix(buf, D, T))


def save_series(path, series: TimeSeries):
    Path(path).write_bytes(series_to_bytes(series))


def load_series(path) -> TimeSeries:
    return series_from_bytes(Path(path).read_bytes())


def save_series_csv(path, series: TimeSeries):
    """Headerless CSV, one row per channel; '%.17g' round-trips float64 exactly."""
    np.savetxt(path, series.values, delimiter=",", fmt="%.17g")


def load_series_csv(path) -> TimeSeries:
    return TimeSeries(np.loadtxt(path, delimiter=",", ndmin=2))


def armodel_to_bytes(model) -> bytes:
    D = model.dim
    buf = _io.BytesIO()
    buf.write(b"ARMD")
    buf.write(struct.pack("<HIIIB", VERSION, model.order, D, len(model.sbc_curve),
                          int(model.regularized)))
    for a in model.coeffs:
        _put_matrix(buf, a)
    _put_matrix(buf, model.noise_cov)
    for q, v in model.sbc_curve:
        buf.write(struct.pack("<Id", q, v))
    return buf.getvalue()


def armodel_from_bytes(data: bytes):
    from .arfit import ArModel

    buf = _io.BytesIO(data)
    _check_prefix(buf, b"ARMD")
    Q, D, n_sbc, reg = _unpack(buf, "<IIIB")
    coeffs = tuple(_get_matrix(buf, D, D) for _ in range(Q))
    noise_cov = _get_matrix(buf, D, D)
    curve = tuple(_unpack(buf, "<Id") for _ in range(n_sbc))
    return ArModel(coeffs=coeffs, noise_cov=noise_cov, sbc_curve=curve,
                   dim=D, regularized=bool(reg))


def isaresult_to_bytes(result) -> bytes:
    D_s, D_x = result.w_pca.rows, result.w_pca.cols
    part = result.partition
    comps = result.components.values
    buf = _io.BytesIO()
    buf.write(b"ISAR")
    buf.write(struct.pack("<HIIIII", VERSION, D_s, D_x, part.num_groups, part.group_dim,
                          comps.shape[1]))
    _put_matrix(buf, result.w_pca.matrix)
    _put_matrix(buf, result.w_isa.matrix)
    buf.write(np.asarray(part.assignment, dtype="<u4").tobytes())
    _put_matrix(buf, comps)
    diag = json.dumps(result.diagnostics, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(diag)))
    buf.write(diag)
    return buf.getvalue()


def isaresult_from_bytes(data: bytes):
    from .isa import IsaResult

    buf = _io.BytesIO(data)
    _check_prefix(buf, b"ISAR")
    D_s, D_x, M, d, T = _unpack(buf, "<IIIII")
    w_pca = _get_matrix(buf, D_s, D_x)
    w_isa = _get_matrix(buf, D_s, D_s)
    raw = buf.read(4 * D_s)
    if len(raw) != 4 * D_s:
        raise FormatError("truncated assignment")
    assignment = tuple(int(a) for a in np.frombuffer(raw, dtype="<u4"))
    comps = _get_matrix(buf, D_s, T)
    (n,) = _unpack(buf, "<I")
    diagnostics = json.loads(buf.read(n).decode("utf-8"))
    return IsaResult(w_pca=LinearMap(w_pca), w_isa=LinearMap(w_isa),
                     partition=Partition(M, d, assignment),
                     components=TimeSeries(comps), diagnostics=diagnostics)
