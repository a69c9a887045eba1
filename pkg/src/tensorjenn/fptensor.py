"""Dense symmetric order-3 complex tensors, slicing, norms and file formats.

Two on-disk formats are supported:

* JSON: ``{"n": int, "entries": [[i, j, k, re, im], ...]}`` listing only
  entries with ``0 <= i <= j <= k < n``; missing entries are zero.
* binary: the four bytes ``SYT3``, a little-endian ``u32`` n, then ``n**3``
  little-endian ``f64`` pairs ``(re, im)`` in row-major ``(i, j, k)`` order.
"""

from __future__ import annotations

import itertools
import json
import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import DimError, TensorFormatError
from .numerics import EXACT, dot_along, frobenius_norm

MAGIC = b"SYT3"
FILE_ASYMMETRY_RTOL = 1e-12
_PERMS = list(itertools.permutations(range(3)))


def _canonical_index(n):
    idx = np.sort(np.indices((n, n, n)), axis=0)
    return idx[0], idx[1], idx[2]


def canonicalize(data):
    """Copy every entry from its sorted-index representative, making symmetry exact."""
    data = np.asarray(data, dtype=complex)
    n = data.shape[0]
    return data[_canonical_index(n)]


def _asymmetry(data):
    return max(float(np.max(np.abs(data - data.transpose(p)))) for p in _PERMS[1:])


class SymTensor3:
    """Symmetric tensor ``T[i, j, k]`` of dimension ``n``, stored densely.

    The constructor requires exact symmetry under all six index permutations.
    Use :meth:`from_nearly_symmetric` for data read from disk.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=complex)
        if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]):
            raise DimError(f"expected an (n, n, n) array, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DimError("tensor dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            raise TensorFormatError("tensor has non-finite entries")
        if arr.size and _asymmetry(arr) != 0.0:
            raise TensorFormatError("tensor is not symmetric")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def from_nearly_symmetric(cls, data, rtol=FILE_ASYMMETRY_RTOL):
        """Average over index permutations if asymmetry is within ``rtol``, else reject."""
        arr = np.asarray(data, dtype=complex)
        if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]):
            raise DimError(f"expected an (n, n, n) array, got shape {arr.shape}")
        scale = float(np.max(np.abs(arr))) if arr.size else 0.0
        asym = _asymmetry(arr)
        if asym > rtol * scale:
            i, j, k = np.unravel_index(
                np.argmax(np.abs(arr - arr.transpose(1, 0, 2))
                          + np.abs(arr - arr.transpose(0, 2, 1))), arr.shape)
            raise TensorFormatError(
                f"tensor is not symmetric: relative asymmetry {asym / max(scale, 1e-300):.3e} "
                f"(first at entry ({i}, {j}, {k}))"
            )
        if asym == 0.0:
            return cls(arr)
        avg = sum(arr.transpose(p) for p in _PERMS) / 6.0
        return cls(canonicalize(avg))

    @property
    def n(self):
        return self._data.shape[0]

    @property
    def data(self):
        """Read-only ``(n, n, n)`` complex array."""
        return self._data

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self):
        return f"SymTensor3(n={self.n}, norm={tensor_norm(self):.6g})"

    def __eq__(self, other):
        return isinstance(other, SymTensor3) and np.array_equal(self._data, other._data)

    __hash__ = None

    def __add__(self, other):
        return SymTensor3(canonicalize(self._data + other._data))

    def __mul__(self, c):
        return SymTensor3(canonicalize(self._data * complex(c)))

    __rmul__ = __mul__


def random_symmetric(n, rng, scale=1.0):
    """Tensor with i.i.d. complex Gaussian entries on the sorted index set."""
    raw = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
    return SymTensor3(canonicalize(scale * raw / np.sqrt(2.0)))


def from_rank_ones(vectors):
    """``sum_t u_t (x) u_t (x) u_t`` for the rows ``u_t`` of ``vectors``."""
    U = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if U.ndim != 2:
        raise DimError("vectors must be a 2-D array with one vector per row")
    return SymTensor3(canonicalize(np.einsum("ti,tj,tk->ijk", U, U, U)))


def slices(T):
    """Stack of slices: ``slices(T)[k] == T[:, :, k]``."""
    return np.ascontiguousarray(np.moveaxis(np.asarray(T.data), 2, 0))


def from_slices(S):
    return SymTensor3(np.moveaxis(np.asarray(S), 0, 2))


def linear_combo_slices(T, c, ctx=EXACT):
    """``sum_k c[k] T_k`` entrywise, accumulated in slice order under ``ctx``."""
    c = np.asarray(c)
    if c.shape != (T.n,):
        raise DimError(f"need {T.n} coefficients, got shape {c.shape}")
    return dot_along(c[:, None, None], slices(T), ctx)


def change_of_basis(T, A):
    """``T'[a,b,c] = sum A[i,a] A[j,b] A[k,c] T[i,j,k]`` in host double precision."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (T.n, T.n):
        raise DimError(f"basis matrix must be {T.n}x{T.n}, got {A.shape}")
    X = np.tensordot(T.data, A, axes=([0], [0]))   # (j, k, a)
    X = np.tensordot(X, A, axes=([0], [0]))        # (k, a, b)
    X = np.tensordot(X, A, axes=([0], [0]))        # (a, b, c)
    return SymTensor3(canonicalize(X))


def tensor_norm(T):
    return frobenius_norm(T.data)


def residual(T, vectors):
    """``||T - sum u^(x)3|| / ||T||``; absolute error (with a warning) when ``T = 0``."""
    U = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if U.shape[1] != T.n:
        raise DimError(f"vectors have dimension {U.shape[1]}, tensor has {T.n}")
    diff = frobenius_norm(T.data - from_rank_ones(U).data)
    nrm = tensor_norm(T)
    if nrm == 0.0:
        warnings.warn("zero tensor: residual is absolute", RuntimeWarning, stacklevel=2)
        return diff
    return diff / nrm


# ---------------------------------------------------------------------------
# file formats

def to_json_dict(T):
    entries = []
    d = T.data
    for i in range(T.n):
        for j in range(i, T.n):
            for k in range(j, T.n):
                z = d[i, j, k]
                if z != 0:
                    entries.append([i, j, k, float(z.real), float(z.imag)])
    return {"n": T.n, "entries": entries}


def from_json_dict(obj):
    if not isinstance(obj, dict) or "n" not in obj or "entries" not in obj:
        raise TensorFormatError('JSON tensor needs keys "n" and "entries"')
    n = obj["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise TensorFormatError(f'"n" must be a positive integer, got {n!r}')
    data = np.zeros((n, n, n), dtype=complex)
    seen = set()
    entries = obj["entries"]
    if not isinstance(entries, list):
        raise TensorFormatError('"entries" must be a list')
    for pos, e in enumerate(entries):
        where = f"entry {pos} ({e!r})"
        if not isinstance(e, (list, tuple)) or len(e) != 5:
            raise TensorFormatError(f"{where}: expected [i, j, k, re, im]")
        i, j, k, re, im = e
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (i, j, k)):
            raise TensorFormatError(f"{where}: indices must be integers")
        if not 0 <= i <= j <= k < n:
            raise TensorFormatError(f"{where}: indices must satisfy 0 <= i <= j <= k < {n}")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
            raise TensorFormatError(f"{where}: value must be two real numbers")
        if not (np.isfinite(re) and np.isfinite(im)):
            raise TensorFormatError(f"{where}: non-finite value")
        if (i, j, k) in seen:
            raise TensorFormatError(f"{where}: duplicate index")
        seen.add((i, j, k))
        data[i, j, k] = complex(re, im)
    return SymTensor3(canonicalize(data))


def to_bytes(T):
    n = T.n
    flat = np.empty(2 * n ** 3, dtype="<f8")
    flat[0::2] = T.data.real.ravel()
    flat[1::2] = T.data.imag.ravel()
    return MAGIC + struct.pack("<I", n) + flat.tobytes()


def from_bytes(buf):
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise TensorFormatError("missing SYT3 header")
    (n,) = struct.unpack("<I", buf[4:8])
    if n < 1:
        raise TensorFormatError("dimension must be positive")
    need = 16 * n ** 3
    if len(buf) - 8 != need:
        raise TensorFormatError(f"expected {need} payload bytes for n={n}, found {len(buf) - 8}")
    flat = np.frombuffer(buf, dtype="<f8", offset=8)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        i, j, k = np.unravel_index(bad[0] // 2, (n, n, n))
        raise TensorFormatError(f"non-finite value at entry ({i}, {j}, {k})")
    data = (flat[0::2] + 1j * flat[1::2]).reshape(n, n, n)
    return SymTensor3.from_nearly_symmetric(data)


def read_tensor(path):
    """Load a tensor, detecting the format from the leading bytes."""
    raw = Path(path).read_bytes()
    if raw[:4] == MAGIC:
        return from_bytes(raw)
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"{path}: neither SYT3 binary nor valid JSON ({exc})") from exc
    return from_json_dict(obj)


def write_tensor(T, path, fmt=None):
    """Write ``T``; the format is ``fmt`` or inferred from the suffix (``.json`` or binary)."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "binary")
    if fmt == "json":
        path.write_text(json.dumps(to_json_dict(T)))
    elif fmt == "binary":
        path.write_bytes(to_bytes(T))
    else:
        raise ValueError(f"unknown tensor format {fmt!r}")
    return path
