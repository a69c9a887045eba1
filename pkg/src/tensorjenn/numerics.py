"""Emulated finite-precision arithmetic and dense linear algebra primitives.

Every routine takes an explicit :class:`FpContext`. In exact mode the
operations are the host's float64/complex128 arithmetic. In emulated mode each
*real* elementary operation is correctly rounded to ``mantissa_bits``
significand bits (round to nearest, ties to even), so a complex product costs
four real multiplications and two real additions, each rounded.

Division by a real number is correctly rounded per component; division by a
general complex number, square roots and cube roots are evaluated in host
double precision and then rounded.

Correct rounding is obtained from error-free transformations: the host result
``hi`` is paired with the sign or value of its rounding error ``lo`` and
``hi + lo`` is rounded to the target precision. Only ties on the target grid
need ``lo``; everywhere else rounding ``hi`` already gives the right answer.

Vectors and matrices are plain numpy arrays (complex128).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimError, DivByZero, SingularMatrix

logger = logging.getLogger(__name__)

HOST_BITS = 53
_SPLITTER = 134217729.0  # 2**27 + 1


class Mode(enum.Enum):
    EXACT = "exact"
    EMULATED = "emulated"


class OpCounter:
    """Mutable tally of elementary complex operations."""

    def __init__(self):
        self.count = 0

    def add(self, k):
        self.count += int(k)

    def reset(self):
        self.count = 0

    def __repr__(self):
        return f"OpCounter({self.count})"


@dataclass(frozen=True)
class FpContext:
    """Arithmetic context: host double precision or emulated ``p``-bit rounding.

    ``mantissa_bits`` counts the significand bits including the leading one,
    so the unit roundoff is ``2**-mantissa_bits`` (53 for host doubles).
    """

    mantissa_bits: int = HOST_BITS
    mode: Mode = Mode.EXACT
    counter: OpCounter | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        p = self.mantissa_bits
        if not isinstance(p, (int, np.integer)) or p < 2:
            raise ValueError(f"mantissa_bits must be an integer >= 2, got {p!r}")
        if p > HOST_BITS:
            raise ValueError(f"cannot emulate more than {HOST_BITS} bits on the host")
        if self.mode is Mode.EXACT and p != HOST_BITS:
            raise ValueError("exact mode always runs at host precision (53 bits)")

    @classmethod
    def exact(cls, counter=None):
        return cls(HOST_BITS, Mode.EXACT, counter)

    @classmethod
    def emulated(cls, bits, counter=None):
        return cls(int(bits), Mode.EMULATED, counter)

    @property
    def is_exact(self):
        return self.mode is Mode.EXACT

    @property
    def unit_roundoff(self):
        return 2.0 ** -self.mantissa_bits

    @property
    def _bits(self):
        # None selects plain host arithmetic in the private kernels.
        return None if self.is_exact else self.mantissa_bits

    def instrumented(self):
        """Copy of this context carrying a fresh operation counter."""
        return replace(self, counter=OpCounter())

    def count(self, k):
        if self.counter is not None:
            self.counter.add(k)


EXACT = FpContext.exact()


# ---------------------------------------------------------------------------
# real kernels

def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _round_bits(hi, lo, bits):
    """Round ``hi + lo`` to ``bits`` significand bits; only the sign of ``lo`` is used."""
    hi = np.asarray(hi, dtype=float)
    if bits is None or bits >= HOST_BITS:
        return hi
    m, e = np.frexp(hi)
    scaled = np.ldexp(m, bits)
    r = np.rint(scaled)
    if lo is not None:
        t = np.trunc(scaled)
        tie = (np.abs(scaled - t) == 0.5) & (np.asarray(lo) != 0)
        if np.any(tie):
            up = np.sign(lo) == np.sign(scaled)
            r = np.where(tie, np.where(up, t + np.sign(scaled), t), r)
    return np.ldexp(r, e - bits)


def _radd(a, b, bits):
    if bits is None:
        return a + b
    s, err = _two_sum(a, b)
    return _round_bits(s, err, bits)


def _rsub(a, b, bits):
    return _radd(a, -np.asarray(b), bits)


def _rmul(a, b, bits):
    if bits is None:
        return a * b
    p, err = _two_prod(a, b)
    return _round_bits(p, err, bits)


def _rdiv(a, b, bits):
    if bits is None:
        return a / b
    q = a / b
    ph, pl = _two_prod(q, b)
    rem = (a - ph) - pl
    return _round_bits(q, np.sign(rem) * np.sign(b), bits)


# ---------------------------------------------------------------------------
# complex kernels (uncounted)

def _as_complex(x):
    return np.asarray(x, dtype=complex)


def _pack(re, im):
    re = np.asarray(re, dtype=float)
    out = np.empty(np.broadcast_shapes(re.shape, np.shape(im)), dtype=complex)
    out.real = re
    out.imag = im
    return out


def _cadd(a, b, bits):
    if bits is None:
        return a + b
    return _pack(_radd(a.real, b.real, bits), _radd(a.imag, b.imag, bits))


def _csub(a, b, bits):
    if bits is None:
        return a - b
    return _pack(_rsub(a.real, b.real, bits), _rsub(a.imag, b.imag, bits))


def _cmul(a, b, bits):
    if bits is None:
        return a * b
    ar, ai, br, bi = a.real, a.imag, b.real, b.imag
    re = _rsub(_rmul(ar, br, bits), _rmul(ai, bi, bits), bits)
    im = _radd(_rmul(ar, bi, bits), _rmul(ai, br, bits), bits)
    return _pack(re, im)


def _cdiv(a, b, bits):
    if bits is None:
        return a / b
    if np.all(b.imag == 0):
        br = b.real
        return _pack(_rdiv(a.real, br, bits), _rdiv(a.imag, br, bits))
    # general complex divisor: host quotient, then each component rounded
    return _cround(a / b, bits)


def _cround(z, bits):
    if bits is None:
        return z
    return _pack(_round_bits(z.real, None, bits), _round_bits(z.imag, None, bits))


def _check_finite(z):
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite value produced by a contracted operation")
    return z


def _out(z):
    return z[()] if isinstance(z, np.ndarray) and z.ndim == 0 else z


# ---------------------------------------------------------------------------
# public scalar operations

def round_to_context(x, ctx=EXACT):
    """Round real ``x`` to the nearest value with ``ctx.mantissa_bits`` significand bits."""
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    return _out(_round_bits(x, None, ctx._bits))


def fp_add(a, b, ctx=EXACT):
    a, b = _as_complex(a), _as_complex(b)
    ctx.count(np.broadcast(a, b).size)
    return _out(_check_finite(_cadd(a, b, ctx._bits)))


def fp_sub(a, b, ctx=EXACT):
    a, b = _as_complex(a), _as_complex(b)
    ctx.count(np.broadcast(a, b).size)
    return _out(_check_finite(_csub(a, b, ctx._bits)))


def fp_mul(a, b, ctx=EXACT):
    a, b = _as_complex(a), _as_complex(b)
    ctx.count(np.broadcast(a, b).size)
    return _out(_check_finite(_cmul(a, b, ctx._bits)))


def fp_div(a, b, ctx=EXACT):
    a, b = _as_complex(a), _as_complex(b)
    if np.any(b == 0):
        raise DivByZero("division by exact zero")
    ctx.count(np.broadcast(a, b).size)
    return _out(_check_finite(_cdiv(a, b, ctx._bits)))


def fp_sqrt(a, ctx=EXACT):
    """Principal complex square root, each component rounded."""
    a = _as_complex(a)
    ctx.count(a.size)
    return _out(_cround(np.sqrt(a), ctx._bits))


def principal_cbrt(z):
    """Cube root with argument in (-pi/3, pi/3]."""
    z = _as_complex(z)
    return np.cbrt(np.abs(z)) * np.exp(1j * np.angle(z) / 3.0)


def fp_cbrt(a, ctx=EXACT):
    """Principal complex cube root, each component rounded."""
    a = _as_complex(a)
    ctx.count(a.size)
    r = principal_cbrt(a)
    # keep positive reals exactly real
    r = np.where((a.imag == 0) & (a.real >= 0), np.cbrt(a.real) + 0j, r)
    return _out(_cround(r, ctx._bits))


# ---------------------------------------------------------------------------
# vector and matrix primitives

def dot_along(X, Y, ctx=EXACT):
    """``sum_j X[j] * Y[j]`` over the leading axis, accumulated left to right.

    Remaining axes broadcast, so one call evaluates many inner products at once.
    """
    X, Y = _as_complex(X), _as_complex(Y)
    if X.shape[0] != Y.shape[0]:
        raise DimError(f"length mismatch {X.shape[0]} != {Y.shape[0]}")
    L = X.shape[0]
    size = int(np.prod(np.broadcast_shapes(X.shape[1:], Y.shape[1:])))
    ctx.count(L * size + (L - 1) * size)
    bits = ctx._bits
    if bits is None:
        return _out(np.sum(X * Y, axis=0))
    acc = _cmul(X[0], Y[0], bits)
    for j in range(1, L):
        acc = _cadd(acc, _cmul(X[j], Y[j], bits), bits)
    return _out(_check_finite(acc))


def sum_along(X, ctx=EXACT):
    """``sum_j X[j]`` over the leading axis, accumulated left to right."""
    X = _as_complex(X)
    L = X.shape[0]
    ctx.count((L - 1) * int(np.prod(X.shape[1:])))
    bits = ctx._bits
    if bits is None:
        return _out(np.sum(X, axis=0))
    acc = X[0]
    for j in range(1, L):
        acc = _cadd(acc, X[j], bits)
    return _out(_check_finite(acc))


def inner_product(x, y, ctx=EXACT):
    """Bilinear ``x^T y`` (no conjugation) with sequential accumulation."""
    x, y = _as_complex(x), _as_complex(y)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimError(f"inner_product needs equal 1-D shapes, got {x.shape}, {y.shape}")
    return dot_along(x, y, ctx)


def mat_mul(A, B, ctx=EXACT):
    """Conventional O(n^3) product; each entry is a sequential inner product."""
    A, B = _as_complex(A), _as_complex(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimError(f"cannot multiply {A.shape} by {B.shape}")
    if ctx.is_exact:
        k = A.shape[1]
        size = A.shape[0] * B.shape[1]
        ctx.count(k * size + (k - 1) * size)
        return A @ B
    return dot_along(A.T[:, :, None], B[:, None, :], ctx)


def vector_norm(x, ctx=EXACT):
    """Hermitian 2-norm along axis 0 evaluated under ``ctx``."""
    x = _as_complex(x)
    bits = ctx._bits
    n = x.shape[0]
    rest = int(np.prod(x.shape[1:]))
    ctx.count(2 * n * rest + 1 * rest)
    if bits is None:
        return np.sqrt(np.sum(np.abs(x) ** 2, axis=0))
    acc = np.zeros(x.shape[1:])
    for j in range(n):
        sq = _radd(_rmul(x[j].real, x[j].real, bits), _rmul(x[j].imag, x[j].imag, bits), bits)
        acc = _radd(acc, sq, bits)
    return _out(_round_bits(np.sqrt(acc), None, bits))


def frobenius_norm(A):
    A = np.asarray(A)
    return float(np.sqrt(np.sum(np.abs(A) ** 2)))


def operator_norm_est(A, tol=1e-6, maxiter=1000):
    """Largest singular value by power iteration on ``A^* A``; never exceeds ``||A||_F``."""
    A = _as_complex(A)
    fro = frobenius_norm(A)
    if fro == 0.0:
        return 0.0
    M = A.conj().T @ A
    gen = np.random.default_rng(0x5EED)
    x = gen.standard_normal(M.shape[0]) + 1j * gen.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(maxiter):
        y = M @ x
        new = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            break
        x = y / ny
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    return min(float(np.sqrt(max(lam, 0.0))), fro)


def _require_square(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimError(f"expected a square matrix, got shape {A.shape}")


def lu_factor(A, ctx=EXACT, check=True):
    """Partial-pivoted LU, returned packed as ``(LU, perm)`` with ``A[perm] = L U``.

    With ``check`` a pivot below ``2**(-p/2) * ||A||_F`` raises
    :class:`SingularMatrix`. Without it, zero pivots are nudged to
    ``u * ||A||_F`` (what inverse iteration wants).
    """
    LU = np.array(A, dtype=complex)
    _require_square(LU)
    n = LU.shape[0]
    bits = ctx._bits
    fro = frobenius_norm(LU)
    if check and fro == 0.0:
        raise SingularMatrix("zero matrix")
    tol = 2.0 ** (-ctx.mantissa_bits / 2.0) * fro
    perm = np.arange(n)
    for k in range(n):
        i = k + int(np.argmax(np.abs(LU[k:, k])))
        piv = abs(LU[i, k])
        if check and piv < tol:
            raise SingularMatrix(
                f"pivot {piv:.3e} at step {k} below tolerance {tol:.3e}"
            )
        if i != k:
            LU[[k, i]] = LU[[i, k]]
            perm[[k, i]] = perm[[i, k]]
        if LU[k, k] == 0:
            LU[k, k] = ctx.unit_roundoff * max(fro, np.finfo(float).tiny)
        if k < n - 1:
            m = n - k - 1
            ctx.count(m + 2 * m * m)
            l = _cdiv(LU[k + 1:, k], LU[k, k], bits)
            LU[k + 1:, k] = l
            upd = _cmul(l[:, None], LU[k, k + 1:][None, :], bits)
            LU[k + 1:, k + 1:] = _csub(LU[k + 1:, k + 1:], upd, bits)
    return LU, perm


def lu_solve(lu, B, ctx=EXACT):
    """Solve ``A X = B`` from the output of :func:`lu_factor`."""
    LU, perm = lu
    n = LU.shape[0]
    X = _as_complex(B)
    vec = X.ndim == 1
    X = np.array(X[perm].reshape(n, -1))
    bits = ctx._bits
    m = X.shape[1]
    for k in range(n - 1):
        r = n - k - 1
        ctx.count(2 * r * m)
        X[k + 1:] = _csub(X[k + 1:], _cmul(LU[k + 1:, k][:, None], X[k][None, :], bits), bits)
    for k in range(n - 1, -1, -1):
        ctx.count(m + 2 * k * m)
        X[k] = _cdiv(X[k], LU[k, k], bits)
        if k:
            X[:k] = _csub(X[:k], _cmul(LU[:k, k][:, None], X[k][None, :], bits), bits)
    _check_finite(X)
    return X[:, 0] if vec else X


def mat_inv(A, ctx=EXACT):
    """Inverse via partial-pivoted Gaussian elimination under ``ctx``."""
    A = _as_complex(A)
    _require_square(A)
    C = lu_solve(lu_factor(A, ctx), np.eye(A.shape[0], dtype=complex), ctx)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("mat_inv n=%d p=%d relative error %.3e", A.shape[0],
                     ctx.mantissa_bits, inversion_error(A, C))
    return C


def inversion_error(A, C):
    """``||C - A^{-1}|| / ||A^{-1}||`` against a host-precision inverse."""
    ref = np.linalg.inv(_as_complex(A))
    return float(np.linalg.norm(C - ref, 2) / np.linalg.norm(ref, 2))


def gamma(n, u):
    """Higham's ``gamma_n = n u / (1 - n u)``; infinite once ``n u >= 1``."""
    nu = n * u
    return np.inf if nu >= 1 else nu / (1.0 - nu)
