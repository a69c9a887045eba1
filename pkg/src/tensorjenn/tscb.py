"""Traces of the slices of ``(V (x) V (x) V).T`` in O(n^3) operations.

The transformed tensor is never formed. Slice ``i`` of the transformed tensor
is ``V^T D_i V`` with ``D_i = sum_m V[m, i] T_m``, so the cyclic property of the
trace gives ``Tr(S_i) = sum_m V[m, i] Tr(W T_m)`` with ``W = V V^T``. Only the
diagonal of each ``W T_m`` is needed.
"""

import numpy as np

from .errors import DimError, PrecisionTooLow
from .fptensor import SymTensor3, canonicalize, slices
from .numerics import EXACT, FpContext, dot_along, mat_mul, sum_along


def tscb(T, V, ctx=EXACT):
    """Return ``s[i] ~ Tr`` of slice ``i`` of the change of basis of ``T`` by ``V``.

    In emulated arithmetic the unit roundoff must be below ``1/(10 n)``.
    """
    V = np.asarray(V, dtype=complex)
    n = T.n
    if V.shape != (n, n):
        raise DimError(f"V must be {n}x{n}, got {V.shape}")
    if not ctx.is_exact and ctx.unit_roundoff >= 1.0 / (10 * n):
        raise PrecisionTooLow(
            f"{ctx.mantissa_bits} bits is too few for n={n}: need 2^-p < 1/(10n)"
        )
    W = mat_mul(V, V.T, ctx)
    # x[m, k] = <row k of W, column k of T_m>, with slices(T)[m, j, k] = T_m[j, k]
    X = dot_along(W.T[:, None, :], slices(T).transpose(1, 0, 2), ctx)
    x = sum_along(X.T, ctx)
    return dot_along(V, x[:, None], ctx)


def tscb_op_count(n):
    """Elementary complex operations performed by :func:`tscb` at dimension ``n``."""
    if n < 1:
        raise ValueError("n must be positive")
    ctx = FpContext.exact().instrumented()
    gen = np.random.default_rng(n)
    T = SymTensor3(canonicalize(gen.standard_normal((n, n, n))))
    tscb(T, gen.standard_normal((n, n)), ctx)
    return ctx.counter.count
