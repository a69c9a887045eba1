"""Complete decomposition of diagonalisable symmetric order-3 tensors.

Given ``T = sum_i u_i^{(x)3}`` with linearly independent ``u_i``, two random
combinations of slices ``T^(a)`` and ``T^(b)`` satisfy
``(T^(a))^{-1} T^(b) = U^{-1} diag(<b,u_i>/<a,u_i>) U``. Its eigenvectors give
the ``u_i`` up to scale, and the traces of slices after a change of basis
recover the scales.
"""

from __future__ import annotations

import math
import warnings
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    EigFailure,
    NotDiagonalisable,
    PrecisionTooLow,
    RepeatedEigenvalues,
    SingularMatrix,
    WrongConditionEstimate,
    ZeroDenominator,
)
from .fptensor import linear_combo_slices, residual
from .numerics import EXACT, fp_cbrt, fp_mul, frobenius_norm, mat_inv, mat_mul
from .randlab import sample_grid
from .spectral import eig_backend, eig_fwd, gap, kappa_F
from .tscb import tscb

MAX_RETRIES = 3
GATE_CONSTANT = 5e-5
EXACT_RESIDUAL_TOL = 1e-8
SCHEDULE_C = 28 * 12 ** 3 * 30 ** 3


def named_stream(seed, name):
    """Independent generator for subsystem ``name`` derived from an integer seed."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return np.random.default_rng(ss)


def _seed_from(rng):
    if rng is None:
        return int(np.random.SeedSequence().entropy % 2 ** 63)
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2 ** 63))
    return int(rng)


def success_probability_floor(n):
    """Lower bound on the probability that one draw of the finite-precision pipeline succeeds."""
    return max(0.0, (1 - 1 / n - 12 / n ** 2) * (1 - 1 / math.sqrt(2 * n) - 1 / n))


@dataclass(frozen=True)
class DecompParams:
    """Parameter schedule for the finite-precision pipeline.

    Build it with :meth:`from_schedule`; all derived quantities follow from
    ``n``, ``B``, ``eps`` and the constants.
    """

    n: int
    B: float
    eps: float
    C_CW: float
    C_eta: float
    C_gap: float
    c_F: float
    C: float
    k_gap: float
    k_F: float
    grid_count: int
    eta: float
    delta: float
    K_eig: float
    K_norm: float
    eta_exponent: float = 8.5
    delta_exponents: tuple = (12.0, 4.5)

    @classmethod
    def from_schedule(cls, n, B, eps, *, C_CW=1.0, C_eta=1.0, C=SCHEDULE_C,
                      eta_exponent=8.5, delta_exponents=(12.0, 4.5)):
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ValueError(f"n must be an integer >= 2, got {n!r}")
        if not B >= 1.0:
            raise ValueError(f"B must be at least 1, got {B!r}")
        if not 0.0 < eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
        n = int(n)
        C_gap = 1.0 / (48.0 * math.sqrt(2.0) * C_CW ** 2)
        c_F = 96.0 * C_CW ** 2 + 1.0
        k_gap = 1.0 / (C_gap * n ** 6 * B ** 3)
        k_F = c_F * n ** 5 * B ** 3
        grid_count = math.ceil(C_eta * n ** eta_exponent * B ** 4)
        dn, dB = delta_exponents
        delta = eps ** 3 / (C * n ** dn * B ** dB)
        return cls(n=n, B=float(B), eps=float(eps), C_CW=C_CW, C_eta=C_eta, C_gap=C_gap,
                   c_F=c_F, C=C, k_gap=k_gap, k_F=k_F, grid_count=grid_count,
                   eta=1.0 / grid_count, delta=delta, K_eig=3.0 * n * B / k_gap,
                   K_norm=2.0 * B ** 1.5 * math.sqrt(n * k_F),
                   eta_exponent=eta_exponent, delta_exponents=tuple(delta_exponents))

    def __post_init__(self):
        if not self.k_gap < 1.0 <= self.k_F:
            raise ValueError(f"schedule needs k_gap < 1 <= k_F (got {self.k_gap}, {self.k_F})")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        n, B = self.n, self.B
        bound = min(self.k_gap / (48 * n * B), 1.0 / (240 * n ** 3.5 * B))
        if not 0.0 < self.delta < bound:
            raise ValueError(
                f"eps={self.eps} gives delta={self.delta:.3e}, which must lie below {bound:.3e}"
            )

    def to_dict(self):
        d = asdict(self)
        d["delta_exponents"] = list(self.delta_exponents)
        return d


def min_precision_bits(n, B, eps, c=GATE_CONSTANT):
    """Smallest mantissa width accepted by :func:`decompose_fp`.

    ``ceil(c log2^4(nB/eps) log2 n)``, and never so small that the slice-trace
    step loses its guarantee (``2^-p < 1/(10n)``).
    """
    polylog = math.ceil(c * math.log2(n * B / eps) ** 4 * math.log2(n))
    return max(2, polylog, math.floor(math.log2(10 * n)) + 1)


@dataclass
class DecompResult:
    """Recovered vectors (one per row) and run diagnostics."""

    vectors: np.ndarray
    success: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "success": self.success,
            "vectors": [[[float(z.real), float(z.imag)] for z in row] for row in self.vectors],
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def eigenvalue_ratio_oracle(U, a, b):
    """``<b, u_i> / <a, u_i>`` for the rows ``u_i`` of ``U``: the eigenvalues of ``(T^(a))^{-1} T^(b)``."""
    U = np.asarray(U, dtype=complex)
    da = U @ np.asarray(a)
    if np.any(da == 0):
        raise ZeroDenominator(f"<a, u_i> vanishes for i = {int(np.flatnonzero(da == 0)[0])}")
    return (U @ np.asarray(b)) / da


def _attach(exc, diagnostics):
    exc.diagnostics = diagnostics
    return exc


def decompose_exact(T, rng=None, *, max_retries=MAX_RETRIES, residual_tol=EXACT_RESIDUAL_TOL):
    """Decompose ``T`` at host precision with coefficients drawn from a grid of ``n^3 + 1`` points.

    Raises :class:`SingularMatrix`, :class:`RepeatedEigenvalues` or
    :class:`EigFailure` when every draw fails, and :class:`NotDiagonalisable`
    when the pipeline completes but the reconstruction residual stays above
    ``residual_tol``.
    """
    n = T.n
    seed = _seed_from(rng)
    rs = named_stream(seed, "sampling")
    re = named_stream(seed, "eig-perturbation")
    points = -1.0 + 2.0 * np.arange(n ** 3 + 1) / (n ** 3 + 1)
    last = None
    best = None
    for attempt in range(max_retries + 1):
        a = points[rs.integers(points.size, size=n)]
        b = points[rs.integers(points.size, size=n)]
        try:
            D = mat_mul(mat_inv(linear_combo_slices(T, a)), linear_combo_slices(T, b))
            scale = 2.0 * max(frobenius_norm(D), 1.0)
            er = eig_backend(D / scale, 1e-14, re)
            lam = er.D * scale
            if n > 1 and gap(lam) <= 1e-12 * scale:
                raise RepeatedEigenvalues(f"eigenvalue gap {gap(lam):.3e} too small")
            P = er.V
            alpha = tscb(T, P)
            vectors = fp_cbrt(alpha)[:, None] * mat_inv(P)
        except (SingularMatrix, RepeatedEigenvalues, EigFailure) as exc:
            last = exc
            continue
        res = residual(T, vectors)
        diagnostics = {"residual": res, "measured_gap": gap(lam) if n > 1 else math.inf,
                       "alpha": alpha, "retries": attempt, "precision_bits": 53, "seed": seed}
        if res <= residual_tol:
            return DecompResult(vectors, True, diagnostics)
        best = diagnostics
        last = NotDiagonalisable(f"reconstruction residual {res:.3e} exceeds {residual_tol:.1e}")
    raise _attach(last, best or {"retries": max_retries, "seed": seed})


def decompose_fp(T, B, eps, ctx=EXACT, rng=None, *, params=None, strict=False,
                 max_retries=MAX_RETRIES, gate_constant=GATE_CONSTANT):
    """Decompose ``T`` under the arithmetic of ``ctx`` with the full parameter schedule.

    ``B`` must bound the tensor condition number and ``eps`` is the target
    forward error. Every step runs under ``ctx``: slice combinations, the
    inverse, the product, forward eigenvectors, the eigenvector inverse,
    slice traces, and the final cube-root scaling.

    A residual above ``eps`` (relative to ``||T||_F``) after all draws usually
    means ``B`` was too small; it is reported with a
    :class:`WrongConditionEstimate` warning and ``success=False``. With
    ``strict`` a single draw is made and draw failures propagate.
    """
    n = T.n
    params = params or DecompParams.from_schedule(n, B, eps)
    need = min_precision_bits(n, params.B, params.eps, gate_constant)
    if ctx.mantissa_bits < need:
        raise PrecisionTooLow(
            f"{ctx.mantissa_bits} bits requested, but n={n}, B={params.B:g}, "
            f"eps={params.eps:g} needs at least {need}"
        )
    seed = _seed_from(rng)
    rs = named_stream(seed, "sampling")
    re = named_stream(seed, "eig-perturbation")
    rounds = 1 if strict else max_retries + 1
    base = {"precision_bits": ctx.mantissa_bits, "seed": seed, "k_gap": params.k_gap,
            "k_F": params.k_F, "delta": params.delta, "eta": params.eta}
    last_exc = None
    last_result = None
    for attempt in range(rounds):
        a, b = sample_grid(params.eta, n, rs)
        advisory = []
        try:
            Sa = linear_combo_slices(T, a, ctx)
            Sb = linear_combo_slices(T, b, ctx)
            D = mat_mul(mat_inv(Sa, ctx), Sb, ctx)
            K_norm = params.K_norm
            if K_norm <= max(frobenius_norm(D), 1.0):
                advisory.append("||D||_F exceeds K_norm: B is likely below the condition number")
                K_norm = 2.0 * max(frobenius_norm(D), 1.0)
            W, er = eig_fwd(D, params.delta, K_norm, params.K_eig, ctx, re, full_output=True)
            lam = er.D * (2.0 * K_norm)
            mgap = gap(lam)
            if mgap < params.k_gap:
                raise RepeatedEigenvalues(f"eigenvalue gap {mgap:.3e} below k_gap {params.k_gap:.3e}")
            Cinv = mat_inv(W, ctx)
            alpha = tscb(T, W, ctx)
            vectors = fp_mul(fp_cbrt(alpha, ctx)[:, None], Cinv, ctx)
        except (SingularMatrix, RepeatedEigenvalues, EigFailure) as exc:
            last_exc = exc
            last_exc.diagnostics = dict(base, retries=attempt, failure=type(exc).__name__,
                                        message=str(exc))
            continue
        res = residual(T, vectors)
        rank_ok = bool(np.linalg.cond(vectors) * ctx.unit_roundoff < 1.0)
        diagnostics = dict(
            base, residual=res, measured_gap=mgap, measured_kappa_F_Ta=kappa_F(Sa),
            alpha=alpha, retries=attempt, backward_residual=er.backward_residual,
            eig_delta_target=er.delta_target, eig_attempts=er.attempts, advisory=advisory,
        )
        if res <= params.eps and rank_ok:
            return DecompResult(vectors, True, diagnostics)
        if not rank_ok:
            advisory.append("recovered vectors are numerically dependent")
        else:
            advisory.append(f"residual {res:.3e} exceeds eps={params.eps:g}; "
                            "B may be too small or the precision too low")
        last_result = DecompResult(vectors, False, diagnostics)
    if last_result is not None:
        warnings.warn(last_result.diagnostics["advisory"][-1], WrongConditionEstimate, stacklevel=2)
        return last_result
    raise last_exc
