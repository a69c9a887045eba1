"""Eigenvector condition numbers, a randomized backward-stable eigensolver and
a forward-accurate eigenvector wrapper.

The solver perturbs its input by a small random Gaussian matrix, reduces to
Hessenberg form with Householder reflections, finds eigenvalues with shifted
QR iteration and then eigenvectors by inverse iteration, all under the given
:class:`~tensorjenn.numerics.FpContext`. The backward residual
``||A - V diag(D) V^{-1}||`` is then measured in host precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimError, EigFailure, SingularMatrix
from .numerics import (
    EXACT,
    dot_along,
    fp_add,
    fp_div,
    fp_mul,
    fp_sub,
    frobenius_norm,
    lu_factor,
    lu_solve,
    operator_norm_est,
    round_to_context,
    vector_norm,
)

logger = logging.getLogger(__name__)

MAX_ROUNDS = 3
QR_ITERS_PER_EIGENVALUE = 30
INVERSE_ITERATIONS = 3
RESIDUAL_FLOOR_FACTOR = 10.0


# ---------------------------------------------------------------------------
# condition numbers

def _inv(V):
    V = np.asarray(V, dtype=complex)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise DimError(f"expected a square matrix, got shape {V.shape}")
    if not np.all(np.isfinite(V)) or np.linalg.cond(V) > 1e15:
        raise SingularMatrix("matrix is numerically singular")
    return np.linalg.inv(V)


def kappa_F(V):
    """``||V||_F^2 + ||V^{-1}||_F^2``."""
    return frobenius_norm(V) ** 2 + frobenius_norm(_inv(V)) ** 2


def gap(eigenvalues):
    """Minimum pairwise distance between eigenvalues."""
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    if lam.size < 2:
        raise DimError("gap needs at least two eigenvalues")
    d = np.abs(lam[:, None] - lam[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def eigen_condition_numbers(V):
    """``kappa(lambda_i) = ||v_i|| ||u_i||`` with ``u_i`` the rows of ``V^{-1}``."""
    V = np.asarray(V, dtype=complex)
    U = _inv(V)
    return np.linalg.norm(V, axis=0) * np.linalg.norm(U, axis=1)


def optimal_scaling(W):
    """Rescale column ``i`` by ``sqrt(||u_i|| / ||v_i||)``, minimising ``kappa_F`` over column scalings."""
    W = np.asarray(W, dtype=complex)
    U = _inv(W)
    s = np.sqrt(np.linalg.norm(U, axis=1) / np.linalg.norm(W, axis=0))
    return W * s[None, :]


@dataclass(frozen=True)
class ConditionReport:
    kappa_F: float
    gap: float
    kappa_eig: float
    per_eigen: np.ndarray
    kappa_V: float
    kappa_V_is_estimate: bool = True


def condition_report(A):
    """Condition numbers of the eigenproblem of ``A`` from a host eigendecomposition.

    ``kappa_V`` is half of ``kappa_F`` of the optimally scaled eigenvector
    matrix, which is an upper bound on the true (infimum) value.
    """
    A = np.asarray(A, dtype=complex)
    lam, V = np.linalg.eig(A)
    Vs = optimal_scaling(V)
    kF = kappa_F(Vs)
    g = gap(lam) if lam.size > 1 else np.inf
    kV = 0.5 * kF
    return ConditionReport(kappa_F=kF, gap=g, kappa_eig=kV / g if g > 0 else np.inf,
                           per_eigen=eigen_condition_numbers(V), kappa_V=kV)


def kappa_eig(A):
    return condition_report(A).kappa_eig


def kappa_V_F(A):
    """``inf_V kappa_F(V)`` over diagonalising ``V``, attained by the optimal scaling."""
    _, V = np.linalg.eig(np.asarray(A, dtype=complex))
    return kappa_F(optimal_scaling(V))


# ---------------------------------------------------------------------------
# matching helpers

def phase_free_distance(v, w):
    """``min_theta ||v - e^{i theta} w||`` for unit vectors ``v`` and ``w``."""
    c = abs(np.vdot(v, w))
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * min(c, 1.0))))


def match_eigenvalues(found, truth):
    """Assignment minimising total ``|found_i - truth_j|``; returns ``(perm, errors)``."""
    found = np.asarray(found, dtype=complex)
    truth = np.asarray(truth, dtype=complex)
    cost = np.abs(found[:, None] - truth[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(found), dtype=int)
    perm[rows] = cols
    return perm, cost[np.arange(len(found)), perm]


def match_eigenvectors(found, truth):
    """Pair the unit columns of ``found`` with those of ``truth`` up to free phases.

    Returns ``(perm, errors)`` where ``found[:, i]`` pairs with ``truth[:, perm[i]]``.
    """
    F = np.asarray(found, dtype=complex)
    F = F / np.linalg.norm(F, axis=0)
    G = np.asarray(truth, dtype=complex)
    G = G / np.linalg.norm(G, axis=0)
    c = np.minimum(np.abs(F.conj().T @ G), 1.0)
    cost = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * c))
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(F.shape[1], dtype=int)
    perm[rows] = cols
    return perm, cost[np.arange(F.shape[1]), perm]


# ---------------------------------------------------------------------------
# eigensolver

@dataclass
class EigResult:
    """Output of :func:`eig_backend`.

    ``delta_target`` is the residual actually demanded: the requested
    ``delta`` raised to the attainable floor ``~ n u ||A||_F kappa_2(V)``
    when the request is below what the working precision can deliver.
    """

    V: np.ndarray
    D: np.ndarray
    backward_residual: float
    delta_requested: float
    delta_target: float
    attempts: int
    kappa_V: float
    precision_bits: int

    @property
    def clamped(self):
        return self.delta_target > self.delta_requested

    @property
    def within_kappa_contract(self):
        n = len(self.D)
        return self.kappa_V <= 32 * n ** 2.5 / self.delta_requested


def _rnd(z, ctx):
    return complex(round_to_context(np.real(z), ctx), round_to_context(np.imag(z), ctx))


def hessenberg(A, ctx=EXACT):
    """Upper Hessenberg matrix unitarily similar to ``A`` (Householder, under ``ctx``)."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        nx = float(np.real(vector_norm(x, ctx)))
        if nx == 0.0 or np.all(x[1:] == 0):
            continue
        x0 = x[0]
        phase = _rnd(x0 / abs(x0), ctx) if x0 != 0 else 1.0
        alpha = fp_mul(-phase, nx, ctx)
        v = x.copy()
        v[0] = fp_sub(x0, alpha, ctx)
        v = fp_div(v, vector_norm(v, ctx), ctx)
        v2 = fp_mul(2.0, v, ctx)
        w = dot_along(v.conj()[:, None], H[k + 1:, k:], ctx)
        H[k + 1:, k:] = fp_sub(H[k + 1:, k:], fp_mul(v2[:, None], w[None, :], ctx), ctx)
        z = dot_along(H[:, k + 1:].T, v[:, None], ctx)
        H[:, k + 1:] = fp_sub(H[:, k + 1:], fp_mul(fp_mul(2.0, z, ctx)[:, None],
                                                   v.conj()[None, :], ctx), ctx)
        H[k + 2:, k] = 0.0
    return H


def _wilkinson_shift(a, b, c, d):
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c)
    m1 = 0.5 * (a + d) + disc
    m2 = 0.5 * (a + d) - disc
    return m1 if abs(m1 - d) <= abs(m2 - d) else m2


def _qr_step(H, mu, ctx):
    """One shifted QR step ``H - mu I = QR``, ``H <- RQ + mu I`` with Givens rotations."""
    m = H.shape[0]
    idx = np.arange(m)
    H[idx, idx] = fp_sub(H[idx, idx], mu, ctx)
    rots = []
    for k in range(m - 1):
        x, y = H[k, k], H[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            c, s = 1.0 + 0j, 0j
        else:
            c, s = _rnd(x / r, ctx), _rnd(y / r, ctx)
        rows = H[k:k + 2, k:].copy()
        H[k, k:] = fp_add(fp_mul(np.conj(c), rows[0], ctx), fp_mul(np.conj(s), rows[1], ctx), ctx)
        H[k + 1, k:] = fp_sub(fp_mul(c, rows[1], ctx), fp_mul(s, rows[0], ctx), ctx)
        H[k + 1, k] = 0.0
        rots.append((c, s))
    for k, (c, s) in enumerate(rots):
        cols = H[:k + 2, k:k + 2].copy()
        H[:k + 2, k] = fp_add(fp_mul(cols[:, 0], c, ctx), fp_mul(cols[:, 1], s, ctx), ctx)
        H[:k + 2, k + 1] = fp_sub(fp_mul(cols[:, 1], np.conj(c), ctx),
                                  fp_mul(cols[:, 0], np.conj(s), ctx), ctx)
    H[idx, idx] = fp_add(H[idx, idx], mu, ctx)


def qr_eigenvalues(A, ctx=EXACT):
    """Eigenvalues by Hessenberg reduction and single-shift complex QR iteration."""
    H = hessenberg(A, ctx)
    n = H.shape[0]
    u = ctx.unit_roundoff
    hnorm = frobenius_norm(H)
    hi = n - 1
    its = 0
    total = 0
    while hi > 0:
        l = hi
        while l > 0:
            ref = abs(H[l, l]) + abs(H[l - 1, l - 1])
            if ref == 0.0:
                ref = hnorm
            if abs(H[l, l - 1]) <= u * ref:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            hi -= 1
            its = 0
            continue
        if its >= QR_ITERS_PER_EIGENVALUE:
            raise EigFailure(f"QR iteration did not converge after {total} steps")
        if its in (10, 20):
            mu = H[hi, hi] + 1.5 * abs(H[hi, hi - 1])
        else:
            mu = _wilkinson_shift(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        mu = _rnd(mu, ctx)
        block = H[l:hi + 1, l:hi + 1].copy()
        _qr_step(block, mu, ctx)
        H[l:hi + 1, l:hi + 1] = block
        its += 1
        total += 1
    return np.diag(H).copy()


def inverse_iteration(A, lam, rng, ctx=EXACT, iterations=INVERSE_ITERATIONS):
    """Unit eigenvector of ``A`` for the approximate eigenvalue ``lam``."""
    n = A.shape[0]
    idx = np.arange(n)
    M = np.array(A, dtype=complex)
    M[idx, idx] = fp_sub(M[idx, idx], lam, ctx)
    lu = lu_factor(M, ctx, check=False)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = np.array([_rnd(z, ctx) for z in x])
    for _ in range(iterations):
        x = lu_solve(lu, x, ctx)
        nx = vector_norm(x, ctx)
        if not np.isfinite(nx) or nx == 0:
            raise EigFailure("inverse iteration broke down")
        x = fp_div(x, nx, ctx)
    return x


def _complex_gaussian(n, norm, rng):
    E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return E * (norm / frobenius_norm(E))


def eig_backend(A, delta, rng, ctx=EXACT, max_rounds=MAX_ROUNDS):
    """Randomized diagonalisation ``A ~ V diag(D) V^{-1}`` with unit eigenvector columns.

    Requires ``||A|| <= 1`` and ``0 < delta < 1``. The residual target is
    ``max(delta, floor)`` where ``floor`` is what the working precision can
    certify; raises :class:`EigFailure` when ``max_rounds`` randomized attempts
    all miss it.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimError(f"expected a square matrix, got shape {A.shape}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if operator_norm_est(A) > 1.0 + 1e-6:
        raise ValueError("eig_backend requires ||A|| <= 1")
    n = A.shape[0]
    u = ctx.unit_roundoff
    afro = frobenius_norm(A)
    last = None
    for attempt in range(1, max_rounds + 1):
        E = _complex_gaussian(n, max(delta, 4 * u * afro) / 4.0, rng)
        Ap = fp_add(A, E, ctx)
        try:
            D = qr_eigenvalues(Ap, ctx)
            V = np.column_stack([inverse_iteration(Ap, lam, rng, ctx) for lam in D])
        except EigFailure as exc:
            last = str(exc)
            continue
        if n > 1 and gap(D) == 0.0:
            last = "repeated eigenvalue in output"
            continue
        condV = float(np.linalg.cond(V))
        if not np.isfinite(condV) or condV * u * n >= 1.0:
            last = f"eigenvector matrix numerically singular (cond {condV:.3e})"
            continue
        resid = float(np.linalg.norm(A - (V * D[None, :]) @ np.linalg.inv(V), 2))
        target = max(delta, RESIDUAL_FLOOR_FACTOR * n * u * max(afro, np.finfo(float).tiny) * condV)
        if resid <= target:
            if target > delta:
                logger.debug("eig_backend: residual target raised from %.3e to %.3e", delta, target)
            return EigResult(V=V, D=D, backward_residual=resid, delta_requested=delta,
                             delta_target=target, attempts=attempt, kappa_V=condV,
                             precision_bits=ctx.mantissa_bits)
        last = f"residual {resid:.3e} above target {target:.3e}"
    raise EigFailure(f"eig_backend failed after {max_rounds} attempts: {last}")


def eig_fwd(A, delta, K_norm, K_eig, ctx=EXACT, rng=None, full_output=False):
    """Forward-accurate eigenvectors of ``A`` as the columns of the returned matrix.

    The input is scaled to ``A / (2 K_norm)`` under ``ctx`` and diagonalised to
    backward error ``delta / (64 n K_norm K_eig)``; ``K_norm`` must exceed
    ``max(||A||_F, 1)`` and ``K_eig`` should exceed ``kappa_eig(A)``.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if K_norm <= max(frobenius_norm(A), 1.0):
        raise ValueError("K_norm must exceed max(||A||_F, 1)")
    if K_eig <= 0:
        raise ValueError("K_eig must be positive")
    if rng is None:
        rng = np.random.default_rng()
    scale = round_to_context(2.0 * K_norm, ctx)
    Bp = fp_div(A, scale, ctx)
    res = eig_backend(Bp, delta / (64.0 * n * K_norm * K_eig), rng, ctx)
    return (res.V, res) if full_output else res.V
