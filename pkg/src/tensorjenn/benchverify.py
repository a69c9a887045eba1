"""Synthetic instances with a prescribed condition number, ground-truth
matching, and benchmark harnesses."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment
from scipy.stats import unitary_group

from .errors import DimError, Infeasible
from .fptensor import SymTensor3, from_rank_ones, read_tensor, write_tensor
from .numerics import EXACT
from .spectral import kappa_F
from .tscb import tscb_op_count

OMEGA = np.exp(2j * np.pi / 3)
CUBE_ROOTS = np.array([1.0 + 0j, OMEGA, OMEGA ** 2])
KAPPA_RTOL = 0.05
BENCH_COLUMNS = ["n", "rep", "seed", "phase", "wall_ms", "op_count", "residual", "max_error"]


@dataclass(frozen=True)
class Instance:
    T: SymTensor3
    U_true: np.ndarray
    kappa: float
    seed: int | None = None

    @property
    def n(self):
        return self.T.n


def generate_instance(n, target_kappa, rng, seed=None):
    """Random ``U = Q1 diag(sigma) Q2`` with ``kappa_F(U)`` within 5% of ``target_kappa``.

    ``sigma_i = exp(t z_i)`` for a fixed Gaussian ``z``; ``kappa_F`` is
    ``sum 2 cosh(2 t z_i)``, increasing in ``t``, and ``t`` is found by
    root bracketing.
    """
    if n < 1:
        raise DimError("n must be positive")
    if target_kappa < 2 * n:
        raise Infeasible(f"kappa_F(U) >= 2n = {2 * n} for every invertible U; got {target_kappa}")
    Q1 = unitary_group.rvs(n, random_state=rng) if n > 1 else np.ones((1, 1), complex)
    Q2 = unitary_group.rvs(n, random_state=rng) if n > 1 else np.ones((1, 1), complex)
    z = rng.standard_normal(n)
    if np.all(z == 0):
        z[0] = 1.0

    def excess(t):
        return float(np.sum(2 * np.cosh(2 * t * z))) - target_kappa

    if excess(0.0) >= 0:
        t = 0.0
    else:
        hi = 1.0
        while excess(hi) < 0:
            hi *= 2
        t = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12)
    U = (Q1 * np.exp(t * z)[None, :]) @ Q2
    kappa = kappa_F(U)
    if abs(kappa - target_kappa) > KAPPA_RTOL * target_kappa:
        raise Infeasible(f"reached kappa {kappa:.4g} for target {target_kappa:.4g}")
    return Instance(T=from_rank_ones(U), U_true=U, kappa=kappa, seed=seed)


def save_instance(inst, prefix):
    """Write ``<prefix>.syt3`` and the sidecar ``<prefix>.json``; returns both paths."""
    prefix = Path(prefix)
    tpath = write_tensor(inst.T, prefix.with_suffix(".syt3"), fmt="binary")
    side = {
        "n": inst.n, "kappa": inst.kappa, "seed": inst.seed,
        "U_true": [[float(z.real), float(z.imag)] for z in inst.U_true.ravel()],
    }
    spath = prefix.with_suffix(".json")
    spath.write_text(json.dumps(side))
    return tpath, spath


def load_instance(prefix):
    prefix = Path(prefix)
    T = read_tensor(prefix.with_suffix(".syt3"))
    side = json.loads(prefix.with_suffix(".json").read_text())
    n = side["n"]
    U = np.array([complex(r, i) for r, i in side["U_true"]]).reshape(n, n)
    return Instance(T=T, U_true=U, kappa=side["kappa"], seed=side.get("seed"))


@dataclass(frozen=True)
class MatchResult:
    """``found[i]`` is matched to ``phases[i] * truth[permutation[i]]``."""

    permutation: np.ndarray
    phases: np.ndarray
    per_vector_error: np.ndarray
    max_error: float


def match_factors(found, truth):
    """Optimal pairing up to permutation and cube roots of unity (Hungarian assignment)."""
    F = np.atleast_2d(np.asarray(found, dtype=complex))
    G = np.atleast_2d(np.asarray(truth, dtype=complex))
    if F.shape != G.shape:
        raise DimError(f"shape mismatch {F.shape} vs {G.shape}")
    # dist[i, j, w] = || omega_w * truth_j - found_i ||
    dist = np.linalg.norm(CUBE_ROOTS[None, None, :, None] * G[None, :, None, :]
                          - F[:, None, None, :], axis=-1)
    cost = dist.min(axis=2)
    which = dist.argmin(axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(F.shape[0], dtype=int)
    perm[rows] = cols
    idx = np.arange(F.shape[0])
    errs = cost[idx, perm]
    return MatchResult(permutation=perm, phases=CUBE_ROOTS[which[idx, perm]],
                       per_vector_error=errs, max_error=float(errs.max()) if errs.size else 0.0)


def _rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def bench_pipeline(n_list, reps, ctx=EXACT, *, seed=0, kappa_factor=3.0, eps=1e-2,
                   as_csv=True):
    """Time :func:`decompose_fp` on fresh instances, one row per ``(n, rep)``.

    ``op_count`` is filled when ``ctx`` carries a counter.
    """
    from .jennrich import decompose_fp

    rows = []
    for n in n_list:
        for rep in range(reps):
            s = int(np.random.SeedSequence([seed, n, rep]).generate_state(1)[0])
            gen = np.random.default_rng(s)
            inst = generate_instance(n, kappa_factor * n, gen, seed=s)
            run_ctx = ctx.instrumented() if ctx.counter is not None else ctx
            t0 = time.perf_counter()
            res = decompose_fp(inst.T, 1.05 * inst.kappa, eps, run_ctx, s)
            wall = (time.perf_counter() - t0) * 1e3
            rows.append({
                "n": n, "rep": rep, "seed": s, "phase": "decompose", "wall_ms": round(wall, 3),
                "op_count": run_ctx.counter.count if run_ctx.counter is not None else "",
                "residual": res.diagnostics["residual"],
                "max_error": match_factors(res.vectors, inst.U_true).max_error,
            })
    return _rows_to_csv(rows) if as_csv else rows


def tscb_scaling(n_list=(8, 16, 32)):
    """``{n: count(2n) / count(n)}`` for the instrumented slice-trace routine."""
    return {n: tscb_op_count(2 * n) / tscb_op_count(n) for n in n_list}

