import csv
import io
import itertools
import math
import time

import numpy as np
import pytest

from conftest import crandn
from tensorjenn.benchverify import (
    BENCH_COLUMNS,
    CUBE_ROOTS,
    bench_pipeline,
    generate_instance,
    load_instance,
    match_factors,
    save_instance,
    tscb_scaling,
)
from tensorjenn.errors import DimError, Infeasible
from tensorjenn.fptensor import tensor_norm
from tensorjenn.jennrich import decompose_fp
from tensorjenn.numerics import EXACT
from tensorjenn.spectral import kappa_F


def brute_force_match(found, truth):
    """Smallest summed cost over all permutations, each pair taking its best cube-root phase."""
    n = len(found)
    cost = np.array([[min(np.linalg.norm(w * truth[j] - found[i]) for w in CUBE_ROOTS)
                      for j in range(n)] for i in range(n)])
    best = min(itertools.permutations(range(n)), key=lambda p: sum(cost[i, p[i]] for i in range(n)))
    return np.array(best), cost


# --- instance generation ----------------------------------------------------------

@pytest.mark.parametrize("n,kappa", [(2, 5), (4, 20), (8, 20), (8, 100), (12, 100)])
def test_instance_hits_target_condition_number(n, kappa):
    inst = generate_instance(n, kappa, np.random.default_rng(n))
    assert abs(inst.kappa - kappa) <= 0.05 * kappa
    assert math.isclose(kappa_F(inst.U_true), inst.kappa)
    assert tensor_norm(inst.T) <= inst.kappa ** 1.5


def test_minimal_condition_number_gives_unitary_factor():
    inst = generate_instance(5, 10, np.random.default_rng(1))
    U = inst.U_true
    assert np.allclose(U.conj().T @ U, np.eye(5), atol=1e-12)


def test_infeasible_targets():
    with pytest.raises(Infeasible):
        generate_instance(4, 7.9, np.random.default_rng(0))
    with pytest.raises(DimError):
        generate_instance(0, 10, np.random.default_rng(0))


def test_instance_reproducible_and_round_trips(tmp_path):
    a = generate_instance(4, 15, np.random.default_rng(5), seed=5)
    b = generate_instance(4, 15, np.random.default_rng(5), seed=5)
    assert a.T == b.T
    save_instance(a, tmp_path / "inst")
    c = load_instance(tmp_path / "inst")
    assert c.T == a.T and np.array_equal(c.U_true, a.U_true) and c.seed == 5


# --- matching ------------------------------------------------------------------------

def test_match_examples():
    I = np.eye(3)
    r = match_factors(I, I)
    assert r.max_error == 0 and np.array_equal(r.permutation, [0, 1, 2])
    swapped = I[[2, 0, 1]] * np.array([1, CUBE_ROOTS[1], CUBE_ROOTS[2]])[:, None]
    r = match_factors(swapped, I)
    assert r.max_error < 1e-15
    assert np.array_equal(r.permutation, [2, 0, 1])
    assert np.allclose(r.phases, [1, CUBE_ROOTS[1], CUBE_ROOTS[2]])
    with pytest.raises(DimError):
        match_factors(np.eye(2), np.eye(3))


def test_match_ignores_non_cube_root_phase_freedom():
    # a phase of -1 is not a cube root of unity, so it costs
    r = match_factors(-np.eye(2), np.eye(2))
    assert math.isclose(r.max_error, abs(-1 - CUBE_ROOTS[1]))


def test_match_small_perturbations():
    gen = np.random.default_rng(2)
    for _ in range(20):
        U = crandn(gen, 6, 6)
        perm = gen.permutation(6)
        phases = CUBE_ROOTS[gen.integers(3, size=6)]
        noise = 1e-7 * crandn(gen, 6, 6)
        found = phases[:, None] * U[perm] + noise
        r = match_factors(found, U)
        assert np.array_equal(r.permutation, perm)
        assert r.max_error <= 1e-6


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_match_agrees_with_brute_force(n):
    gen = np.random.default_rng(10 + n)
    for _ in range(20):
        found, truth = crandn(gen, n, n), crandn(gen, n, n)
        perm, cost = brute_force_match(found, truth)
        r = match_factors(found, truth)
        idx = np.arange(n)
        assert math.isclose(cost[idx, r.permutation].sum(), cost[idx, perm].sum(), rel_tol=1e-12)


# --- benchmarks ------------------------------------------------------------------------

def test_bench_csv_layout():
    text = bench_pipeline([3, 4], 2, EXACT.instrumented(), seed=1)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 4
    assert list(rows[0]) == BENCH_COLUMNS
    assert all(int(r["op_count"]) > 0 for r in rows)
    assert all(float(r["max_error"]) <= 1e-2 for r in rows)
    plain = bench_pipeline([3], 1, EXACT, seed=1, as_csv=False)
    assert plain[0]["op_count"] == ""


def test_n16_decomposition_runs_quickly():
    inst = generate_instance(16, 48, np.random.default_rng(3))
    t0 = time.perf_counter()
    res = decompose_fp(inst.T, 1.05 * inst.kappa, 1e-3, rng=3)
    assert time.perf_counter() - t0 < 60
    assert res.success and match_factors(res.vectors, inst.U_true).max_error <= 1e-3


def test_tscb_scaling_ratios():
    ratios = tscb_scaling((8, 16))
    assert all(6 <= r <= 10 for r in ratios.values())
