import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2, chisquare

from conftest import crandn
from tensorjenn.benchverify import generate_instance
from tensorjenn.fptensor import from_rank_ones
from tensorjenn.jennrich import DecompParams
from tensorjenn.randlab import (
    Grid,
    anticoncentration_experiment,
    anticoncentration_floor,
    anticoncentration_threshold,
    event_floors,
    linear_form,
    measure_events,
    polynomial_norm_mc,
    probability_experiment,
    quadratic_form,
    round_to_grid,
    sample_grid,
)
from tensorjenn.spectral import kappa_F

ETAS = [0.5, 0.25, 0.125, 0.1, 1e-3, 1 / 3, 1 / 7]


# --- grid and rounding -------------------------------------------------------------

def test_round_to_grid_examples():
    assert round_to_grid(0.3, 0.25) == 0.25
    assert round_to_grid(-0.3, 0.25) == -0.5
    x = np.array([-1.0, -0.5, 0.0, 0.5])
    assert np.array_equal(round_to_grid(x, 0.5), x)


def test_round_to_grid_rejects_and_clamps():
    with pytest.warns(RuntimeWarning):
        assert round_to_grid(1.0, 0.25) == 0.75
    with pytest.raises(ValueError):
        round_to_grid(1.5, 0.25)
    with pytest.raises(ValueError):
        round_to_grid(0.2, 0.3)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1.0, 1.0, exclude_max=True), eta=st.sampled_from(ETAS))
def test_round_to_grid_floors_onto_grid(x, eta):
    g = float(round_to_grid(x, eta))
    N = round(1 / eta)
    m = round(g * N)
    assert g == m / N and -N <= m < N
    assert m / N <= x < (m + 1) / N
    assert 0 <= x - g < eta * (1 + 1e-12)
    assert round_to_grid(g, eta) == g


def test_grid_shape():
    G = Grid(0.25, 4)
    assert G.count == 4 and G.points_per_axis == 8
    assert np.array_equal(G.axis(), np.arange(-4, 4) / 4)
    assert G.contains([-1.0, 0.75]) and not G.contains([1.0]) and not G.contains([0.3])
    with pytest.raises(ValueError):
        Grid(0.3, 2)


def test_sample_grid_on_grid_and_deterministic():
    G = Grid(1e-3, 12)
    a, b = sample_grid(1e-3, 6, np.random.default_rng(1))
    assert a.shape == b.shape == (6,) and G.contains(np.r_[a, b])
    a2, b2 = sample_grid(1e-3, 6, np.random.default_rng(1))
    assert np.array_equal(a, a2) and np.array_equal(b, b2)


def test_sample_grid_uniform_chi_square():
    gen = np.random.default_rng(2)
    draws = np.array([np.r_[sample_grid(0.5, 2, gen)] for _ in range(100_000)])
    for axis in range(4):
        counts = np.bincount(((draws[:, axis] + 1) * 2).astype(int), minlength=4)
        assert chisquare(counts).pvalue > 0.01
    # the pair (a_1, b_1) jointly: 16 cells
    pair = ((draws[:, 0] + 1) * 2).astype(int) * 4 + ((draws[:, 2] + 1) * 2).astype(int)
    assert chisquare(np.bincount(pair, minlength=16)).pvalue > 0.01


def test_sample_grid_matches_rounded_uniform_draws():
    gen = np.random.default_rng(3)
    rounded = round_to_grid(gen.uniform(-1, 1, 80_000), 0.25)
    sampled = np.concatenate([np.r_[sample_grid(0.25, 4, gen)] for _ in range(10_000)])
    c1 = np.bincount(((rounded + 1) * 4).astype(int), minlength=8)
    c2 = np.bincount(((sampled + 1) * 4).astype(int), minlength=8)
    table = np.vstack([c1, c2])
    expected = table.sum(0) / 2
    stat = float(np.sum((table - expected) ** 2 / expected))
    assert chi2.sf(stat, 7) > 0.01


def test_huge_grid_falls_back_to_rounding():
    a, b = sample_grid(2.0 ** -70, 3, np.random.default_rng(4))
    assert np.all((a >= -1) & (a < 1)) and np.all((b >= -1) & (b < 1))


# --- anti-concentration -----------------------------------------------------------

def test_linear_exceedance_matches_enumeration():
    n, eta, alpha = 3, 1e-3, 0.2
    U = np.eye(n)
    B = kappa_F(U)
    thr = anticoncentration_threshold("linear", alpha, B, eta, n)
    exact = float(np.mean(np.abs(Grid(eta, 1).axis()) >= thr))
    trials = 20_000
    rate = anticoncentration_experiment(U, "linear", alpha, trials, np.random.default_rng(5), eta=eta)
    assert abs(rate - exact) <= 4 * math.sqrt(exact * (1 - exact) / trials)
    assert rate >= anticoncentration_floor("linear", alpha)


@pytest.mark.parametrize("alpha", [0.01, 0.04])
def test_quadratic_exceedance_floor(alpha):
    rate = anticoncentration_experiment(np.eye(4), "quadratic", alpha, 100_000,
                                        np.random.default_rng(6), k=0, l=1)
    assert rate >= anticoncentration_floor("quadratic", alpha)


def test_quadratic_form_of_identity():
    Q = quadratic_form(np.eye(2), 0, 1)
    assert np.array_equal(Q, [[0, 1], [-1, 0]])
    assert np.array_equal(linear_form(np.eye(3), 1), [0, 1, 0])
    with pytest.raises(ValueError):
        anticoncentration_threshold("cubic", 0.1, 4, 1e-3, 2)


def test_linear_form_mean_square():
    gen = np.random.default_rng(7)
    U = crandn(gen, 2, 2)
    est = polynomial_norm_mc(U, "linear", 1_000_000, gen, k=0)
    assert math.isclose(est, np.sum(np.abs(U[:, 0]) ** 2) / 3, rel_tol=0.01)


# --- structural bounds on random draws ------------------------------------------------

def test_inner_product_bounds():
    gen = np.random.default_rng(8)
    for _ in range(20):
        inst = generate_instance(6, 40, gen)
        U, B = inst.U_true, inst.kappa
        for _ in range(50):
            a = gen.uniform(-1, 1, 6)
            ip = U @ a
            assert np.sum(np.abs(ip) ** 2) <= 6 * B
            assert np.max(np.abs(np.outer(ip, ip))) <= 6 * B / 2


def test_quadratic_forms_bounded_below():
    gen = np.random.default_rng(9)
    for _ in range(50):
        n = int(gen.integers(2, 8))
        U = crandn(gen, n, n)
        B = kappa_F(U)
        for k in range(n):
            for l in range(k + 1, n):
                assert np.linalg.norm(quadratic_form(U, k, l)) ** 2 >= 2 / B ** 2


def test_grid_rounding_changes_quadratic_little():
    gen = np.random.default_rng(10)
    eta = 1e-2
    for _ in range(10):
        inst = generate_instance(4, 20, gen)
        U, B, n = inst.U_true, inst.kappa, 4
        for k in range(n):
            for l in range(k + 1, n):
                Q = quadratic_form(U, k, l)
                for _ in range(20):
                    x, y = gen.uniform(-1, 1, n), gen.uniform(-1, 1, n)
                    f = x @ Q @ y
                    fg = round_to_grid(x, eta) @ Q @ round_to_grid(y, eta)
                    assert abs(f) <= B * n
                    assert abs(f - fg) <= 4 * eta * math.sqrt(n) * (B * n) * 4


# --- probability experiments -------------------------------------------------------

def params_for(U, eps=1e-3):
    return DecompParams.from_schedule(U.shape[0], kappa_F(U) * (1 + 1e-9), eps)


def test_identity_probability_floors():
    U = np.eye(4, dtype=complex)
    rep = probability_experiment(U, params_for(U), 1000, np.random.default_rng(11))
    assert all(rep.passes().values())
    assert rep.max_ratio_mismatch <= 1e-8
    for ev, rate in rep.empirical_rate.items():
        assert 0 <= rate <= 1
        assert rep.success_count[ev] == round(rate * 1000)


def test_floors_are_clamped_with_vacuity_flags():
    floors, vacuous = event_floors(DecompParams.from_schedule(4, 8.0, 1e-3))
    for ev in ("invertible", "gap", "kappa_F"):
        assert 0 <= floors[ev] <= 1
        assert vacuous[ev] == (floors[ev] == 0)
    assert floors["invertible"] > 0.999


def test_forced_singular_draw_is_recorded():
    U = np.eye(3)
    T = from_rank_ones(U)
    row = measure_events(T, U, np.array([1.0, 0, 0]), np.array([0.5, 0.25, -0.5]), params_for(U))
    assert row["invertible"] is False
    assert not row["gap_event"] and not row["kappa_event"]
    row = measure_events(T, U, np.array([0.5, -0.5, 0.25]), np.array([0.5, 0.25, -0.5]), params_for(U))
    assert row["invertible"] and row["ratio_mismatch"] <= 1e-12


def test_results_do_not_depend_on_worker_count():
    inst = generate_instance(4, 20, np.random.default_rng(12))
    p = params_for(inst.U_true)
    r1 = probability_experiment(inst.U_true, p, 64, 99, workers=1)
    r4 = probability_experiment(inst.U_true, p, 64, 99, workers=4)
    assert r1.to_csv() == r4.to_csv()
    with pytest.raises(ValueError):
        probability_experiment(inst.U_true, p, 0, 1)


def test_report_serialisation():
    U = np.eye(3, dtype=complex)
    rep = probability_experiment(U, params_for(U), 20, 3)
    obj = json.loads(rep.to_json())
    assert obj["trials"] == 20 and set(obj["guaranteed_floor"]) == {"invertible", "gap", "kappa_F"}
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert len(rows) == 20
    assert {"seed", "invertible", "gap", "kappa_F_Ta", "gap_event", "kappa_event"} <= set(rows[0])
