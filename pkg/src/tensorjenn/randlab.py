"""Grid sampling and Monte Carlo checks of the probabilistic guarantees.

The grid ``G_eta`` has ``2/eta`` points ``-1, -1 + eta, ..., 1 - eta`` per
coordinate, and rounding maps ``x`` to the grid point just below it. Events
measured here (invertibility of ``T^(a)``, the eigenvalue gap of
``(T^(a))^{-1} T^(b)`` and ``kappa_F(T^(a))``) concern exact quantities, so
they are evaluated with host-precision linear algebra.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fptensor import from_rank_ones, linear_combo_slices
from .spectral import gap, kappa_F, match_eigenvalues

INVERTIBLE_RTOL = 1e-12
_INDEX_SAMPLING_LIMIT = 2 ** 61


def _grid_count(eta):
    N = round(1.0 / eta)
    if N < 1 or not math.isclose(N * eta, 1.0, rel_tol=1e-12):
        raise ValueError(f"1/eta must be a positive integer, got eta={eta!r}")
    return N


@dataclass(frozen=True)
class Grid:
    """The grid ``{-1, -1 + eta, ..., 1 - eta}^dim``."""

    eta: float
    dim: int

    def __post_init__(self):
        _grid_count(self.eta)

    @property
    def count(self):
        return _grid_count(self.eta)

    @property
    def points_per_axis(self):
        return 2 * self.count

    def axis(self):
        N = self.count
        return (np.arange(2 * N) - N) / N

    def contains(self, x):
        N = self.count
        m = np.asarray(x) * N
        return bool(np.all((m == np.round(m)) & (np.asarray(x) >= -1) & (np.asarray(x) < 1)))


def round_to_grid(x, eta):
    """Floor each coordinate of ``x`` in ``[-1, 1)`` to the grid of step ``eta``.

    A coordinate equal to 1.0 is clamped to ``1 - eta`` with a warning.
    """
    N = _grid_count(eta)
    x = np.asarray(x, dtype=float)
    if np.any(x < -1) or np.any(x > 1):
        raise ValueError("coordinates must lie in [-1, 1)")
    at_one = x == 1.0
    if np.any(at_one):
        warnings.warn("coordinate equal to 1.0 clamped to 1 - eta", RuntimeWarning, stacklevel=2)
    m = np.floor(x * N)
    # guard against x*N rounding up across an integer
    m = np.where(m / N > x, m - 1, m)
    m = np.where((m + 1) / N <= x, m + 1, m)
    m = np.where(at_one, N - 1, m)
    return m / N


def sample_grid(eta, n, rng):
    """Uniform ``(a, b)`` from ``G_eta`` with ``a, b`` of length ``n``."""
    N = _grid_count(eta)
    if 2 * N <= _INDEX_SAMPLING_LIMIT:
        k = rng.integers(0, 2 * N, size=2 * n)
        v = (k - N) / N
    else:
        v = round_to_grid(rng.uniform(-1.0, 1.0, size=2 * n), eta)
    return v[:n], v[n:]


def anticoncentration_threshold(kind, alpha, B, eta, n):
    """Grid-corrected threshold that ``|P|`` should exceed with high probability."""
    if kind == "linear":
        return alpha / math.sqrt(3 * B) - eta * math.sqrt(n * B)
    if kind == "quadratic":
        return math.sqrt(2) * alpha / (3 * B) - 16 * eta * B * n ** 1.5
    raise ValueError(f"kind must be 'linear' or 'quadratic', got {kind!r}")


def anticoncentration_floor(kind, alpha, C_CW=1.0):
    if kind == "linear":
        return 1 - 2 * C_CW * alpha
    if kind == "quadratic":
        return 1 - 4 * C_CW * math.sqrt(alpha)
    raise ValueError(f"kind must be 'linear' or 'quadratic', got {kind!r}")


def linear_form(U, k):
    """Coefficients of ``P^k(x) = sum_i U[i, k] x_i``."""
    return np.asarray(U, dtype=complex)[:, k]


def quadratic_form(U, k, l):
    """Coefficient matrix of ``P^{kl}(x, y) = sum_ij (U[i,k] U[j,l] - U[i,l] U[j,k]) x_i y_j``."""
    U = np.asarray(U, dtype=complex)
    return np.outer(U[:, k], U[:, l]) - np.outer(U[:, l], U[:, k])


def polynomial_norm_mc(U, kind, samples, rng, k=0, l=1):
    """Monte Carlo estimate of ``E|P|^2`` for ``x, y`` uniform on ``[-1, 1]^n``."""
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    x = rng.uniform(-1, 1, size=(samples, n))
    if kind == "linear":
        vals = x @ linear_form(U, k)
    else:
        y = rng.uniform(-1, 1, size=(samples, n))
        vals = np.einsum("si,ij,sj->s", x, quadratic_form(U, k, l), y)
    return float(np.mean(np.abs(vals) ** 2))


def anticoncentration_experiment(U, kind, alpha, trials, rng, *, B=None, eta=1e-6, k=0, l=1):
    """Fraction of grid samples where ``|P^k|`` (or ``|P^{kl}|``) exceeds the threshold."""
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    B = kappa_F(U) if B is None else B
    thr = anticoncentration_threshold(kind, alpha, B, eta, n)
    N = _grid_count(eta)
    x = (rng.integers(0, 2 * N, size=(trials, n)) - N) / N
    if kind == "linear":
        vals = x @ linear_form(U, k)
    else:
        y = (rng.integers(0, 2 * N, size=(trials, n)) - N) / N
        vals = np.einsum("si,ij,sj->s", x, quadratic_form(U, k, l), y)
    return float(np.mean(np.abs(vals) >= thr))


@dataclass
class ProbReport:
    """Empirical event rates next to their guaranteed floors."""

    trials: int
    n: int
    B: float
    success_count: dict
    empirical_rate: dict
    guaranteed_floor: dict
    floor_vacuous: dict
    max_ratio_mismatch: float
    rows: list = field(default_factory=list, repr=False)

    def passes(self, sigmas=3.0):
        """Each rate at least its clamped floor minus ``sigmas`` binomial standard deviations."""
        out = {}
        for ev, f in self.guaranteed_floor.items():
            sd = math.sqrt(f * (1 - f) / self.trials)
            out[ev] = self.empirical_rate[ev] >= f - sigmas * sd
        return out

    def to_json(self):
        return json.dumps({
            "trials": self.trials, "n": self.n, "B": self.B,
            "success_count": self.success_count, "empirical_rate": self.empirical_rate,
            "guaranteed_floor": self.guaranteed_floor, "floor_vacuous": self.floor_vacuous,
            "max_ratio_mismatch": self.max_ratio_mismatch,
        }, indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        cols = ["trial", "seed", "invertible", "gap", "kappa_F_Ta", "gap_event", "kappa_event",
                "ratio_mismatch"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({c: r[c] for c in cols})
        return buf.getvalue()


def event_floors(params):
    """Floors for the invertible, gap and kappa events, clamped at 0, with vacuity flags."""
    n, B, eta, C_CW = params.n, params.B, params.eta, params.C_CW
    alpha_gap = n * B * params.k_gap / 2 + 16 * eta * B * n ** 1.5
    alpha_F = math.sqrt(3 * B) * (math.sqrt(n * B ** 2 / (params.k_F - n * B ** 3))
                                  + eta * math.sqrt(n * B))
    raw = {
        "invertible": 1 - n * eta / 2,
        "gap": 1 - (4 * n ** 2 * C_CW * math.sqrt(3 * B * alpha_gap / math.sqrt(2)) + n * eta / 2),
        "kappa_F": 1 - (2 * n * C_CW * alpha_F + n * eta / 2),
    }
    return {k: max(0.0, v) for k, v in raw.items()}, {k: v <= 0 for k, v in raw.items()}


def _trial_seed(master, t):
    return int(np.random.SeedSequence(master, spawn_key=(t,)).generate_state(1, np.uint64)[0])


def measure_events(T, U, a, b, params):
    """Evaluate the three events for one draw ``(a, b)`` in host precision."""
    from .jennrich import eigenvalue_ratio_oracle

    Ta = linear_combo_slices(T, a)
    Tb = linear_combo_slices(T, b)
    sv = np.linalg.svd(Ta, compute_uv=False)
    invertible = bool(sv[-1] >= INVERTIBLE_RTOL * np.linalg.norm(Ta))
    row = {"invertible": invertible, "gap": float("nan"), "kappa_F_Ta": float("inf"),
           "gap_event": False, "kappa_event": False, "ratio_mismatch": float("nan")}
    if invertible:
        lam = np.linalg.eigvals(np.linalg.solve(Ta, Tb))
        g = gap(lam)
        kF = float(np.sum(sv ** 2) + np.sum(sv ** -2.0))
        row.update(gap=g, kappa_F_Ta=kF, gap_event=bool(g >= params.k_gap),
                   kappa_event=bool(kF <= params.k_F))
        try:
            ratios = eigenvalue_ratio_oracle(U, a, b)
            _, err = match_eigenvalues(lam, ratios)
            row["ratio_mismatch"] = float(np.max(err / np.maximum(1.0, np.abs(ratios))))
        except ZeroDivisionError:
            pass
    return row


def _one_trial(T, U, params, master, t):
    seed = _trial_seed(master, t)
    a, b = sample_grid(params.eta, params.n, np.random.default_rng(seed))
    row = {"trial": t, "seed": seed}
    row.update(measure_events(T, U, a, b, params))
    return row


def probability_experiment(U, params, trials, rng, workers=1):
    """Sample ``trials`` grid draws for ``T = sum u_i^{(x)3}`` and count the three events.

    Each trial gets its own generator derived from a master seed and the
    trial index, so results do not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    U = np.asarray(U, dtype=complex)
    T = from_rank_ones(U)
    master = int(rng.integers(2 ** 63)) if isinstance(rng, np.random.Generator) else int(rng)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(lambda t: _one_trial(T, U, params, master, t), range(trials)))
    else:
        rows = [_one_trial(T, U, params, master, t) for t in range(trials)]
    counts = {
        "invertible": sum(r["invertible"] for r in rows),
        "gap": sum(r["invertible"] and r["gap_event"] for r in rows),
        "kappa_F": sum(r["invertible"] and r["kappa_event"] for r in rows),
    }
    floors, vacuous = event_floors(params)
    mism = [r["ratio_mismatch"] for r in rows if not math.isnan(r["ratio_mismatch"])]
    return ProbReport(
        trials=trials, n=params.n, B=params.B, success_count=counts,
        empirical_rate={k: v / trials for k, v in counts.items()},
        guaranteed_floor=floors, floor_vacuous=vacuous,
        max_ratio_mismatch=max(mism) if mism else float("nan"), rows=rows,
    )
