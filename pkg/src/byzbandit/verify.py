"""Invariant and Monte Carlo verification suites behind ``byzbandit verify``."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import load_preset
from .core import AgentState
from .engine import SimOptions, compute_regret, resilient_bound, simulate, ucb1_bound
from .resilience import Report, filter_arrays, filter_pipeline, trimmed_mean_oracle
from .topology import degree_requirement_probability

COUNTEREXAMPLE_TARGET = 11 / 24
UCB1_FIXTURE = 2580.40


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# ---------------------------------------------------------------- filters


def random_filter_cases(n_cases: int, seed: int = 0, max_senders: int = 9, max_f: int = 3):
    """Random (own count, own mean, kappa, f, reports) inputs.

    Half the means come from a coarse grid so ties are frequent.
    """
    rng = np.random.default_rng(seed)
    s = rng.integers(0, max_senders + 1, n_cases)
    f = rng.integers(0, max_f + 1, n_cases)
    kappa = 1.0 + rng.random(n_cases)
    own_count = rng.integers(1, 50, n_cases)
    own_mean = rng.integers(0, 5, n_cases) / 4
    counts = rng.integers(0, 60, (n_cases, max_senders))
    grid = rng.random((n_cases, max_senders)) < 0.5
    means = np.where(grid, rng.integers(0, 5, (n_cases, max_senders)) / 4, rng.random((n_cases, max_senders)))
    mask = np.arange(max_senders) < s[:, None]
    return own_count, own_mean, kappa, f, counts, means, mask


def check_filters(n_cases: int = 100_000, seed: int = 0) -> list[Check]:
    own_count, own_mean, kappa, f, counts, means, mask = random_filter_cases(n_cases, seed)
    failures = {"g<=1": 0, "g<1 iff B nonempty": 0, "|B| = max(|A|-2f, 0)": 0,
                "trimmed mean equals oracle": 0, "vectorized equals scalar": 0}
    scalar_z = np.empty(n_cases)
    scalar_b = np.zeros_like(mask)
    for c in range(n_cases):
        state = AgentState(0, np.array([own_count[c]]), np.array([own_mean[c] * own_count[c]]), float(kappa[c]))
        senders = np.flatnonzero(mask[c])
        reports = [Report(int(j) + 1, 0, int(counts[c, j]), float(means[c, j])) for j in senders]
        out = filter_pipeline(state, 0, reports, int(f[c]))
        scalar_z[c] = out.z
        for j in out.b_set:
            scalar_b[c, j - 1] = True
        failures["g<=1"] += out.g > 1
        failures["g<1 iff B nonempty"] += (out.g < 1) != bool(out.b_set)
        failures["|B| = max(|A|-2f, 0)"] += len(out.b_set) != max(len(out.a_set) - 2 * int(f[c]), 0)
        oracle = trimmed_mean_oracle([(j, float(means[c, j - 1])) for j in out.a_set], int(f[c]))
        failures["trimmed mean equals oracle"] += oracle != set(out.b_set)
    own_means = (own_mean * own_count) / own_count
    for fv in np.unique(f):
        sel = f == fv
        z, g, b_size, a_mask, b_mask = filter_arrays(
            own_count[sel][:, None], own_means[sel][:, None], counts[sel][:, None], means[sel][:, None],
            mask[sel][:, None], kappa[sel], int(fv), want_sets=True)
        bad = (z[:, 0] != scalar_z[sel]) | (b_mask[:, 0] != scalar_b[sel]).any(axis=-1)
        failures["vectorized equals scalar"] += int(bad.sum())
    return [Check(f"filters: {name}", count == 0, f"{count} violations in {n_cases} cases")
            for name, count in failures.items()]


# ---------------------------------------------------------------- counterexample


def counterexample_probes(runs: int = 20_000, horizon: int = 1000, probes=(1, 10, 100, 1000)) -> dict:
    """Monte Carlo mean of agent 2's consensus estimate at the probe rounds."""
    config = load_preset("counterexample")
    from dataclasses import replace

    config = replace(config, runs=runs, horizon=horizon)
    out = simulate(config, options=SimOptions(record_arms=False, track_bounds=False, probes=tuple(probes)))
    return {t: (float(v[:, 2, 0].mean()), float(v[:, 2, 0].std() / math.sqrt(runs))) for t, v in out.probes.items()}


def consensus_regret(runs: int = 50, horizon: int = 10_000) -> float:
    """Mean network-average regret at the horizon for the consensus preset."""
    from dataclasses import replace

    config = replace(load_preset("consensus-regret"), runs=runs, horizon=horizon)
    out = simulate(config, options=SimOptions(track_bounds=False))
    arms = out.arms[:, :, config.normal_ids]
    return float(np.mean([compute_regret(a, config.env.gaps)[-1].mean() for a in arms]))


def check_counterexample(runs: int = 20_000) -> list[Check]:
    probes = counterexample_probes(runs)
    checks = []
    limit = COUNTEREXAMPLE_TARGET + 0.01
    for t, (mean, se) in sorted(probes.items()):
        checks.append(Check(f"counterexample: E[z(t)] <= 11/24 + 0.01 at t={t}", mean <= limit,
                            f"mean {mean:.5f} (se {se:.5f}), margin {limit - mean:.5f}"))
    mean1, se1 = probes[1]
    gap = abs(mean1 - COUNTEREXAMPLE_TARGET)
    checks.append(Check("counterexample: E[z(1)] within 0.005 of 11/24", gap <= 0.005,
                        f"mean {mean1:.5f} (se {se1:.5f}), |diff| {gap:.5f}"))
    T = 10_000
    regret = consensus_regret(horizon=T)
    reference = 0.5 * 0.05 * T
    checks.append(Check("counterexample: consensus regret at T exceeds half the linear reference",
                        regret > reference, f"regret {regret:.1f} vs {reference:.1f}"))
    return checks


# ---------------------------------------------------------------- bounds


def check_bounds() -> list[Check]:
    gaps = [0.0, 0.05, 0.1, 0.2]
    T = 10_000
    checks = []
    value = ucb1_bound(gaps, T)
    hand = 8 * math.log(T) * (1 / 0.05 + 1 / 0.1 + 1 / 0.2) + (1 + math.pi ** 2 / 3) * 0.35
    checks.append(Check("bounds: ucb1 fixture", abs(value - UCB1_FIXTURE) < 0.05 and math.isclose(value, hand),
                        f"{value:.4f} vs {UCB1_FIXTURE}"))
    plain, tau = resilient_bound(np.ones((T, 4)), gaps, T)
    checks.append(Check("bounds: g == 1 reduces to ucb1", math.isclose(plain, value, rel_tol=1e-12),
                        f"{plain:.6f} vs {value:.6f}"))
    plain_g, _ = resilient_bound(np.full((T, 4), 0.625), gaps, T)
    const = (1 + math.pi ** 2 / 3) * 0.35
    expected = 0.625 * (value - const) + const
    checks.append(Check("bounds: g == 0.625 scales the log term", math.isclose(plain_g, expected, rel_tol=1e-12),
                        f"{plain_g:.6f} vs {expected:.6f}"))
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(200):
        n = int(rng.integers(1, 300))
        g = rng.choice([1.0, 0.4, 0.625, 0.3], size=(n, 4))
        p, tm = resilient_bound(g, gaps, n)
        worst = max(worst, tm - p)
    checks.append(Check("bounds: tau-minimized <= plain", worst <= 1e-9, f"max(tau_min - plain) = {worst:.3g}"))
    from scipy.special import comb

    worst = 0.0
    for q in np.linspace(0.05, 1.0, 20):
        direct = sum(comb(9, i, exact=True) * q ** i * (1 - q) ** (9 - i) for i in range(7, 10)) ** 10
        got = degree_requirement_probability(float(q), 10, 2)
        worst = max(worst, abs(got - direct) / max(direct, 1e-300))
    checks.append(Check("bounds: degree requirement closed form", worst < 1e-12, f"max rel err {worst:.2e}"))
    return checks


SUITES: dict[str, Callable[[], list[Check]]] = {
    "filters": check_filters,
    "counterexample": check_counterexample,
    "bounds": check_bounds,
}


def run_suite(name: str, echo: Optional[Callable[[str], None]] = print) -> list[Check]:
    names = list(SUITES) if name == "all" else [name]
    if any(n not in SUITES for n in names):
        raise ValueError(f"unknown suite {name!r}")
    checks = []
    for n in names:
        start = time.perf_counter()
        result = SUITES[n]()
        if echo:
            for c in result:
                echo(c.line())
            echo(f"suite {n} finished in {time.perf_counter() - start:.1f}s")
        checks.extend(result)
    return checks
