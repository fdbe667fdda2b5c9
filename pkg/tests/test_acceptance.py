"""Acceptance criteria, each checked at its stated tolerance.

Every test prints (and records for the terminal summary) one PASS/FAIL line.
Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import time

import numpy as np
import pytest

from skipfree.branching import enumerate_offspring, expected_type_counts
from skipfree.classify import POSITIVE_RECURRENT, classify
from skipfree.cli import main
from skipfree.linalg import a_product_mass, clear_caches, matrix_A, matrix_M, phi
from skipfree.model import RateProfile, TailRule, build_model, homogeneous
from skipfree.oracle import compare
from skipfree.simulate import SimConfig, collect_branching_counts, estimate_exit_up, estimate_return_times
from skipfree.stationary import (
    continuous_return_time,
    embedded_return_time,
    exit_up_probability,
    psi_stationary,
)

from conftest import ACCEPTANCE, random_model

SUITE_SEED = 20240611


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def random_suite(count: int = 100):
    """Rates uniform on [0.1, 10], plus a second batch with death rates boosted
    by a random factor in [1, 30] so both sides of radius 1 are well populated."""
    rng = np.random.default_rng(SUITE_SEED)
    Rs = [1, 2, 3, 5]
    plain = [random_model(rng, Rs[k % 4]) for k in range(count)]
    boosted = []
    for k in range(count):
        m = random_model(rng, Rs[k % 4])
        f = rng.uniform(1, 30)
        prof = m.profile
        scale = lambda row: (row[0] * f, *row[1:])  # noqa: E731
        boosted.append(build_model(RateProfile(
            prof.R,
            (prof.prefix[0],) + tuple(scale(r) for r in prof.prefix[1:]),
            TailRule(prof.tail.kind, tuple(scale(r) for r in prof.tail.block)),
        )))
    return plain + boosted


def tail_radius_oracle(model) -> float:
    """Largest |eigenvalue| of the one-period tail product, from LAPACK."""
    L = max(model.prefix_length, 1)
    P = np.eye(model.R)
    for i in range(L, L + model.period):
        P = P @ matrix_M(model, i)
    return float(np.max(np.abs(np.linalg.eigvals(P))))


def test_criterion_1_mm1_closed_form():
    clear_caches()
    t0 = time.perf_counter()
    m = homogeneous(1, (0, 1), (2, 1))
    res = psi_stationary(m, kmax=50)
    Eeta = continuous_return_time(m)
    ET = embedded_return_time(m)
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(res.psi - 0.5 * 0.5 ** np.arange(51))))
    ok = err <= 1e-10 and abs(Eeta - 2) <= 1e-10 and abs(ET - 4) <= 1e-10 and elapsed < 1.0
    record(1, ok, f"psi err {err:.2e}, Eeta {Eeta!r}, ET {ET!r}, {elapsed:.3f}s")


def test_criterion_2_product_identity():
    rng = np.random.default_rng(SUITE_SEED + 2)
    Rs = [1, 2, 3, 5]
    worst = 0.0
    for k in range(100):
        m = random_model(rng, Rs[k % 4])
        for n in range(1, 51):
            a = float(a_product_mass(m, n))
            b = float(phi(m, n - 1))
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    record(2, worst <= 1e-12, f"100 models, n<=50, max rel diff {worst:.2e}")


def test_criterion_3_oracle_equivalence():
    clear_caches()
    t0 = time.perf_counter()
    m = homogeneous(2, (0, 1, 1), (4, 1, 1))
    r200 = compare(m, 200)
    r400 = compare(m, 400)
    elapsed = time.perf_counter() - t0
    ok = (
        r200.sup_norm <= 1e-8
        and r400.sup_norm <= 1e-10
        and r200.pi_sup_norm <= 1e-8
        and r400.pi_sup_norm <= 1e-10
        and elapsed < 10.0
    )
    record(
        3,
        ok,
        f"psi sup {r200.sup_norm:.1e}/{r400.sup_norm:.1e}, pi sup {r200.pi_sup_norm:.1e}/"
        f"{r400.pi_sup_norm:.1e} (N=200/400), {elapsed:.2f}s",
    )


def test_criterion_4_classification_hypotheses():
    bad = []
    counts = {"below": 0, "above": 0}
    for k, m in enumerate(random_suite()):
        rho = tail_radius_oracle(m)
        res = classify(m)
        if rho < 1:
            counts["below"] += 1
            if res.verdict != POSITIVE_RECURRENT or not res.phi_to_zero_certified:
                bad.append((k, rho, res.verdict))
        else:
            counts["above"] += 1
            if res.verdict == POSITIVE_RECURRENT:
                bad.append((k, rho, res.verdict))
        if res.verdict == POSITIVE_RECURRENT and not res.phi_to_zero_certified:
            bad.append((k, rho, "uncertified products"))
    assert counts["below"] >= 50 and counts["above"] >= 50
    record(4, not bad, f"{counts['below']} with radius<1, {counts['above']} with radius>=1, mismatches {bad[:3]}")


def _within(est, se, target, z=3.0):
    return abs(est - target) <= z * se


def test_criterion_5_monte_carlo():
    t0 = time.perf_counter()
    details = []
    ok = True
    for name, m in (("mm1", homogeneous(1, (0, 1), (2, 1))), ("r2", homogeneous(2, (0, 1, 1), (4, 1, 1)))):
        est = estimate_return_times(m, SimConfig(seed=2024, excursions=100_000))
        ET, Eeta = embedded_return_time(m), continuous_return_time(m)
        good = _within(est.mean_T, est.se_T, ET) and _within(est.mean_eta, est.se_eta, Eeta)
        ok &= good
        details.append(
            f"{name} T {est.mean_T:.4f}+-{est.se_T:.4f} vs {ET:.4f}, "
            f"eta {est.mean_eta:.4f}+-{est.se_eta:.4f} vs {Eeta:.4f}"
        )
    r2 = homogeneous(2, (0, 1, 1), (4, 1, 1))
    mm1 = homogeneous(1, (0, 1), (2, 1))
    for m, (a, b, k) in ((mm1, (0, 3, 1)), (r2, (0, 6, 2)), (r2, (2, 9, 4))):
        exact = exit_up_probability(m, a, b, k)
        est = estimate_exit_up(m, SimConfig(seed=77, excursions=100_000), a, b, k)
        sigma = math.sqrt(exact * (1 - exact) / est.n)
        good = _within(est.frequency, sigma, exact)
        ok &= good
        details.append(f"exit({a},{b},{k}) {est.frequency:.4f} vs {exact:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    record(5, ok, "; ".join(details) + f"; {elapsed:.1f}s")


def test_criterion_6_branching_structure():
    details = []
    ok = True
    m = homogeneous(2, (0, 2, 0), (4, 1, 1))  # site 0 only steps to 1, so E U_1 = e1
    est = collect_branching_counts(m, SimConfig(seed=31, excursions=100_000), levels=range(1, 6))
    ok &= est.identity_violations == 0
    details.append(f"identity violations {est.identity_violations}/{est.n}")

    # e1 A_1 ... A_{i-1} from plain dense products
    v = np.eye(2)[0]
    worst_z = 0.0
    for i in range(1, 6):
        mean, se = est.mean[i - 1], est.se[i - 1]
        if i == 1:
            ok &= bool(np.all(mean == v) and np.all(se == 0))
        else:
            z = np.abs(mean - v) / se
            worst_z = max(worst_z, float(z.max()))
        ok &= np.allclose(expected_type_counts(m, i), v, rtol=1e-14, atol=0)
        v = v @ matrix_A(m, i)
    ok &= worst_z <= 3.0
    details.append(f"max |z| for U_2..U_5 {worst_z:.2f}")

    # first jump +1 or +2 with equal odds: E U_i = (1/2, 1/2) A_1 ... A_{i-1}
    m2 = homogeneous(2, (0, 1, 1), (4, 1, 1))
    est2 = collect_branching_counts(m2, SimConfig(seed=32, excursions=100_000), levels=range(1, 6))
    ok &= est2.identity_violations == 0
    v = np.array([0.5, 0.5])
    worst_z2 = 0.0
    for i in range(1, 6):
        ok &= np.allclose(expected_type_counts(m2, i), v, rtol=1e-14, atol=0)
        worst_z2 = max(worst_z2, float(np.max(np.abs(est2.mean[i - 1] - v) / est2.se[i - 1])))
        v = v @ matrix_A(m2, i)
    ok &= worst_z2 <= 3.0
    details.append(f"split-entry model: violations {est2.identity_violations}, max |z| {worst_z2:.2f}")

    worst_mass, worst_mean = 1.0, 0.0
    for parent in (1, 2):
        for i in (1, 3):
            pairs, _ = enumerate_offspring(m, i, parent)
            worst_mass = min(worst_mass, math.fsum(p for _, p in pairs))
            mean = sum(np.array(u, dtype=float) * p for u, p in pairs)
            worst_mean = max(worst_mean, float(np.max(np.abs(mean - matrix_A(m, i)[parent - 1]))))
    ok &= worst_mass >= 1 - 1e-10 and worst_mean <= 1e-8
    details.append(f"pmf mass >= {worst_mass:.12f}, mean err {worst_mean:.1e}")
    record(6, ok, "; ".join(details))


def test_criterion_7_renewal_identity():
    fixtures = [
        homogeneous(1, (0, 1), (2, 1)),
        homogeneous(2, (0, 1, 1), (4, 1, 1)),
        homogeneous(2, (0, 2, 0), (4, 1, 1)),
    ]
    worst = 0.0
    checked = 0
    for m in fixtures + random_suite():
        if classify(m).verdict != POSITIVE_RECURRENT:
            continue
        res = psi_stationary(m, kmax=3)
        target = 1.0 / m.up_rate(0)
        worst = max(worst, abs(res.psi[0] * res.Eeta - target) / target)
        checked += 1
    record(7, worst <= 1e-12 and checked >= 10, f"{checked} positive-recurrent models, max rel err {worst:.2e}")


@pytest.mark.parametrize("model_file", ["r2_homogeneous.yaml"])
def test_criterion_8_determinism(models_dir, tmp_path, model_file):
    outputs = {}
    for workers in (1, 2, 8):
        for rep in range(2):
            target = tmp_path / f"w{workers}_{rep}.csv"
            code = main([
                "simulate", "--model", str(models_dir / model_file), "--seed", "12345",
                "--excursions", "20000", "--workers", str(workers), "--format", "csv", "--out", str(target),
            ])
            assert code == 0
            outputs[(workers, rep)] = target.read_bytes()
    distinct = len(set(outputs.values()))
    record(8, distinct == 1, f"{len(outputs)} runs over 1/2/8 workers, {distinct} distinct output(s)")
