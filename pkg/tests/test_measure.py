"""Tests for empirical laws, distances and the long-time diagnostics."""

import itertools
import math

import numpy as np
import pytest

from src.errors import ConfigurationError
from src.lab.measure import (
    MIN_REFERENCE_SIZE,
    EmpiricalMeasure,
    InvariantReport,
    InvariantRow,
    ReferenceKind,
    StationaryReference,
    bootstrap_stderr,
    checkpoint_steps,
    density_plot_data,
    evolve_empirical_law,
    invariant_convergence_report,
    ks_statistic,
    load_snapshot,
    save_snapshot,
    two_initial_value_coupling,
    wasserstein_k,
)
from src.noise.samplers import sample_alpha_stable
from src.noise.seeds import SeedPolicy
from src.noise.spec import LevyKind, NoiseSpec
from tests.conftest import cubic_problem, ou_problem, poisson_noise

# ── Wasserstein ──


def test_wasserstein_identical_samples():
    a = np.random.default_rng(0).normal(size=50)
    assert wasserstein_k(a, a.copy(), 0.5) == 0.0


def test_wasserstein_point_masses():
    assert wasserstein_k([0.0], [2.0], 1.0) == pytest.approx(2.0)
    assert wasserstein_k([0.0], [4.0], 0.5) == pytest.approx(2.0)


def test_wasserstein_sorted_coupling_example():
    assert wasserstein_k([1.0, 0.0], [3.0, 1.0], 0.5) == pytest.approx((1.0 + math.sqrt(2.0)) / 2.0)


def test_wasserstein_symmetry_and_triangle():
    rng = np.random.default_rng(1)
    x, y, z = (rng.standard_cauchy(40) for _ in range(3))
    for k in (0.3, 0.5, 1.0):
        assert wasserstein_k(x, y, k) == pytest.approx(wasserstein_k(y, x, k))
        assert wasserstein_k(x, z, k) <= wasserstein_k(x, y, k) + wasserstein_k(y, z, k) + 1e-12


def test_w1_sorted_coupling_is_optimal():
    rng = np.random.default_rng(2)
    for n in range(1, 7):
        x, y = rng.normal(size=n), rng.normal(size=n)
        brute = min(np.mean(np.abs(x - y[list(p)])) for p in itertools.permutations(range(n)))
        assert wasserstein_k(x, y, 1.0) == pytest.approx(brute, abs=1e-12)


def test_wasserstein_unequal_sizes_is_seeded():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=30), rng.normal(size=100)
    a = wasserstein_k(x, y, 1.0, SeedPolicy(4))
    b = wasserstein_k(x, y, 1.0, SeedPolicy(4))
    assert a == b
    assert a == pytest.approx(wasserstein_k(y, x, 1.0, SeedPolicy(4)))


def test_wasserstein_rejects_bad_order():
    with pytest.raises(ConfigurationError):
        wasserstein_k([0.0], [1.0], 1.5)
    with pytest.raises(ConfigurationError):
        wasserstein_k([0.0], [1.0], 0.0)
    with pytest.raises(ConfigurationError):
        wasserstein_k([], [1.0], 1.0)


# ── references and KS ──


def test_analytic_reference_scale():
    ref = StationaryReference.analytic_stable(1.5, theta=2.0, noise_scale=2.0)
    assert ref.kind == ReferenceKind.ANALYTIC_STABLE
    assert ref.scale == pytest.approx(0.96150, abs=1e-5)
    assert ref.to_dict() == {"kind": "analytic_stable", "alpha": 1.5, "scale": ref.scale}


def test_reference_validation():
    with pytest.raises(ConfigurationError):
        StationaryReference(ReferenceKind.EMPIRICAL_SNAPSHOT)
    with pytest.raises(ConfigurationError):
        StationaryReference.analytic_stable(1.5, theta=0.0)
    with pytest.raises(ConfigurationError):
        StationaryReference(ReferenceKind.ANALYTIC_STABLE, alpha=2.5, scale=1.0)


def test_reference_sample_size_and_reuse():
    ref = StationaryReference.analytic_stable(1.5)
    sample = ref.reference_sample(10, SeedPolicy(1))
    assert sample.size == MIN_REFERENCE_SIZE
    assert np.all(np.diff(sample) >= 0)
    assert np.array_equal(sample[:100], ref.reference_sample(10, SeedPolicy(1))[:100])


def test_ks_is_rank_invariant():
    rng = np.random.default_rng(5)
    a, r = rng.normal(size=200), rng.normal(0.3, 1.0, 2000)
    plain = ks_statistic(a, StationaryReference.empirical(EmpiricalMeasure(r)))
    for transform in (np.exp, lambda v: v**3):
        moved = ks_statistic(transform(a), StationaryReference.empirical(EmpiricalMeasure(transform(r))))
        assert moved.statistic == pytest.approx(plain.statistic)
        assert moved.pvalue == pytest.approx(plain.pvalue)


def test_ks_detects_shifted_sample():
    ref = StationaryReference.analytic_stable(1.5)
    same = sample_alpha_stable(1.5, ref.scale, 1.0, 2000, SeedPolicy(6))
    assert ks_statistic(same, ref, SeedPolicy(7)).pvalue > 1e-4
    assert ks_statistic(same + 5.0, ref, SeedPolicy(7)).pvalue < 1e-6


def test_ks_refuses_small_analytic_reference():
    ref = StationaryReference.analytic_stable(1.5)
    with pytest.raises(ConfigurationError):
        ks_statistic(np.zeros(100), ref, reference_values=np.linspace(-1.0, 1.0, 500))


def test_ks_refuses_degenerate_reference():
    ref = StationaryReference.empirical(EmpiricalMeasure(np.full(200, 3.0)))
    with pytest.raises(ConfigurationError, match="degenerate"):
        ks_statistic(np.linspace(0.0, 1.0, 200), ref)


def test_bootstrap_stderr_is_positive():
    rng = np.random.default_rng(8)
    measure = EmpiricalMeasure(rng.normal(size=300))
    ks_se, w_se = bootstrap_stderr(measure, np.sort(rng.normal(size=3000)), 1.0, 10, SeedPolicy(9))
    assert ks_se > 0.0
    assert w_se > 0.0
    with pytest.raises(ConfigurationError):
        bootstrap_stderr(measure, measure.values, n_boot=1)


# ── empirical laws ──


def test_empirical_measure_sorts_and_validates():
    m = EmpiricalMeasure([3.0, -1.0, 2.0], time=0.5)
    assert list(m.values) == [-1.0, 2.0, 3.0]
    assert m.n == 3
    with pytest.raises(ConfigurationError):
        EmpiricalMeasure([])


def test_checkpoint_steps():
    assert checkpoint_steps([0.1, 0.3, 0.7, 2.0, 5.0], 0.01) == [10, 30, 70, 200, 500]
    assert checkpoint_steps([0.0], 0.01) == [0]
    with pytest.raises(ConfigurationError):
        checkpoint_steps([0.15], 0.1)


def test_noise_free_law_is_a_point_mass():
    theta, dt = 2.0, 0.1
    snaps = evolve_empirical_law(ou_problem(theta=theta, x0=1.0), dt, 8, [0.0, 0.5, 1.0], SeedPolicy(1), batch_size=3)
    assert [s.time for s in snaps] == pytest.approx([0.0, 0.5, 1.0])
    for snap, n in zip(snaps, (0, 5, 10)):
        assert snap.n == 8
        assert np.allclose(snap.values, (1.0 / (1.0 + theta * dt)) ** n)
    assert wasserstein_k(snaps[0], snaps[-1], 0.5) == pytest.approx((1.0 - 1.2**-10) ** 0.5)


def test_evolved_law_is_batch_invariant():
    problem = ou_problem(noise=poisson_noise(centered=True))
    a = evolve_empirical_law(problem, 0.1, 12, [0.5, 1.0], SeedPolicy(2), batch_size=12)
    b = evolve_empirical_law(problem, 0.1, 12, [0.5, 1.0], SeedPolicy(2), batch_size=5)
    for x, y in zip(a, b):
        assert np.allclose(x.values, y.values, rtol=1e-12, atol=1e-12)
    assert a[0].provenance["n_paths"] == 12


def test_non_centered_jumps_are_refused():
    with pytest.raises(ConfigurationError, match="zero-mean"):
        evolve_empirical_law(ou_problem(noise=poisson_noise()), 0.1, 4, [0.5], SeedPolicy(1))


def test_evolve_needs_two_paths():
    with pytest.raises(ConfigurationError):
        evolve_empirical_law(ou_problem(), 0.1, 1, [0.5], SeedPolicy(1))


# ── invariant report ──


def test_report_of_reference_itself_is_zero():
    values = np.random.default_rng(10).normal(size=400)
    snap = EmpiricalMeasure(values, time=1.0)
    report = invariant_convergence_report([snap], StationaryReference.empirical(snap), k=0.5, n_boot=4)
    row = report.rows[0]
    assert row.ks == 0.0
    assert row.wasserstein == 0.0
    assert report.final_indistinguishable
    assert report.to_dict()["reference"] == {"kind": "empirical_snapshot", "time": 1.0, "n": 400}


def test_report_decreasing_flags_allow_noise():
    rows = (
        InvariantRow(0.1, 0.50, 0.0, 0.01, 2.0, 0.05),
        InvariantRow(0.5, 0.10, 0.0, 0.01, 0.5, 0.05),
        InvariantRow(2.0, 0.11, 0.2, 0.01, 0.52, 0.05),
    )
    report = InvariantReport(rows, 1.0, {})
    assert report.ks_decreasing
    assert report.wasserstein_decreasing
    assert report.final_pvalue == 0.2

    rising = InvariantReport(rows[:1] + (InvariantRow(0.5, 0.9, 0.0, 0.01, 3.0, 0.05),), 1.0, {})
    assert not rising.ks_decreasing
    assert not rising.wasserstein_decreasing
    assert not rising.final_indistinguishable


def test_stable_ou_approaches_its_stationary_law():
    noise = NoiseSpec(levy_kind=LevyKind.ALPHA_STABLE, alpha=1.5, scale=2.0)
    problem = ou_problem(theta=2.0, x0=10.0, horizon=3.0, noise=noise)
    snaps = evolve_empirical_law(problem, 0.01, 400, [0.1, 0.5, 3.0], SeedPolicy(11), batch_size=200)
    report = invariant_convergence_report(snaps, StationaryReference.analytic_stable(1.5), 1.0, SeedPolicy(12), n_boot=5)
    assert report.rows[0].ks > report.rows[-1].ks
    assert report.ks_decreasing
    assert report.rows[0].wasserstein > report.rows[-1].wasserstein


def test_report_needs_snapshots():
    with pytest.raises(ConfigurationError):
        invariant_convergence_report([], StationaryReference.analytic_stable(1.5))


# ── coupling ──


def test_coupling_of_equal_starts_is_zero():
    problem = cubic_problem(noise=poisson_noise(brownian_dim=1, centered=True))
    curve = two_initial_value_coupling(problem, 0.1, 2.0, 2.0, 6, 1.0, SeedPolicy(1))
    assert np.all(curve.mean == 0.0)
    assert curve.steps.shape == (11,)


def test_coupling_contracts_within_envelope():
    problem = cubic_problem(noise=poisson_noise(brownian_dim=1, centered=True))
    curve = two_initial_value_coupling(problem, 0.1, 10.0, -10.0, 20, 2.0, SeedPolicy(2), batch_size=7)
    assert curve.envelope is not None
    assert curve.envelope[0] == pytest.approx(400.0)
    assert curve.mean[0] == pytest.approx(400.0)
    assert curve.within_envelope
    assert curve.mean[-1] < 1e-3 * curve.mean[0]
    assert curve.rows()[1]["t"] == pytest.approx(0.1)


def test_coupling_without_constants_has_no_envelope():
    curve = two_initial_value_coupling(ou_problem(), 0.1, 1.0, -1.0, 4, 0.5, SeedPolicy(3))
    assert curve.envelope is None
    assert curve.within_envelope is None
    assert curve.mean[-1] == pytest.approx(4.0 * (1.0 / 1.2) ** 10)


def test_coupling_rejects_short_horizon():
    with pytest.raises(ConfigurationError):
        two_initial_value_coupling(ou_problem(), 0.5, 1.0, -1.0, 4, 0.2, SeedPolicy(3))


# ── plot data and snapshots ──


def test_density_plot_data():
    measure = EmpiricalMeasure(np.random.default_rng(13).normal(size=2000))
    points = density_plot_data(measure, n_points=50)
    assert len(points) == 50
    assert all(p["density"] >= 0 for p in points)
    peak = max(points, key=lambda p: p["density"])
    assert abs(peak["x"]) < 0.5
    with pytest.raises(ConfigurationError):
        density_plot_data(EmpiricalMeasure(np.ones(10)))


def test_snapshot_round_trip(tmp_path):
    measure = EmpiricalMeasure([0.3, -2.0, 1.5], time=0.1, provenance={"problem": "ou", "dt": 0.01})
    stem = tmp_path / "snapshots" / "t_0.1"
    path = save_snapshot(measure, stem)
    assert path.name == "t_0.1.npy"
    assert (tmp_path / "snapshots" / "t_0.1.json").exists()
    loaded = load_snapshot(stem)
    assert np.array_equal(loaded.values, measure.values)
    assert loaded.time == 0.1
    assert loaded.provenance == {"problem": "ou", "dt": 0.01}
