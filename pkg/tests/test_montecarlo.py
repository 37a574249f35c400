import numpy as np
import pytest

from aircomp import montecarlo
from aircomp.montecarlo import (
    DataDistribution,
    ExperimentSpec,
    compare_to_theory,
    run_experiment,
    run_mv_experiment,
)


def make_spec(**kw):
    base = dict(
        experiment_id="t",
        K=10, M=1, L=2, beta=1e4,
        mapping="affine", estimator="raw", csi="sc",
        distribution=DataDistribution("uniform"),
        sweep_var="beta", sweep_grid=(1e3,),
        trials=4000, metric="mse", seed=7,
    )
    base.update(kw)
    return ExperimentSpec(**base)


# ------------------------------------------------------------- distributions


def test_distribution_supports():
    rng = np.random.default_rng(1)
    d = DataDistribution("uniform")
    x = d.sample(rng, 10_000, 4)
    assert x.min() >= -1 and x.max() <= 1
    assert DataDistribution("equal-share", x_total=5.0).sample(rng, 3, 10).flat[0] == 0.5
    votes = DataDistribution("vote", p=0.8).sample(rng, 10_000, 3)
    assert set(np.unique(votes)) == {-1.0, 1.0}
    assert abs((votes == 1).mean() - 0.8) < 0.02
    su = DataDistribution("shifted-uniform").sample(rng, 10_000, 2)
    assert su.min() >= -2 and su.max() <= 0
    b = DataDistribution("binomial").sample(rng, 10_000, 2)
    assert set(np.unique(b)) <= {(q - 5) / 5 for q in range(11)}
    assert DataDistribution("lognormal").sample(rng, 100, 2).min() > 0
    with pytest.raises(ValueError):
        DataDistribution("weird")


def test_hetero_gauss_centers_include_edges():
    rng = np.random.default_rng(2)
    x = DataDistribution("hetero-gauss").sample(rng, 200_000, 10)
    centers = x.mean(axis=0)
    assert centers[0] == pytest.approx(-2.0, abs=0.02)
    assert centers[-1] == pytest.approx(2.0, abs=0.02)
    assert np.allclose(np.diff(centers), 4 / 9, atol=0.03)


def test_clip_projection():
    d = DataDistribution("cauchy", clip=(-1, 1))
    x = np.array([[-5.0, 0.3, 9.0]])
    assert np.array_equal(d.project(x), [[-1.0, 0.3, 1.0]])
    assert DataDistribution("uniform").project(x) is x


# ------------------------------------------------------------- harness core


def test_spec_validation():
    with pytest.raises(ValueError):
        make_spec(trials=0)
    with pytest.raises(ValueError):
        make_spec(sweep_grid=())
    with pytest.raises(ValueError):
        make_spec(metric="rmse")
    with pytest.raises(ValueError):
        make_spec(sweep_var="P")


def test_worker_count_invariance():
    spec = make_spec(sweep_grid=(1e2, 1e4), trials=6000)
    r1 = run_experiment(spec, workers=1)
    r4 = run_experiment(spec, workers=4)
    r16 = run_experiment(spec, workers=16)
    assert r1 == r4 == r16
    assert [r.sweep_value for r in r1] == [1e2, 1e4]
    assert all(r.trials == 6000 for r in r1)


def test_sweep_variables_resolve():
    spec = make_spec(sweep_var="K", sweep_grid=(2, 5), trials=512, metric="var")
    recs = run_experiment(spec)
    assert [r.K for r in recs] == [2, 5]
    spec = make_spec(sweep_var="M", sweep_grid=(1, 2), trials=512)
    assert [r.M for r in recs] == [1, 1]  # K-sweep records keep base M
    recs_m = run_experiment(spec)
    assert [r.M for r in recs_m] == [1, 2]
    spec = make_spec(
        sweep_var="x_total", sweep_grid=(-5.0, 5.0), trials=512,
        distribution=DataDistribution("equal-share"),
    )
    recs_x = run_experiment(spec)
    assert [r.sweep_value for r in recs_x] == [-5.0, 5.0]


def test_unbiasedness_via_bias_metric():
    spec = make_spec(metric="bias", trials=60_000, mapping="aa")
    (rec,) = run_experiment(spec)
    assert abs(rec.value) < 3 * rec.stderr


def test_single_trial_flags_stderr():
    spec = make_spec(trials=1)
    (rec,) = run_experiment(spec)
    assert np.isnan(rec.stderr)


def test_infeasible_combination_names_grid_point():
    spec = make_spec(mapping="aa", L=3)
    with pytest.raises(ValueError, match="beta = 1000.0"):
        run_experiment(spec)


def test_compare_to_theory():
    spec = make_spec(trials=512, sweep_grid=(1e3, 1e4))
    recs = run_experiment(spec)
    devs, worst = compare_to_theory(recs, [r.value for r in recs])
    assert devs == [0.0, 0.0] and worst == 0.0
    with pytest.raises(ValueError):
        compare_to_theory(recs, [1.0])
    with pytest.raises(ValueError):
        compare_to_theory(recs, [0.0, 1.0])


def test_count_mapping_truth_is_the_count():
    # unanimous -1 votes: the count is 0 and high SNR decodes it exactly
    spec = make_spec(
        mapping="count", K=5, trials=2000, metric="mse",
        distribution=DataDistribution("vote", p=0.0),
        sweep_grid=(1e4,),
    )
    (rec,) = run_experiment(spec)
    assert rec.value == 0.0


def test_phase_ml_estimator_through_harness():
    spec = make_spec(estimator="phase-ml", trials=4000, metric="mse")
    (rec,) = run_experiment(spec)
    assert np.isfinite(rec.value) and rec.estimator == "phase-ml"


def test_sc_variance_matches_theory_small_grid():
    from aircomp import theory

    spec = make_spec(metric="var", trials=100_000, sweep_grid=(1e4,), mapping="aa")
    (rec,) = run_experiment(spec)
    eta = 1e-4 / 2
    ref = theory.total_var_x("sc", "aa", 10, 1, 2, eta)
    assert abs(rec.value / ref - 1) < 0.05


# --------------------------------------------------------------- majority vote


def test_mv_accuracy_extreme_p():
    for p, expect in ((0.0, 1.0), (1.0, 1.0)):
        spec = make_spec(
            mapping="mv-aa", K=11, beta=1e3, metric="mv_accuracy",
            distribution=DataDistribution("vote", p=p),
            sweep_var="p", sweep_grid=(p,), trials=4000,
        )
        (rec,) = run_mv_experiment(spec)
        assert rec.value > 0.99, p


def test_mv_requires_odd_k():
    spec = make_spec(K=10, mapping="mv-a", metric="mv_accuracy",
                     distribution=DataDistribution("vote", p=0.5),
                     sweep_var="p", sweep_grid=(0.5,))
    with pytest.raises(ValueError):
        run_mv_experiment(spec)
    with pytest.raises(ValueError):
        run_mv_experiment(make_spec(K=11, mapping="mv-a", metric="mse",
                                    sweep_var="p", sweep_grid=(0.5,)))


def test_mv_min_mean_over_p():
    spec = make_spec(
        mapping="mv-aa", K=11, M=2, beta=1e3, metric="mv_accuracy",
        distribution=DataDistribution("vote"),
        sweep_var="M", sweep_grid=(1, 4), trials=3000,
        p_grid=tuple(np.linspace(0, 1, 6)),
    )
    recs = run_mv_experiment(spec)
    metrics = {(r.sweep_value, r.metric): r.value for r in recs}
    assert len(recs) == 4
    for m in (1, 4):
        assert metrics[(m, "mv_accuracy_min")] <= metrics[(m, "mv_accuracy_mean")]
    assert metrics[(4, "mv_accuracy_mean")] > metrics[(1, "mv_accuracy_mean")]


# ------------------------------------------------------------ behavior checks


def test_ic_single_antenna_is_erratic():
    # heavy-tailed effective noise: variance estimates swing across seeds
    values = []
    for seed in (1, 2, 3, 4, 5):
        spec = make_spec(csi="ic", M=1, metric="var", trials=20_000,
                         sweep_grid=(1e3,), seed=seed)
        (rec,) = run_experiment(spec)
        values.append(rec.value)
    assert max(values) / min(values) > 2.0


def test_heavy_tail_and_flipped_orderings():
    mse = {}
    for name in ("cauchy", "shifted-uniform"):
        for mapping in ("affine", "aa"):
            spec = make_spec(
                mapping=mapping, M=2, trials=40_000, sweep_grid=(1e4,),
                distribution=DataDistribution(name, clip=(-1.0, 1.0)),
            )
            (rec,) = run_experiment(spec)
            mse[(name, mapping)] = rec.value
    # outlier-dominated error: mappings indistinguishable
    ratio = mse[("cauchy", "affine")] / mse[("cauchy", "aa")]
    assert abs(ratio - 1) < 0.2
    # data packed into the low end: the plain affine map wins
    assert mse[("shifted-uniform", "affine")] < mse[("shifted-uniform", "aa")]
