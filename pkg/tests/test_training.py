"""Tests for the adversarial training loop and its objectives.

The two objectives are validated the same way as the raw network gradients:
values against formulas written out directly in the tests, gradients against
central finite differences.  Loop-level behavior (step accounting, budget
gating, determinism, artifact layout) is pinned with tiny seeded runs.
"""

import csv

import numpy as np
import pytest

from tvgan import distributions as dist
from tvgan import nn
from tvgan import training as tr
from tvgan.divergence import HistogramEstimator


def _blob(mean, var=0.0625, weight=1.0):
    mean = np.asarray(mean, dtype=np.float64)
    return dist.MixtureComponent(mean, np.full(mean.shape, var), weight)


def _zero_noise(dim):
    return dist.SpikeSlabNoise(0.0, dist.PointMassSlab(np.zeros(dim)))


def _tiny_config(**overrides):
    defaults = dict(
        datasets=[
            tr.DatasetPart(
                spec=dist.GaussianMixture([_blob([0.0, 0.0])]),
                alpha=1.0,
                noise=_zero_noise(2),
            )
        ],
        latent=dist.LatentPrior(2, "gaussian"),
        g_hidden=[8],
        d_hidden=[8],
        k=1,
        batch_size=16,
        total_samples_n=64,
        epochs=1,
        eval_samples=500,
        samples_out=50,
        seed=0,
    )
    defaults.update(overrides)
    return tr.TrainConfig(**defaults)


def _zero_last_layer(params):
    """Kill the readout layer so a sigmoid head outputs exactly 1/2."""
    out = params.copy()
    out.layers[-1].weights[:] = 0.0
    out.layers[-1].biases[:] = 0.0
    return out


class TestDiscriminatorObjective:
    def test_value_matches_direct_formula(self):
        """Two weighted datasets against one fake batch, recomputed inline."""
        rng = np.random.default_rng(3)
        d_params = nn.init_mlp([2, 6, 1], ["tanh", "sigmoid"], rng)
        real = [rng.normal(size=(8, 2)), rng.normal(size=(8, 2)) + 2.0]
        alphas = np.array([0.3, 0.7])
        fake = rng.normal(size=(8, 2)) - 2.0

        value, _, mean_real, mean_fake = tr.discriminator_objective(
            d_params, real, alphas, fake
        )

        s0 = nn.mlp_forward(d_params, real[0])[0]
        s1 = nn.mlp_forward(d_params, real[1])[0]
        sf = nn.mlp_forward(d_params, fake)[0]
        expected = (
            0.3 * np.mean(np.log(s0))
            + 0.7 * np.mean(np.log(s1))
            + np.mean(np.log(1.0 - sf))
        )
        assert value == pytest.approx(float(expected), abs=1e-12)
        assert mean_real == pytest.approx(float(0.3 * s0.mean() + 0.7 * s1.mean()), abs=1e-12)
        assert mean_fake == pytest.approx(float(sf.mean()), abs=1e-12)

    def test_indifferent_discriminator_scores_minus_log4(self):
        """With the readout layer zeroed, D = 1/2 and the objective sits at
        log(1/2) + log(1/2) = -log 4 for any inputs."""
        rng = np.random.default_rng(4)
        d_params = _zero_last_layer(nn.init_mlp([2, 8, 1], ["tanh", "sigmoid"], rng))
        real = [rng.normal(size=(32, 2))]
        fake = rng.normal(size=(32, 2))
        value, grads, mean_real, mean_fake = tr.discriminator_objective(
            d_params, real, np.array([1.0]), fake
        )
        assert value == pytest.approx(-float(np.log(4.0)), abs=1e-12)
        assert mean_real == 0.5
        assert mean_fake == 0.5
        # The readout weight gradient vanishes only if real and fake batches
        # coincide, so just require finiteness here.
        assert all(np.all(np.isfinite(g.weights)) for g in grads)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        d_params = nn.init_mlp([2, 6, 1], ["tanh", "sigmoid"], rng)
        real = [rng.normal(size=(6, 2)), rng.normal(size=(6, 2)) + 1.0]
        alphas = np.array([0.4, 0.6])
        fake = rng.normal(size=(6, 2))

        def loss(params):
            value, grads, _, _ = tr.discriminator_objective(params, real, alphas, fake)
            return value, grads

        worst = nn.grad_check(d_params, loss, h=1e-5)
        assert worst <= 1e-5, f"finite differences disagree: {worst:.3e}"


class TestGeneratorObjective:
    @pytest.mark.parametrize("kind", ["minimax", "non_saturating"])
    def test_gradient_matches_finite_differences(self, kind):
        rng = np.random.default_rng(6)
        g_params = nn.init_mlp([2, 6, 2], ["tanh", "identity"], rng)
        d_params = nn.init_mlp([2, 6, 1], ["tanh", "sigmoid"], rng)
        z = rng.normal(size=(8, 2))

        def loss(params):
            return tr.generator_objective(params, d_params, z, kind)

        worst = nn.grad_check(g_params, loss, h=1e-5)
        assert worst <= 1e-5, f"{kind}: finite differences disagree: {worst:.3e}"

    def test_blind_discriminator_gives_zero_generator_gradient(self):
        """If D ignores its input (zeroed readout), nothing flows back to G."""
        rng = np.random.default_rng(7)
        g_params = nn.init_mlp([2, 6, 2], ["tanh", "identity"], rng)
        d_params = _zero_last_layer(nn.init_mlp([2, 6, 1], ["tanh", "sigmoid"], rng))
        z = rng.normal(size=(8, 2))
        value, grads = tr.generator_objective(g_params, d_params, z, "minimax")
        assert value == pytest.approx(-float(np.log(2.0)), abs=1e-12)
        for g in grads:
            np.testing.assert_array_equal(g.weights, np.zeros_like(g.weights))

    def test_unknown_loss_kind_rejected(self):
        rng = np.random.default_rng(8)
        g_params = nn.init_mlp([2, 4, 2], ["tanh", "identity"], rng)
        d_params = nn.init_mlp([2, 4, 1], ["tanh", "sigmoid"], rng)
        with pytest.raises(ValueError):
            tr.generator_objective(g_params, d_params, np.zeros((4, 2)), "wasserstein")


class TestSteps:
    def test_repeated_ascent_on_fixed_batches_is_monotone(self):
        """100 full-batch ascent steps: the objective must not decrease in at
        least 95 of them (Adam's momentum may overshoot occasionally)."""
        rng = np.random.default_rng(10)
        d_params = nn.init_mlp([2, 8, 1], ["tanh", "sigmoid"], rng)
        real = [rng.normal(size=(64, 2)) + np.array([1.5, 0.0])]
        fake = rng.normal(size=(64, 2)) - np.array([1.5, 0.0])
        alphas = np.array([1.0])
        state = nn.init_adam(d_params, lr=1e-2)

        values = []
        for _ in range(100):
            value, grads, _, _ = tr.discriminator_objective(d_params, real, alphas, fake)
            values.append(value)
            d_params, state = nn.adam_step(d_params, grads, state, direction="ascend")
        final, _, _, _ = tr.discriminator_objective(d_params, real, alphas, fake)
        values.append(final)

        diffs = np.diff(values)
        assert np.sum(diffs >= 0) >= 95, f"only {np.sum(diffs >= 0)} increases"
        assert final > values[0]

    def test_discriminator_step_improves_held_out_objective(self):
        """Stochastic minibatch steps still raise the objective on a large
        held-out evaluation batch."""
        config = _tiny_config(
            datasets=[
                tr.DatasetPart(
                    spec=dist.GaussianMixture([_blob([2.0, 0.0])]),
                    alpha=1.0,
                    noise=_zero_noise(2),
                )
            ],
            batch_size=64,
        )
        rng = np.random.default_rng(config.seed)
        g_params, d_params = tr.build_models(config, rng)
        d_state = nn.init_adam(d_params, **config.d_adam.to_dict())

        eval_rng = np.random.default_rng(999)
        eval_real = [tr.sample_clean_mixture(config, 2000, eval_rng)]
        eval_fake = tr.generator_sample(g_params, config.latent, 2000, eval_rng)

        before = tr.discriminator_objective(
            d_params, eval_real, config.alphas, eval_fake
        )[0]
        for _ in range(60):
            d_params, d_state, _ = tr.discriminator_step(
                d_params, d_state, g_params, config, rng
            )
        after = tr.discriminator_objective(
            d_params, eval_real, config.alphas, eval_fake
        )[0]
        assert after > before

    def test_generator_descent_chases_a_frozen_preference(self):
        """Against a frozen D that rewards the half-plane x0 > 0, generator
        steps drive the mean score up with at most 5% backward steps."""
        rng = np.random.default_rng(12)
        config = _tiny_config(batch_size=64)
        g_params, _ = tr.build_models(config, rng)
        frozen_d = nn.MlpParams(
            layers=[nn.Layer(np.array([[3.0], [0.0]]), np.zeros(1), "sigmoid")]
        )
        g_state = nn.init_adam(g_params, **config.g_adam.to_dict())

        eval_z = np.random.default_rng(500).standard_normal((2000, 2))

        def mean_score(params):
            fake = nn.mlp_forward(params, eval_z)[0]
            return float(nn.mlp_forward(frozen_d, fake)[0].mean())

        scores = [mean_score(g_params)]
        for _ in range(100):
            g_params, g_state, _ = tr.generator_step(
                g_params, g_state, frozen_d, config, rng
            )
            scores.append(mean_score(g_params))

        drops = np.sum(np.diff(scores) < 0)
        assert drops <= 5, f"{drops} of 100 steps lowered the frozen-D score"
        assert scores[-1] > scores[0]

    def test_steps_are_deterministic(self):
        config = _tiny_config()
        base_rng = np.random.default_rng(0)
        g_params, d_params = tr.build_models(config, base_rng)
        d_state = nn.init_adam(d_params)

        out_a = tr.discriminator_step(
            d_params, d_state, g_params, config, np.random.default_rng(42)
        )
        out_b = tr.discriminator_step(
            d_params, d_state, g_params, config, np.random.default_rng(42)
        )
        for la, lb in zip(out_a[0].layers, out_b[0].layers):
            np.testing.assert_array_equal(la.weights, lb.weights)
        assert out_a[2].loss == out_b[2].loss


class TestTrainLoop:
    def test_metrics_accounting(self):
        """epochs=2 with ceil(80/16)=5 outer iterations gives 10 records,
        each carrying estimates when eval_every=1."""
        est = HistogramEstimator(np.array([[-3.0, 3.0], [-3.0, 3.0]]), 8)
        config = _tiny_config(
            epochs=2,
            total_samples_n=80,
            batch_size=16,
            estimator=est,
            eval_every=1,
            eval_samples=200,
        )
        assert config.steps_per_epoch == 5
        result = tr.train(config)
        assert [rec.step for rec in result.metrics] == list(range(1, 11))
        assert all(rec.tv_estimate is not None for rec in result.metrics)
        assert all(0.0 <= rec.tv_estimate <= 1.0 for rec in result.metrics)

    def test_eval_cadence(self):
        est = HistogramEstimator(np.array([[-3.0, 3.0], [-3.0, 3.0]]), 8)
        config = _tiny_config(
            epochs=1,
            total_samples_n=96,
            batch_size=16,
            estimator=est,
            eval_every=3,
            eval_samples=200,
        )
        result = tr.train(config)
        evaluated = [rec.step for rec in result.metrics if rec.tv_estimate is not None]
        assert evaluated == [3, 6]

    def test_no_estimator_means_no_estimates(self):
        result = tr.train(_tiny_config())
        assert all(rec.tv_estimate is None for rec in result.metrics)
        assert all(rec.jsd_estimate is None for rec in result.metrics)

    def test_zero_epochs_returns_untrained_models(self):
        config = _tiny_config(epochs=0)
        result = tr.train(config)
        assert result.metrics == []
        fresh_g, _ = tr.build_models(config, np.random.default_rng(config.seed))
        for la, lb in zip(result.generator.layers, fresh_g.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)

    def test_training_is_deterministic(self):
        config = _tiny_config(epochs=1, k=2)
        a = tr.train(config)
        b = tr.train(config)
        assert len(a.metrics) == len(b.metrics)
        for ra, rb in zip(a.metrics, b.metrics):
            assert ra == rb
        for la, lb in zip(a.generator.layers, b.generator.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)
        for la, lb in zip(a.discriminator.layers, b.discriminator.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)

    def test_zero_gamma_run_ignores_the_slab_entirely(self):
        """At gamma = 0 the slab is never sampled, so swapping it for a
        completely different one reproduces the run bit for bit; the loop
        reduces to the plain two-player game on clean data."""
        base = _tiny_config()
        swapped = _tiny_config(
            datasets=[
                tr.DatasetPart(
                    spec=dist.GaussianMixture([_blob([0.0, 0.0])]),
                    alpha=1.0,
                    noise=dist.SpikeSlabNoise(
                        0.0, dist.GaussianSlab(np.array([9.0, 9.0]))
                    ),
                )
            ]
        )
        a = tr.train(base)
        b = tr.train(swapped)
        for ra, rb in zip(a.metrics, b.metrics):
            assert ra == rb
        for la, lb in zip(a.generator.layers, b.generator.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)

    def test_mean_scores_stay_in_unit_interval(self):
        result = tr.train(_tiny_config(epochs=2))
        for rec in result.metrics:
            assert 0.0 < rec.d_real < 1.0
            assert 0.0 < rec.d_fake < 1.0


class TestArtifacts:
    def test_run_outputs_land_on_disk(self, tmp_path):
        config = _tiny_config()
        result = tr.train(config, out_dir=tmp_path)
        for name in (
            "metrics.csv",
            "generator.json",
            "generator.bin",
            "discriminator.json",
            "discriminator.bin",
            "samples.csv",
        ):
            assert (tmp_path / name).exists(), f"missing {name}"

        loaded = nn.load_checkpoint(tmp_path / "generator.json")
        for la, lb in zip(loaded.layers, result.generator.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)
            np.testing.assert_array_equal(la.biases, lb.biases)

        with (tmp_path / "samples.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x0", "x1"]
        assert len(rows) - 1 == config.samples_out

        # Cells written by the live loop must be plain parseable numbers and
        # recover the in-memory records exactly.
        with (tmp_path / "metrics.csv").open() as fh:
            metric_rows = list(csv.reader(fh))
        assert len(metric_rows) - 1 == len(result.metrics)
        for row, rec in zip(metric_rows[1:], result.metrics):
            assert float(row[1]) == rec.d_loss, f"d_loss cell {row[1]!r} drifted"
            assert float(row[2]) == rec.g_loss

    def test_metrics_csv_roundtrips_at_full_precision(self, tmp_path):
        metrics = [
            tr.MetricsRecord(1, -1.3862943611198906, 0.1 + 0.2, 0.5, 0.5),
            tr.MetricsRecord(2, -0.7, -0.6931471805599453, 0.4, 0.6, 0.25, 0.125),
        ]
        path = tr.write_metrics_csv(metrics, tmp_path / "metrics.csv")
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == tr.METRICS_CSV_HEADER
        assert float(rows[1][1]) == metrics[0].d_loss
        assert float(rows[1][2]) == metrics[0].g_loss
        assert rows[1][5] == ""
        assert float(rows[2][5]) == 0.25

    def test_config_roundtrip(self):
        est = HistogramEstimator(np.array([[-3.0, 3.0], [-3.0, 3.0]]), 16)
        config = _tiny_config(
            estimator=est,
            k=3,
            generator_loss="non_saturating",
            injection_mode="per_batch",
            g_adam=tr.AdamConfig(lr=2e-4, beta1=0.5),
        )
        again = tr.TrainConfig.from_dict(config.to_dict())
        assert again.to_dict() == config.to_dict()
        assert again.g_adam.beta1 == 0.5
        assert again.estimator.bins_per_dim == 16

    def test_config_missing_fields_rejected(self):
        with pytest.raises(ValueError):
            tr.TrainConfig.from_dict({"datasets": []})


class TestConfigValidation:
    def test_alphas_must_sum_to_one(self):
        part = tr.DatasetPart(
            spec=dist.GaussianMixture([_blob([0.0, 0.0])]),
            alpha=0.9,
            noise=_zero_noise(2),
        )
        with pytest.raises(ValueError):
            _tiny_config(datasets=[part])

    def test_noise_dimension_must_match_data(self):
        part = tr.DatasetPart(
            spec=dist.GaussianMixture([_blob([0.0, 0.0])]),
            alpha=1.0,
            noise=_zero_noise(3),
        )
        with pytest.raises(ValueError):
            _tiny_config(datasets=[part])

    def test_estimator_dimension_must_match_data(self):
        est = HistogramEstimator(np.array([[-1.0, 1.0]]), 8)
        with pytest.raises(ValueError):
            _tiny_config(estimator=est)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("k", 0),
            ("batch_size", 0),
            ("epochs", -1),
            ("eval_every", 0),
            ("injection_mode", "per_universe"),
            ("generator_loss", "hinge"),
        ],
    )
    def test_bad_scalar_fields_rejected(self, field, value):
        with pytest.raises(ValueError):
            _tiny_config(**{field: value})


class TestSampling:
    def test_clean_mixture_respects_alphas(self):
        """Two point-mass datasets at 0 and 10 with weights (1/4, 3/4)."""
        parts = [
            tr.DatasetPart(
                spec=dist.DiscreteDist(np.array([0.0]), np.array([1.0])),
                alpha=0.25,
                noise=_zero_noise(1),
            ),
            tr.DatasetPart(
                spec=dist.DiscreteDist(np.array([10.0]), np.array([1.0])),
                alpha=0.75,
                noise=_zero_noise(1),
            ),
        ]
        config = _tiny_config(datasets=parts, latent=dist.LatentPrior(1))
        x = tr.sample_clean_mixture(config, 20000, np.random.default_rng(77))
        frac_high = float(np.mean(x[:, 0] > 5.0))
        assert abs(frac_high - 0.75) < 0.02

    def test_generator_sample_shape_and_determinism(self):
        config = _tiny_config()
        g_params, _ = tr.build_models(config, np.random.default_rng(1))
        a = tr.generator_sample(g_params, config.latent, 64, np.random.default_rng(5))
        b = tr.generator_sample(g_params, config.latent, 64, np.random.default_rng(5))
        assert a.shape == (64, 2)
        np.testing.assert_array_equal(a, b)


class TestBudget:
    def test_identity_generator_on_matching_data_passes(self):
        """A generator that reproduces the latent standard normal exactly,
        against standard-normal data: the estimated JSD is tiny."""
        est = HistogramEstimator(np.array([[-4.0, 4.0], [-4.0, 4.0]]), 32)
        config = _tiny_config(
            datasets=[
                tr.DatasetPart(
                    spec=dist.GaussianMixture([_blob([0.0, 0.0], var=1.0)]),
                    alpha=1.0,
                    noise=_zero_noise(2),
                )
            ],
            estimator=est,
        )
        identity_g = nn.MlpParams(
            layers=[nn.Layer(np.eye(2), np.zeros(2), "identity")]
        )
        report = tr.evaluate_budget(identity_g, config, n_eval=100000)
        assert report.delta == 0.0
        assert report.jsd_estimate < 0.02
        assert report.within_budget

    def test_collapsed_faraway_generator_fails(self):
        est = HistogramEstimator(np.array([[-4.0, 4.0], [-4.0, 4.0]]), 32)
        config = _tiny_config(
            datasets=[
                tr.DatasetPart(
                    spec=dist.GaussianMixture([_blob([0.0, 0.0], var=1.0)]),
                    alpha=1.0,
                    noise=_zero_noise(2),
                )
            ],
            estimator=est,
        )
        stuck_g = nn.MlpParams(
            layers=[nn.Layer(np.zeros((2, 2)), np.full(2, 100.0), "identity")]
        )
        report = tr.evaluate_budget(stuck_g, config, n_eval=20000)
        assert report.tv_estimate > 0.95
        assert not report.within_budget

    def test_budget_requires_an_estimator(self):
        config = _tiny_config()
        g_params, _ = tr.build_models(config, np.random.default_rng(0))
        with pytest.raises(ValueError):
            tr.evaluate_budget(g_params, config, n_eval=100)
