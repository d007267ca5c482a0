"""Two-player minimax training with weighted datasets and divergence budgets.

Each outer iteration runs ``k`` discriminator ascents followed by one
generator descent. Every discriminator minibatch is pushed through its
dataset's spike-and-slab channel before scoring, so the discriminator learns
to match the noised mixture while the clean data stays within ``gamma`` total
variation of what it sees. Runs are fully deterministic given the config seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn
from .distributions import (
    DatasetSpec,
    LatentPrior,
    SpikeSlabNoise,
    dataset_dimension,
    dataset_spec_from_dict,
    dataset_spec_to_dict,
    inject_noise,
    latent_from_dict,
    latent_to_dict,
    noise_from_dict,
    noise_to_dict,
    sample_dataset,
    sample_latent,
)
from .divergence import HistogramEstimator, estimate_divergences

LOG_EPS = nn.LOG_EPS


def _safe_log(v: np.ndarray) -> np.ndarray:
    return np.log(np.clip(v, LOG_EPS, 1.0))


def _safe_log_grad(v: np.ndarray) -> np.ndarray:
    # derivative of the clamped log: zero on the clamped flats
    clipped = np.clip(v, LOG_EPS, 1.0)
    g = 1.0 / clipped
    g[(v < LOG_EPS) | (v > 1.0)] = 0.0
    return g


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }

    @staticmethod
    def from_dict(d: dict) -> "AdamConfig":
        return AdamConfig(
            lr=float(d.get("lr", 1e-3)),
            beta1=float(d.get("beta1", 0.9)),
            beta2=float(d.get("beta2", 0.999)),
            epsilon=float(d.get("epsilon", 1e-8)),
        )


@dataclass
class DatasetPart:
    """One training dataset with its mixture weight and noise channel."""

    spec: DatasetSpec
    alpha: float
    noise: SpikeSlabNoise


@dataclass
class TrainConfig:
    """Every knob of the training procedure; one seed drives all randomness."""

    datasets: list[DatasetPart]
    latent: LatentPrior
    g_hidden: list[int] = field(default_factory=lambda: [32, 32])
    d_hidden: list[int] = field(default_factory=lambda: [32, 32])
    hidden_activation: str = "tanh"
    k: int = 1
    batch_size: int = 64
    total_samples_n: int = 6400
    epochs: int = 1
    injection_mode: str = "per_sample"
    generator_loss: str = "minimax"
    g_adam: AdamConfig = field(default_factory=AdamConfig)
    d_adam: AdamConfig = field(default_factory=AdamConfig)
    eval_every: int = 100
    eval_samples: int = 20000
    estimator: HistogramEstimator | None = None
    samples_out: int = 5000
    seed: int = 0

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("config needs at least one dataset")
        alphas = np.array([p.alpha for p in self.datasets])
        if np.any(alphas <= 0) or abs(alphas.sum() - 1.0) > 1e-12:
            raise ValueError("dataset alphas must be positive and sum to 1")
        dims = {dataset_dimension(p.spec) for p in self.datasets}
        if len(dims) != 1:
            raise ValueError("all datasets must share one sample dimension")
        (dim,) = dims
        for i, part in enumerate(self.datasets):
            if part.noise.dimension != dim:
                raise ValueError(
                    f"dataset {i}: noise dimension {part.noise.dimension} does not "
                    f"match sample dimension {dim}"
                )
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.batch_size < 1 or self.total_samples_n < 1:
            raise ValueError("batch_size and total_samples_n must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.injection_mode not in ("per_sample", "per_batch"):
            raise ValueError(f"unknown injection_mode {self.injection_mode!r}")
        if self.generator_loss not in ("minimax", "non_saturating"):
            raise ValueError(f"unknown generator_loss {self.generator_loss!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.estimator is not None and self.estimator.dimension != dim:
            raise ValueError(
                f"estimator dimension {self.estimator.dimension} does not match "
                f"sample dimension {dim}"
            )

    @property
    def data_dim(self) -> int:
        return dataset_dimension(self.datasets[0].spec)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.datasets])

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(self.total_samples_n / self.batch_size)

    @property
    def delta(self) -> float:
        """The divergence budget realized by the channels: the largest gamma."""
        return max(p.noise.gamma for p in self.datasets)

    def to_dict(self) -> dict:
        return {
            "datasets": [
                {
                    "spec": dataset_spec_to_dict(p.spec),
                    "alpha": p.alpha,
                    "noise": noise_to_dict(p.noise),
                }
                for p in self.datasets
            ],
            "latent": latent_to_dict(self.latent),
            "g_hidden": list(self.g_hidden),
            "d_hidden": list(self.d_hidden),
            "hidden_activation": self.hidden_activation,
            "k": self.k,
            "batch_size": self.batch_size,
            "total_samples_n": self.total_samples_n,
            "epochs": self.epochs,
            "injection_mode": self.injection_mode,
            "generator_loss": self.generator_loss,
            "g_adam": self.g_adam.to_dict(),
            "d_adam": self.d_adam.to_dict(),
            "eval_every": self.eval_every,
            "eval_samples": self.eval_samples,
            "estimator": None if self.estimator is None else self.estimator.to_dict(),
            "samples_out": self.samples_out,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        try:
            datasets = [
                DatasetPart(
                    spec=dataset_spec_from_dict(p["spec"]),
                    alpha=float(p["alpha"]),
                    noise=noise_from_dict(p["noise"]),
                )
                for p in d["datasets"]
            ]
            latent = latent_from_dict(d["latent"])
        except KeyError as exc:
            raise ValueError(f"config missing required field: {exc}") from exc
        est = d.get("estimator")
        return TrainConfig(
            datasets=datasets,
            latent=latent,
            g_hidden=[int(w) for w in d.get("g_hidden", [32, 32])],
            d_hidden=[int(w) for w in d.get("d_hidden", [32, 32])],
            hidden_activation=str(d.get("hidden_activation", "tanh")),
            k=int(d.get("k", 1)),
            batch_size=int(d.get("batch_size", 64)),
            total_samples_n=int(d.get("total_samples_n", 6400)),
            epochs=int(d.get("epochs", 1)),
            injection_mode=str(d.get("injection_mode", "per_sample")),
            generator_loss=str(d.get("generator_loss", "minimax")),
            g_adam=AdamConfig.from_dict(d.get("g_adam", {})),
            d_adam=AdamConfig.from_dict(d.get("d_adam", {})),
            eval_every=int(d.get("eval_every", 100)),
            eval_samples=int(d.get("eval_samples", 20000)),
            estimator=None if est is None else HistogramEstimator.from_dict(est),
            samples_out=int(d.get("samples_out", 5000)),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class MetricsRecord:
    """Per-step losses plus periodic divergence estimates."""

    step: int
    d_loss: float
    g_loss: float
    d_real: float
    d_fake: float
    tv_estimate: float | None = None
    jsd_estimate: float | None = None


METRICS_CSV_HEADER = ["step", "d_loss", "g_loss", "d_real", "d_fake", "tv", "jsd"]


def build_models(config: TrainConfig, rng: np.random.Generator) -> tuple[nn.MlpParams, nn.MlpParams]:
    """Seeded generator and discriminator networks for this config.

    The generator ends with an identity layer (unbounded samples), the
    discriminator with a sigmoid so scores live in (0, 1).
    """
    act = config.hidden_activation
    g_sizes = [config.latent.dimension, *config.g_hidden, config.data_dim]
    d_sizes = [config.data_dim, *config.d_hidden, 1]
    generator = nn.init_mlp(g_sizes, [act] * len(config.g_hidden) + ["identity"], rng)
    discriminator = nn.init_mlp(d_sizes, [act] * len(config.d_hidden) + ["sigmoid"], rng)
    return generator, discriminator


def discriminator_objective(
    d_params: nn.MlpParams,
    real_batches: list[np.ndarray],
    alphas: np.ndarray,
    fake_batch: np.ndarray,
) -> tuple[float, list[nn.LayerGrads], float, float]:
    """Ascending objective for fixed minibatches, with its exact gradient.

    ``sum_l alpha_l * mean_i log D(x_l_i) + mean_i log(1 - D(fake_i))``.
    Returns (value, grads w.r.t. discriminator params, mean score on real
    data weighted by alpha, mean score on fakes).
    """
    grads = nn.zero_grads(d_params)
    value = 0.0
    mean_real = 0.0
    for alpha, batch in zip(alphas, real_batches):
        out, cache = nn.mlp_forward(d_params, batch)
        n = out.shape[0]
        value += alpha * float(np.mean(_safe_log(out)))
        mean_real += alpha * float(np.mean(out))
        out_grad = (alpha / n) * _safe_log_grad(out)
        nn.add_grads(grads, nn.mlp_backward(d_params, cache, out_grad)[0])
    out, cache = nn.mlp_forward(d_params, fake_batch)
    n = out.shape[0]
    value += float(np.mean(_safe_log(1.0 - out)))
    mean_fake = float(np.mean(out))
    out_grad = -(1.0 / n) * _safe_log_grad(1.0 - out)
    nn.add_grads(grads, nn.mlp_backward(d_params, cache, out_grad)[0])
    # alphas may arrive as a numpy vector; keep the scalar outputs plain floats
    # so downstream repr()-based serialization stays portable.
    return float(value), grads, float(mean_real), mean_fake


def generator_objective(
    g_params: nn.MlpParams,
    d_params: nn.MlpParams,
    latent_batch: np.ndarray,
    loss_kind: str = "minimax",
) -> tuple[float, list[nn.LayerGrads]]:
    """Descending objective for a fixed latent minibatch, with its gradient.

    ``minimax`` descends ``mean log(1 - D(G(z)))``; ``non_saturating``
    descends ``-mean log D(G(z))``, which has the same fixed point but does
    not stall when the discriminator confidently rejects fakes.
    """
    fake, g_cache = nn.mlp_forward(g_params, latent_batch)
    score, d_cache = nn.mlp_forward(d_params, fake)
    n = score.shape[0]
    if loss_kind == "minimax":
        value = float(np.mean(_safe_log(1.0 - score)))
        score_grad = -(1.0 / n) * _safe_log_grad(1.0 - score)
    elif loss_kind == "non_saturating":
        value = -float(np.mean(_safe_log(score)))
        score_grad = -(1.0 / n) * _safe_log_grad(score)
    else:
        raise ValueError(f"unknown generator loss {loss_kind!r}")
    _, fake_grad = nn.mlp_backward(d_params, d_cache, score_grad)
    g_grads, _ = nn.mlp_backward(g_params, g_cache, fake_grad)
    return value, g_grads


@dataclass
class DiscStepStats:
    loss: float
    mean_real: float
    mean_fake: float


def discriminator_step(
    d_params: nn.MlpParams,
    d_state: nn.AdamState,
    g_params: nn.MlpParams,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[nn.MlpParams, nn.AdamState, DiscStepStats]:
    """One ascent step: fresh noised minibatches per dataset, one latent batch."""
    real_batches = []
    for part in config.datasets:
        batch = sample_dataset(part.spec, config.batch_size, rng)
        noised, _ = inject_noise(batch, part.noise, config.injection_mode, rng)
        real_batches.append(noised)
    z = sample_latent(config.latent, config.batch_size, rng)
    fake = nn.mlp_forward(g_params, z)[0]
    value, grads, mean_real, mean_fake = discriminator_objective(
        d_params, real_batches, config.alphas, fake
    )
    if not np.isfinite(value):
        raise nn.NonFiniteError("discriminator objective")
    d_params, d_state = nn.adam_step(d_params, grads, d_state, direction="ascend")
    return d_params, d_state, DiscStepStats(value, mean_real, mean_fake)


def generator_step(
    g_params: nn.MlpParams,
    g_state: nn.AdamState,
    d_params: nn.MlpParams,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[nn.MlpParams, nn.AdamState, float]:
    """One descent step on the generator with the discriminator frozen."""
    z = sample_latent(config.latent, config.batch_size, rng)
    value, grads = generator_objective(g_params, d_params, z, config.generator_loss)
    if not np.isfinite(value):
        raise nn.NonFiniteError("generator objective")
    g_params, g_state = nn.adam_step(g_params, grads, g_state, direction="descend")
    return g_params, g_state, value


def sample_clean_mixture(config: TrainConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from the alpha-weighted mixture of the clean (un-noised) datasets."""
    which = rng.choice(len(config.datasets), size=n, p=config.alphas)
    out = np.zeros((n, config.data_dim))
    for l, part in enumerate(config.datasets):
        rows = which == l
        count = int(rows.sum())
        if count:
            out[rows] = sample_dataset(part.spec, count, rng)
    return out


def generator_sample(
    g_params: nn.MlpParams, latent: LatentPrior, n: int, rng: np.random.Generator
) -> np.ndarray:
    z = sample_latent(latent, n, rng)
    return nn.mlp_forward(g_params, z)[0]


@dataclass
class TrainResult:
    generator: nn.MlpParams
    discriminator: nn.MlpParams
    metrics: list[MetricsRecord]


def train(config: TrainConfig, out_dir: str | Path | None = None) -> TrainResult:
    """Run the full minimax loop: epochs x ceil(n / batch) outer iterations.

    Each outer iteration performs ``k`` discriminator ascents and one
    generator descent; a metrics record is appended per generator step, with
    divergence estimates against a fresh clean-mixture sample every
    ``eval_every`` steps. If ``out_dir`` is given, metrics, checkpoints, and a
    final generator sample are written there at the end.
    """
    rng = np.random.default_rng(config.seed)
    g_params, d_params = build_models(config, rng)
    g_state = nn.init_adam(g_params, **config.g_adam.to_dict())
    d_state = nn.init_adam(d_params, **config.d_adam.to_dict())
    metrics: list[MetricsRecord] = []
    step = 0
    for _ in range(config.epochs):
        for _ in range(config.steps_per_epoch):
            stats = None
            for _ in range(config.k):
                d_params, d_state, stats = discriminator_step(
                    d_params, d_state, g_params, config, rng
                )
            g_params, g_state, g_loss = generator_step(
                g_params, g_state, d_params, config, rng
            )
            step += 1
            record = MetricsRecord(
                step=step,
                d_loss=stats.loss,
                g_loss=g_loss,
                d_real=stats.mean_real,
                d_fake=stats.mean_fake,
            )
            if config.estimator is not None and step % config.eval_every == 0:
                data = sample_clean_mixture(config, config.eval_samples, rng)
                fake = generator_sample(g_params, config.latent, config.eval_samples, rng)
                report = estimate_divergences(data, fake, config.estimator)
                record = replace(
                    record, tv_estimate=report.tv, jsd_estimate=report.jsd_nats
                )
            metrics.append(record)
    result = TrainResult(g_params, d_params, metrics)
    if out_dir is not None:
        write_run_outputs(result, config, out_dir, rng)
    return result


def write_metrics_csv(metrics: list[MetricsRecord], path: str | Path) -> Path:
    """Stable-header CSV with full round-trip float precision; blank cells for
    steps without divergence estimates."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_CSV_HEADER)
        for rec in metrics:
            writer.writerow(
                [
                    rec.step,
                    repr(rec.d_loss),
                    repr(rec.g_loss),
                    repr(rec.d_real),
                    repr(rec.d_fake),
                    "" if rec.tv_estimate is None else repr(rec.tv_estimate),
                    "" if rec.jsd_estimate is None else repr(rec.jsd_estimate),
                ]
            )
    return path


def write_samples_csv(samples: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    samples = np.asarray(samples)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(samples.shape[1])])
        for row in samples:
            writer.writerow([repr(float(v)) for v in row])
    return path


def write_run_outputs(
    result: TrainResult,
    config: TrainConfig,
    out_dir: str | Path,
    rng: np.random.Generator,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_metrics_csv(result.metrics, out / "metrics.csv")]
    written.append(nn.save_checkpoint(result.generator, out / "generator.json"))
    written.append(out / "generator.bin")
    written.append(nn.save_checkpoint(result.discriminator, out / "discriminator.json"))
    written.append(out / "discriminator.bin")
    samples = generator_sample(result.generator, config.latent, config.samples_out, rng)
    written.append(write_samples_csv(samples, out / "samples.csv"))
    return written


@dataclass
class BudgetReport:
    """Estimated divergences between the clean mixture and the generator."""

    tv_estimate: float
    jsd_estimate: float
    delta: float
    within_budget: bool


def evaluate_budget(
    g_params: nn.MlpParams,
    config: TrainConfig,
    n_eval: int,
    rng: np.random.Generator | None = None,
    estimator_margin: float = 0.15,
) -> BudgetReport:
    """Check the trained generator against the budget.

    Compares generator samples to the clean mixture (not the noised one; the
    budget claim is about the original data) and soft-checks
    ``jsd <= delta + estimator_margin``, where the margin absorbs estimator
    bias and the finite-capacity optimization gap.
    """
    if config.estimator is None:
        raise ValueError("config has no histogram estimator")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    data = sample_clean_mixture(config, n_eval, rng)
    fake = generator_sample(g_params, config.latent, n_eval, rng)
    report = estimate_divergences(data, fake, config.estimator)
    delta = config.delta
    return BudgetReport(
        tv_estimate=report.tv,
        jsd_estimate=report.jsd_nats,
        delta=delta,
        within_budget=report.jsd_nats <= delta + estimator_margin,
    )
