"""Data distributions, latent priors, and the spike-and-slab noise channel.

The channel adds ``Z ~ (1 - gamma) * (point mass at 0) + gamma * slab`` to each
sample; this keeps the total variation between the clean and the noised law at
most ``gamma`` no matter what the slab is. For finite-support inputs and slabs
the noised law can be computed exactly by discrete convolution.

All samplers take an explicit ``numpy.random.Generator`` owned by the caller;
nothing here touches global randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

# Support points are merged by coordinate equality after rounding to this many
# decimal digits; avoids float-identity fragility in convolutions.
KEY_DECIMALS = 12

PROB_TOL = 1e-12


class UnsupportedSlabError(ValueError):
    """Raised when an operation needs a finite-support slab but got a continuous one."""


def point_key(point) -> tuple:
    """Hashable identity of a support point (rounded coordinates)."""
    return tuple(round(float(c), KEY_DECIMALS) for c in np.atleast_1d(point))


@dataclass
class DiscreteDist:
    """Exact finite-support probability table on points in R^d."""

    support: np.ndarray  # [m, d]
    probs: np.ndarray    # [m]

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.float64)
        if self.support.ndim == 1:
            self.support = self.support.reshape(-1, 1)
        if self.support.ndim != 2 or self.support.shape[0] == 0:
            raise ValueError("support must be a nonempty [m, d] array")
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if self.probs.shape[0] != self.support.shape[0]:
            raise ValueError("support and probs lengths differ")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = float(self.probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        keys = [point_key(p) for p in self.support]
        if len(set(keys)) != len(keys):
            raise ValueError("support points must be pairwise distinct")

    @property
    def dimension(self) -> int:
        return self.support.shape[1]

    def items(self) -> Iterable[tuple[tuple, float]]:
        """Iterate (rounded point key, probability)."""
        for point, prob in zip(self.support, self.probs):
            yield point_key(point), float(prob)

    def prob_table(self) -> dict[tuple, float]:
        return dict(self.items())

    def to_dict(self) -> dict:
        return {
            "kind": "discrete",
            "support": self.support.tolist(),
            "probs": self.probs.tolist(),
        }


def _dist_from_table(table: dict[tuple, float]) -> DiscreteDist:
    keys = sorted(k for k, v in table.items() if v > 0)
    support = np.array(keys, dtype=np.float64)
    probs = np.array([table[k] for k in keys], dtype=np.float64)
    return DiscreteDist(support, probs)


def mixture(parts: list[tuple[DiscreteDist, float]]) -> DiscreteDist:
    """Weighted mixture of finite-support distributions, coincident atoms merged."""
    weights = np.array([w for _, w in parts], dtype=np.float64)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > PROB_TOL:
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    table: dict[tuple, float] = {}
    for dist, weight in parts:
        for key, prob in dist.items():
            table[key] = table.get(key, 0.0) + weight * prob
    return _dist_from_table(table)


# --- slabs ------------------------------------------------------------------


@dataclass
class GaussianSlab:
    """Axis-aligned Gaussian noise with per-coordinate standard deviation."""

    std: np.ndarray

    def __post_init__(self):
        self.std = np.atleast_1d(np.asarray(self.std, dtype=np.float64))
        if np.any(self.std <= 0):
            raise ValueError("gaussian slab std must be positive")


@dataclass
class DirichletSlab:
    """Flat Dirichlet on the probability simplex; a deliberately asymmetric slab."""

    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")


@dataclass
class PointMassSlab:
    """Deterministic shift by a fixed offset vector."""

    offset: np.ndarray

    def __post_init__(self):
        self.offset = np.atleast_1d(np.asarray(self.offset, dtype=np.float64))


SlabSpec = Union[GaussianSlab, DirichletSlab, PointMassSlab, DiscreteDist]


def slab_dimension(slab: SlabSpec) -> int:
    if isinstance(slab, GaussianSlab):
        return slab.std.shape[0]
    if isinstance(slab, DirichletSlab):
        return slab.dimension
    if isinstance(slab, PointMassSlab):
        return slab.offset.shape[0]
    if isinstance(slab, DiscreteDist):
        return slab.dimension
    raise TypeError(f"not a slab spec: {type(slab).__name__}")


def slab_atoms(slab: SlabSpec) -> list[tuple[np.ndarray, float]]:
    """Finite-support slabs as (point, probability) atoms; others are rejected."""
    if isinstance(slab, PointMassSlab):
        return [(slab.offset, 1.0)]
    if isinstance(slab, DiscreteDist):
        return [(p, float(q)) for p, q in zip(slab.support, slab.probs)]
    raise UnsupportedSlabError(
        f"{type(slab).__name__} has continuous support; exact convolution needs "
        "a point-mass or discrete slab"
    )


def sample_slab(slab: SlabSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(slab, GaussianSlab):
        d = slab.std.shape[0]
        return rng.standard_normal((n, d)) * slab.std
    if isinstance(slab, DirichletSlab):
        # flat Dirichlet via normalized standard exponentials
        e = rng.standard_exponential((n, slab.dimension))
        return e / e.sum(axis=1, keepdims=True)
    if isinstance(slab, PointMassSlab):
        return np.tile(slab.offset, (n, 1))
    if isinstance(slab, DiscreteDist):
        idx = rng.choice(slab.support.shape[0], size=n, p=slab.probs)
        return slab.support[idx]
    raise TypeError(f"not a slab spec: {type(slab).__name__}")


@dataclass
class SpikeSlabNoise:
    """The additive channel ``(1 - gamma) * delta(z) + gamma * slab(z)``."""

    gamma: float
    slab: SlabSpec

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def dimension(self) -> int:
        return slab_dimension(self.slab)


def sample_spike_slab(
    noise: SpikeSlabNoise, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n channel realizations; rows are 0 with probability 1 - gamma.

    Returns ``(z [n, d], slab_mask [n])`` where the mask marks rows that took
    a slab draw rather than the spike.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = noise.dimension
    mask = rng.random(n) < noise.gamma
    z = np.zeros((n, d))
    hits = int(mask.sum())
    if hits:
        z[mask] = sample_slab(noise.slab, hits, rng)
    return z, mask


def inject_noise(
    batch: np.ndarray,
    noise: SpikeSlabNoise,
    mode: str = "per_sample",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the channel to a batch of samples.

    ``per_sample`` flips an independent spike/slab coin per row, which is what
    realizes the mixture law on each sample. ``per_batch`` flips one coin for
    the whole minibatch (all rows perturbed or none), retained for fidelity to
    training loops that draw a single Bernoulli per batch. Returns the noised
    batch and the slab mask.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValueError("batch must be 2-D [n, d]")
    n, d = batch.shape
    if noise.dimension != d:
        raise ValueError(
            f"slab dimension {noise.dimension} does not match batch width {d}"
        )
    if rng is None:
        raise ValueError("an explicit rng is required")
    if mode == "per_sample":
        z, mask = sample_spike_slab(noise, n, rng)
        return batch + z, mask
    if mode == "per_batch":
        if rng.random() < noise.gamma:
            return batch + sample_slab(noise.slab, n, rng), np.ones(n, dtype=bool)
        return batch.copy(), np.zeros(n, dtype=bool)
    raise ValueError(f"mode must be 'per_sample' or 'per_batch', got {mode!r}")


def discrete_convolve(p_x: DiscreteDist, noise: SpikeSlabNoise) -> DiscreteDist:
    """Exact law of ``Y = X + Z`` for a finite-support slab.

    The output support is the Minkowski sum of the input support and the
    channel atoms ({0} with mass 1 - gamma plus the slab atoms scaled by
    gamma); coincident sums are merged.
    """
    atoms = slab_atoms(noise.slab)
    if slab_dimension(noise.slab) != p_x.dimension:
        raise ValueError(
            f"slab dimension {slab_dimension(noise.slab)} does not match "
            f"distribution dimension {p_x.dimension}"
        )
    zero = np.zeros(p_x.dimension)
    z_atoms: dict[tuple, float] = {point_key(zero): 1.0 - noise.gamma}
    for point, q in atoms:
        key = point_key(point)
        z_atoms[key] = z_atoms.get(key, 0.0) + noise.gamma * q
    table: dict[tuple, float] = {}
    for x, px in zip(p_x.support, p_x.probs):
        for z_key, pz in z_atoms.items():
            if pz == 0.0:
                continue
            key = point_key(x + np.asarray(z_key))
            table[key] = table.get(key, 0.0) + float(px) * pz
    return _dist_from_table(table)


# --- dataset specs ----------------------------------------------------------


@dataclass
class MixtureComponent:
    mean: np.ndarray
    cov_diag: np.ndarray
    weight: float

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        self.cov_diag = np.atleast_1d(np.asarray(self.cov_diag, dtype=np.float64))
        if self.mean.shape != self.cov_diag.shape:
            raise ValueError("mean and cov_diag must have the same shape")
        if np.any(self.cov_diag <= 0):
            raise ValueError("covariance diagonal must be positive")


@dataclass
class GaussianMixture:
    components: list[MixtureComponent]

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixture needs at least one component")
        weights = np.array([c.weight for c in self.components])
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > PROB_TOL:
            raise ValueError("component weights must be positive and sum to 1")
        dims = {c.mean.shape[0] for c in self.components}
        if len(dims) != 1:
            raise ValueError("all components must share one dimension")


@dataclass
class Ring:
    """Uniform angle on a circle of the given radius plus isotropic jitter."""

    radius: float
    noise_std: float = 0.0

    def __post_init__(self):
        if self.radius <= 0 or self.noise_std < 0:
            raise ValueError("need radius > 0 and noise_std >= 0")


@dataclass
class FileDataset:
    """Empirical distribution backed by a plain-text sample matrix.

    One sample per line, space-separated decimal coordinates; rows are drawn
    with replacement.
    """

    path: str
    _samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def load(self) -> np.ndarray:
        if self._samples is None:
            self._samples = np.loadtxt(self.path, ndmin=2, dtype=np.float64)
            if self._samples.size == 0:
                raise ValueError(f"dataset file {self.path} is empty")
        return self._samples


DatasetSpec = Union[GaussianMixture, Ring, DiscreteDist, FileDataset]


def dataset_dimension(spec: DatasetSpec) -> int:
    if isinstance(spec, GaussianMixture):
        return spec.components[0].mean.shape[0]
    if isinstance(spec, Ring):
        return 2
    if isinstance(spec, DiscreteDist):
        return spec.dimension
    if isinstance(spec, FileDataset):
        return spec.load().shape[1]
    raise TypeError(f"not a dataset spec: {type(spec).__name__}")


def sample_dataset(spec: DatasetSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. rows from the spec's distribution."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(spec, GaussianMixture):
        weights = np.array([c.weight for c in spec.components])
        means = np.stack([c.mean for c in spec.components])
        stds = np.sqrt(np.stack([c.cov_diag for c in spec.components]))
        which = rng.choice(len(spec.components), size=n, p=weights / weights.sum())
        return means[which] + stds[which] * rng.standard_normal((n, means.shape[1]))
    if isinstance(spec, Ring):
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        base = spec.radius * np.column_stack([np.cos(theta), np.sin(theta)])
        if spec.noise_std > 0:
            base = base + spec.noise_std * rng.standard_normal((n, 2))
        return base
    if isinstance(spec, DiscreteDist):
        idx = rng.choice(spec.support.shape[0], size=n, p=spec.probs)
        return spec.support[idx]
    if isinstance(spec, FileDataset):
        rows = spec.load()
        return rows[rng.integers(0, rows.shape[0], size=n)]
    raise TypeError(f"not a dataset spec: {type(spec).__name__}")


@dataclass
class LatentPrior:
    """Generator input law: standard Gaussian or uniform on [-1, 1]^d."""

    dimension: int
    kind: str = "gaussian"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"kind must be 'gaussian' or 'uniform', got {self.kind!r}")


def sample_latent(prior: LatentPrior, n: int, rng: np.random.Generator) -> np.ndarray:
    if prior.kind == "gaussian":
        return rng.standard_normal((n, prior.dimension))
    return rng.uniform(-1.0, 1.0, size=(n, prior.dimension))


# --- (de)serialization ------------------------------------------------------
#
# Every spec maps to a JSON-friendly dict tagged with "kind", so config and
# instance files stay human-writable.


def slab_to_dict(slab: SlabSpec) -> dict:
    if isinstance(slab, GaussianSlab):
        return {"kind": "gaussian", "std": slab.std.tolist()}
    if isinstance(slab, DirichletSlab):
        return {"kind": "dirichlet_flat", "dimension": slab.dimension}
    if isinstance(slab, PointMassSlab):
        return {"kind": "point_mass", "offset": slab.offset.tolist()}
    if isinstance(slab, DiscreteDist):
        return slab.to_dict()
    raise TypeError(f"not a slab spec: {type(slab).__name__}")


def slab_from_dict(d: dict) -> SlabSpec:
    kind = d.get("kind")
    if kind == "gaussian":
        return GaussianSlab(np.asarray(d["std"]))
    if kind == "dirichlet_flat":
        return DirichletSlab(int(d["dimension"]))
    if kind == "point_mass":
        return PointMassSlab(np.asarray(d["offset"]))
    if kind == "discrete":
        return discrete_dist_from_dict(d)
    raise ValueError(f"unknown slab kind {kind!r}")


def noise_to_dict(noise: SpikeSlabNoise) -> dict:
    return {"gamma": noise.gamma, "slab": slab_to_dict(noise.slab)}


def noise_from_dict(d: dict) -> SpikeSlabNoise:
    return SpikeSlabNoise(float(d["gamma"]), slab_from_dict(d["slab"]))


def discrete_dist_from_dict(d: dict) -> DiscreteDist:
    return DiscreteDist(np.asarray(d["support"]), np.asarray(d["probs"]))


def dataset_spec_to_dict(spec: DatasetSpec) -> dict:
    if isinstance(spec, GaussianMixture):
        return {
            "kind": "gaussian_mixture",
            "components": [
                {
                    "mean": c.mean.tolist(),
                    "cov_diag": c.cov_diag.tolist(),
                    "weight": c.weight,
                }
                for c in spec.components
            ],
        }
    if isinstance(spec, Ring):
        return {"kind": "ring", "radius": spec.radius, "noise_std": spec.noise_std}
    if isinstance(spec, DiscreteDist):
        return spec.to_dict()
    if isinstance(spec, FileDataset):
        return {"kind": "file", "path": spec.path}
    raise TypeError(f"not a dataset spec: {type(spec).__name__}")


def dataset_spec_from_dict(d: dict) -> DatasetSpec:
    kind = d.get("kind")
    if kind == "gaussian_mixture":
        return GaussianMixture(
            [
                MixtureComponent(
                    np.asarray(c["mean"]), np.asarray(c["cov_diag"]), float(c["weight"])
                )
                for c in d["components"]
            ]
        )
    if kind == "ring":
        return Ring(float(d["radius"]), float(d.get("noise_std", 0.0)))
    if kind == "discrete":
        return discrete_dist_from_dict(d)
    if kind == "file":
        return FileDataset(str(d["path"]))
    raise ValueError(f"unknown dataset kind {kind!r}")


def latent_to_dict(prior: LatentPrior) -> dict:
    return {"dimension": prior.dimension, "kind": prior.kind}


def latent_from_dict(d: dict) -> LatentPrior:
    return LatentPrior(int(d["dimension"]), str(d.get("kind", "gaussian")))
