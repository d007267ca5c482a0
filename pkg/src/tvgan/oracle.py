"""Exact finite-support analysis of the two-player minimax game.

For discrete data, noise, and generator laws everything is computable in
closed form: the optimal discriminator is the ratio of the (noised) data
mixture to data-plus-generator mass, the resulting game value equals
``-log 4 + 2 * JSD(noised mixture, generator)``, and the global minimum over
generator laws can be found by brute-force grid enumeration. These exact
quantities are the ground truth that sampled training runs are judged
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .distributions import (
    DiscreteDist,
    SpikeSlabNoise,
    discrete_convolve,
    discrete_dist_from_dict,
    mixture,
    noise_from_dict,
    noise_to_dict,
    point_key,
)
from .divergence import jsd_discrete, tv_discrete

LOG4 = float(np.log(4.0))

# Exact-arithmetic inequality claims get 1e-12; identities that go through log
# evaluations get 1e-9.
INEQ_TOL = 1e-12
VALUE_TOL = 1e-9

_CLIP = 1e-12


@dataclass
class GameInstance:
    """Weighted data parts, their noise channels, and a candidate generator law."""

    data_parts: list[tuple[DiscreteDist, float]]  # (distribution, alpha)
    noise_per_part: list[SpikeSlabNoise]
    p_g: DiscreteDist

    def __post_init__(self):
        if not self.data_parts:
            raise ValueError("need at least one data part")
        if len(self.data_parts) != len(self.noise_per_part):
            raise ValueError("one noise channel per data part is required")
        alphas = np.array([a for _, a in self.data_parts], dtype=np.float64)
        if np.any(alphas <= 0) or abs(alphas.sum() - 1.0) > 1e-12:
            raise ValueError("alphas must be positive and sum to 1")
        dims = {dist.dimension for dist, _ in self.data_parts} | {self.p_g.dimension}
        if len(dims) != 1:
            raise ValueError("all distributions must share one dimension")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for _, a in self.data_parts])

    def noised_parts(self) -> list[DiscreteDist]:
        """Each data part pushed through its channel, computed exactly."""
        return [
            discrete_convolve(dist, noise)
            for (dist, _), noise in zip(self.data_parts, self.noise_per_part)
        ]

    def clean_mixture(self) -> DiscreteDist:
        return mixture(self.data_parts)

    def noised_mixture(self) -> DiscreteDist:
        return mixture(
            [(nd, a) for nd, (_, a) in zip(self.noised_parts(), self.data_parts)]
        )

    def to_dict(self) -> dict:
        return {
            "data_parts": [
                {"dist": dist.to_dict(), "alpha": alpha}
                for dist, alpha in self.data_parts
            ],
            "noise": [noise_to_dict(n) for n in self.noise_per_part],
            "p_g": self.p_g.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "GameInstance":
        return GameInstance(
            data_parts=[
                (discrete_dist_from_dict(part["dist"]), float(part["alpha"]))
                for part in d["data_parts"]
            ],
            noise_per_part=[noise_from_dict(n) for n in d["noise"]],
            p_g=discrete_dist_from_dict(d["p_g"]),
        )


def optimal_discriminator(inst: GameInstance) -> dict[tuple, float]:
    """Best-response discriminator: noised-data mass over total mass, per point.

    Points carrying neither data nor generator mass are absent from the map;
    they contribute nothing to the game value.
    """
    mix = inst.noised_mixture().prob_table()
    gen = inst.p_g.prob_table()
    out = {}
    for key in set(mix) | set(gen):
        a = mix.get(key, 0.0)
        b = gen.get(key, 0.0)
        if a + b > 0:
            out[key] = a / (a + b)
    return out


def game_value(inst: GameInstance, discriminator: Mapping[tuple, float]) -> float:
    """Adversarial objective of a given discriminator table.

    ``E_mix[log D] + E_gen[log(1 - D)]`` with D clamped into (0, 1) so the
    value stays finite for saturated tables. The table must cover every point
    that carries mass.
    """
    mix = inst.noised_mixture().prob_table()
    gen = inst.p_g.prob_table()
    total = 0.0
    for key in set(mix) | set(gen):
        a = mix.get(key, 0.0)
        b = gen.get(key, 0.0)
        if a + b == 0:
            continue
        d = min(max(float(discriminator[key]), _CLIP), 1.0 - _CLIP)
        if a > 0:
            total += a * np.log(d)
        if b > 0:
            total += b * np.log(1.0 - d)
    return float(total)


def optimal_value(inst: GameInstance) -> float:
    """Game value under the best-response discriminator.

    Computed as the exact expectation ``E_mix[log D*] + E_gen[log(1 - D*)]``;
    it always equals ``-log 4 + 2 * JSD(noised mixture, generator)`` up to
    roundoff, and -log 4 exactly when the two laws coincide.
    """
    mix = inst.noised_mixture().prob_table()
    gen = inst.p_g.prob_table()
    total = 0.0
    for key in set(mix) | set(gen):
        a = mix.get(key, 0.0)
        b = gen.get(key, 0.0)
        if a > 0:
            total += a * np.log(a / (a + b))
        if b > 0:
            total += b * np.log(b / (a + b))
    return float(total)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


MAX_GRID_SUPPORT = 4


@dataclass
class GridMinimum:
    """Result of brute-force minimization over generator laws on a simplex grid."""

    minimizer: DiscreteDist
    min_value: float
    candidates: int


def grid_minimize(p_data: DiscreteDist, grid_step: float) -> GridMinimum:
    """Enumerate every generator law on the grid and minimize the game value.

    The grid is all probability vectors over ``p_data``'s support whose
    coordinates are multiples of ``grid_step``. Ties go to the first candidate
    in lexicographic order. Supports larger than 4 points are refused;
    enumeration is combinatorial.
    """
    m = p_data.support.shape[0]
    if m > MAX_GRID_SUPPORT:
        raise ValueError(
            f"grid enumeration supports at most {MAX_GRID_SUPPORT} points, got {m}"
        )
    if not 0.0 < grid_step <= 0.25:
        raise ValueError("grid_step must lie in (0, 0.25]")
    k = round(1.0 / grid_step)
    if abs(k * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step {grid_step} does not evenly divide 1")
    pd = p_data.probs
    best_probs = None
    best_value = np.inf
    count = 0
    for counts in _compositions(k, m):
        pg = np.asarray(counts, dtype=np.float64) / k
        value = 0.0
        for a, b in zip(pd, pg):
            if a > 0:
                value += a * np.log(a / (a + b))
            if b > 0:
                value += b * np.log(b / (a + b))
        count += 1
        if value < best_value:
            best_value = value
            best_probs = pg
    return GridMinimum(
        minimizer=DiscreteDist(p_data.support.copy(), best_probs),
        min_value=float(best_value),
        candidates=count,
    )


@dataclass
class ChannelBoundReport:
    """Exact TV between a law and its noised image, against the channel budget."""

    tv: float
    gamma: float
    satisfied: bool


def channel_bound_check(p_x: DiscreteDist, noise: SpikeSlabNoise) -> ChannelBoundReport:
    """Verify that the spike-and-slab channel moved at most ``gamma`` of mass."""
    tv = tv_discrete(p_x, discrete_convolve(p_x, noise))
    return ChannelBoundReport(tv=tv, gamma=noise.gamma, satisfied=tv <= noise.gamma + INEQ_TOL)


@dataclass
class Inequality:
    name: str
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def csv_row(self) -> str:
        return f"{self.name},{self.lhs!r},{self.rhs!r},{self.slack!r},{self.holds}"


CHAIN_CSV_HEADER = "check,lhs,rhs,slack,holds"


@dataclass
class ChainReport:
    inequalities: list[Inequality]

    @property
    def all_hold(self) -> bool:
        return all(ineq.holds for ineq in self.inequalities)


def _ineq(name: str, lhs: float, rhs: float, tol: float = INEQ_TOL) -> Inequality:
    return Inequality(name=name, lhs=float(lhs), rhs=float(rhs), holds=lhs <= rhs + tol)


def mixture_chain_check(inst: GameInstance, delta: float) -> ChainReport:
    """Verify the full divergence chain from per-part budgets to the generator.

    Exact discrete computation of, in order: per-part TV within the budget,
    mixture TV below the weighted per-part TVs (concavity), the weighted sum
    below delta, JSD below TV for the clean/noised mixture pair, and the
    triangle inequality for the square root of JSD.
    """
    gammas = [n.gamma for n in inst.noise_per_part]
    if any(g > delta + INEQ_TOL for g in gammas):
        raise ValueError(f"every channel gamma must be <= delta={delta}, got {gammas}")
    noised = inst.noised_parts()
    alphas = inst.alphas
    part_tvs = [
        tv_discrete(dist, nd) for (dist, _), nd in zip(inst.data_parts, noised)
    ]
    checks = [
        _ineq(f"part{l}_tv_budget", tv, delta) for l, tv in enumerate(part_tvs)
    ]
    p_mix = inst.clean_mixture()
    p_mix_noised = inst.noised_mixture()
    tv_mix = tv_discrete(p_mix, p_mix_noised)
    weighted = float(np.dot(alphas, part_tvs))
    checks.append(_ineq("mixture_tv_concavity", tv_mix, weighted))
    checks.append(_ineq("weighted_tv_budget", weighted, delta))
    checks.append(_ineq("jsd_le_tv", jsd_discrete(p_mix, p_mix_noised), tv_mix))
    sqrt_total = np.sqrt(jsd_discrete(p_mix, inst.p_g))
    sqrt_parts = np.sqrt(jsd_discrete(p_mix_noised, inst.p_g)) + np.sqrt(
        jsd_discrete(p_mix, p_mix_noised)
    )
    checks.append(_ineq("sqrt_jsd_triangle", sqrt_total, sqrt_parts))
    return ChainReport(checks)
