"""How far can a spike-and-slab channel move a distribution?

The channel leaves each point alone with probability 1 - gamma and adds a
slab draw with probability gamma, so total variation between a law and its
noised image can never exceed gamma.  This script computes the exact TV for
a few channels, shows the shifted construction that attains the budget
exactly, and checks that mixing datasets never amplifies the bound.

Run:  python3 demos/channel_budget.py
"""

import numpy as np

from tvgan.distributions import (
    DiscreteDist,
    PointMassSlab,
    SpikeSlabNoise,
    discrete_convolve,
    mixture,
)
from tvgan.divergence import tv_discrete


def law(support, probs):
    return DiscreteDist(np.asarray(support, dtype=np.float64), np.asarray(probs))


def main():
    base = law([0.0, 1.0, 2.0], [0.5, 0.3, 0.2])

    print("== TV after the channel never exceeds gamma ==")
    print(f"{'gamma':>6}  {'slab':<22}  {'TV(p, noised p)':>16}")
    channels = [
        SpikeSlabNoise(0.0, PointMassSlab([5.0])),
        SpikeSlabNoise(0.1, PointMassSlab([5.0])),
        SpikeSlabNoise(0.25, PointMassSlab([0.5])),
        SpikeSlabNoise(0.4, law([-1.0, 1.0], [0.5, 0.5])),
    ]
    for noise in channels:
        noised = discrete_convolve(base, noise)
        tv = tv_discrete(base, noised)
        name = type(noise.slab).__name__
        print(f"{noise.gamma:>6.2f}  {name:<22}  {tv:>16.12f}")
        assert tv <= noise.gamma + 1e-12

    print()
    print("== The budget is attained when the shifted mass lands off-support ==")
    spread = law([0.0, 10.0], [0.5, 0.5])
    shift = SpikeSlabNoise(0.25, PointMassSlab([1.0]))
    attained = tv_discrete(spread, discrete_convolve(spread, shift))
    print(f"support {{0, 10}} shifted by +1 at gamma=0.25: TV = {attained!r}")

    print()
    print("== Mixing datasets keeps the weighted budget ==")
    part_a, noise_a = law([0.0, 10.0], [0.5, 0.5]), SpikeSlabNoise(0.3, PointMassSlab([1.0]))
    part_b, noise_b = law([20.0, 21.0], [0.5, 0.5]), SpikeSlabNoise(0.5, PointMassSlab([1.0]))
    tv_a = tv_discrete(part_a, discrete_convolve(part_a, noise_a))
    tv_b = tv_discrete(part_b, discrete_convolve(part_b, noise_b))
    clean = mixture([(part_a, 0.5), (part_b, 0.5)])
    noised = mixture(
        [(discrete_convolve(part_a, noise_a), 0.5), (discrete_convolve(part_b, noise_b), 0.5)]
    )
    tv_mix = tv_discrete(clean, noised)
    print(f"part TVs: {tv_a:.4f} and {tv_b:.4f}; equal-weight mixture TV: {tv_mix:.4f}")
    print(f"mixture TV <= weighted mean {0.5 * tv_a + 0.5 * tv_b:.4f}: "
          f"{tv_mix <= 0.5 * tv_a + 0.5 * tv_b + 1e-12}")


if __name__ == "__main__":
    main()
