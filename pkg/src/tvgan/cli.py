"""Command-line entry point: train, oracle, divergence, sample, gradcheck.

Exit codes follow one contract everywhere: 0 on success (and all checked
inequalities holding), 1 on runtime failure or a failed check, 2 on bad
usage or malformed input files. Every training run writes a manifest that is
sufficient to reproduce it.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, nn
from .distributions import GaussianMixture, MixtureComponent, Ring, dataset_spec_from_dict, sample_dataset
from .divergence import DivergenceReport, HistogramEstimator, estimate_divergences
from .oracle import (
    CHAIN_CSV_HEADER,
    GameInstance,
    Inequality,
    channel_bound_check,
    jsd_discrete,
    mixture_chain_check,
    optimal_value,
    LOG4,
    VALUE_TOL,
)
from .training import TrainConfig, train


class UsageError(Exception):
    """Bad arguments or malformed input files; maps to exit code 2."""


@dataclass
class RunManifest:
    """Reproducibility record: the config echo plus the seed fully determine a run."""

    tool: str
    version: str
    seed: int
    config: dict
    started: str
    finished: str | None = None
    outputs: list[str] = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _load_samples(path: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    try:
        data = np.loadtxt(p, ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise UsageError(f"{p}: not a numeric sample matrix: {exc}") from exc
    if data.size == 0:
        raise UsageError(f"{p}: no samples")
    return data


def cmd_train(args) -> int:
    raw = _load_json(args.config)
    try:
        config = TrainConfig.from_dict(raw)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    if args.seed is not None:
        raw_with_seed = dict(raw)
        raw_with_seed["seed"] = args.seed
        config = TrainConfig.from_dict(raw_with_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        tool="tvgan",
        version=__version__,
        seed=config.seed,
        config=config.to_dict(),
        started=_utc_now(),
    )
    manifest_path = out / "manifest.json"
    manifest.write(manifest_path)
    result = train(config, out_dir=out)
    manifest.finished = _utc_now()
    manifest.outputs = sorted(
        p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json"
    )
    manifest.write(manifest_path)
    if result.metrics:
        last = result.metrics[-1]
        print(
            f"done: {last.step} generator steps, "
            f"d_loss={last.d_loss:.6f}, g_loss={last.g_loss:.6f}"
        )
    else:
        print("done: 0 generator steps")
    return 0


def _instance_checks(inst: GameInstance, which: str, delta: float | None) -> list[Inequality]:
    checks: list[Inequality] = []
    if which in ("channel", "all"):
        for l, ((dist, _), noise) in enumerate(zip(inst.data_parts, inst.noise_per_part)):
            report = channel_bound_check(dist, noise)
            checks.append(
                Inequality(
                    name=f"part{l}_channel_tv",
                    lhs=report.tv,
                    rhs=report.gamma,
                    holds=report.satisfied,
                )
            )
    if which in ("value", "all"):
        gap = abs(
            optimal_value(inst) - (-LOG4 + 2.0 * jsd_discrete(inst.noised_mixture(), inst.p_g))
        )
        checks.append(
            Inequality(name="value_identity", lhs=gap, rhs=VALUE_TOL, holds=gap <= VALUE_TOL)
        )
    if which in ("chain", "all"):
        if delta is None:
            delta = max(n.gamma for n in inst.noise_per_part)
        checks.extend(mixture_chain_check(inst, delta).inequalities)
    return checks


def cmd_oracle(args) -> int:
    raw = _load_json(args.instance)
    try:
        inst = GameInstance.from_dict(raw)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"{args.instance}: {exc}") from exc
    try:
        checks = _instance_checks(inst, args.check, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = [CHAIN_CSV_HEADER] + [c.csv_row() for c in checks]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if all(c.holds for c in checks) else 1


def cmd_divergence(args) -> int:
    samples_p = _load_samples(args.samples_p)
    samples_q = _load_samples(args.samples_q)
    if samples_p.shape[1] != samples_q.shape[1]:
        raise UsageError(
            f"dimension mismatch: {samples_p.shape[1]} vs {samples_q.shape[1]}"
        )
    if args.bounds:
        try:
            bounds = np.array(
                [[float(part) for part in b.split(",")] for b in args.bounds]
            )
        except ValueError as exc:
            raise UsageError(f"bad --bounds (want 'low,high' per dimension): {exc}") from exc
        if bounds.shape != (samples_p.shape[1], 2):
            raise UsageError(
                f"need one 'low,high' pair per dimension ({samples_p.shape[1]}), "
                f"got {len(args.bounds)}"
            )
    else:
        stacked = np.vstack([samples_p, samples_q])
        low = stacked.min(axis=0)
        high = stacked.max(axis=0)
        pad = np.maximum(1e-9, 1e-9 * np.abs(high - low))
        bounds = np.column_stack([low - pad, high + pad])
    try:
        est = HistogramEstimator(bounds, args.bins, args.smoothing)
        report = estimate_divergences(samples_p, samples_q, est)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(DivergenceReport.CSV_HEADER)
    print(report.csv_row())
    return 0


_PRESETS = {
    "ring": lambda args: Ring(radius=args.radius, noise_std=args.noise_std),
    "gaussian": lambda args: GaussianMixture(
        [MixtureComponent(np.zeros(2), np.ones(2), 1.0)]
    ),
}


def cmd_sample(args) -> int:
    if args.spec in _PRESETS:
        spec = _PRESETS[args.spec](args)
    else:
        raw = _load_json(args.spec)
        try:
            spec = dataset_spec_from_dict(raw)
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"{args.spec}: {exc}") from exc
    if args.n < 1:
        raise UsageError("-n must be >= 1")
    rng = np.random.default_rng(args.seed)
    rows = sample_dataset(spec, args.n, rng)
    lines = "\n".join(" ".join(repr(float(v)) for v in row) for row in rows) + "\n"
    if args.out:
        Path(args.out).write_text(lines)
    else:
        sys.stdout.write(lines)
    return 0


def cmd_gradcheck(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --sizes (want comma-separated ints): {exc}") from exc
    if len(sizes) < 2:
        raise UsageError("--sizes needs at least input and output widths")
    rng = np.random.default_rng(args.seed)
    params = nn.init_mlp(sizes, [args.activation] * (len(sizes) - 2) + ["identity"], rng)
    x = rng.standard_normal((4, sizes[0]))
    readout = rng.standard_normal((4, sizes[-1]))

    def loss(p):
        out, cache = nn.mlp_forward(p, x)
        grads, _ = nn.mlp_backward(p, cache, readout)
        return float(np.sum(out * readout)), grads

    err = nn.grad_check(params, loss, h=args.step)
    print(f"max_rel_error={err!r}")
    return 0 if err <= args.tol else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvgan",
        description="Divergence-budgeted adversarial training toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training config end to end")
    p_train.add_argument("--config", required=True, help="JSON training config")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.set_defaults(func=cmd_train)

    p_oracle = sub.add_parser("oracle", help="exact checks on a discrete game instance")
    p_oracle.add_argument("--instance", required=True, help="JSON game instance")
    p_oracle.add_argument(
        "--check",
        choices=("all", "channel", "value", "chain"),
        default="all",
        help="which inequality family to verify",
    )
    p_oracle.add_argument(
        "--delta", type=float, default=None, help="budget for the chain check (default: max gamma)"
    )
    p_oracle.add_argument("--out", default=None, help="write the CSV report here instead of stdout")
    p_oracle.set_defaults(func=cmd_oracle)

    p_div = sub.add_parser("divergence", help="histogram TV/JSD between two sample files")
    p_div.add_argument("samples_p", help="first sample file (text rows)")
    p_div.add_argument("samples_q", help="second sample file (text rows)")
    p_div.add_argument("--bins", type=int, default=64, help="bins per dimension")
    p_div.add_argument(
        "--bounds",
        nargs="+",
        default=None,
        metavar="LOW,HIGH",
        help="per-dimension bounds; default: data range",
    )
    p_div.add_argument("--smoothing", type=float, default=1e-9, help="pseudo-count per bin")
    p_div.set_defaults(func=cmd_divergence)

    p_sample = sub.add_parser("sample", help="draw samples from a dataset spec")
    p_sample.add_argument("spec", help="JSON spec file, or preset: ring, gaussian")
    p_sample.add_argument("-n", type=int, default=1000, help="number of samples")
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--radius", type=float, default=1.0, help="ring preset radius")
    p_sample.add_argument("--noise-std", type=float, default=0.05, help="ring preset jitter")
    p_sample.add_argument("--out", default=None, help="write samples here instead of stdout")
    p_sample.set_defaults(func=cmd_sample)

    p_grad = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    p_grad.add_argument("--sizes", default="2,8,8,1", help="comma-separated layer widths")
    p_grad.add_argument("--activation", choices=("tanh", "relu", "sigmoid"), default="tanh")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--step", type=float, default=1e-5, help="finite-difference step")
    p_grad.add_argument("--tol", type=float, default=1e-6, help="pass threshold")
    p_grad.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # CLI boundary: report and exit nonzero
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
