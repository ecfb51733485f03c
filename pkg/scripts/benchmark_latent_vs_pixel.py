"""Measure latent vs pixel-space super-resolution inference cost.

Reports per-image wall-clock latency (mean over iterations, warmup excluded),
throughput, process peak memory, parameter counts, and the analytic FLOP
ratio of the two denoiser cores. Fresh seeded models by default; pass
checkpoints to measure trained pipelines.

Usage:
    python scripts/benchmark_latent_vs_pixel.py --iterations 50 --out bench.json
"""

import argparse

from satvae.cli import dispatch


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--warmup", type=int, default=5)
    parser.add_argument("--steps", type=int, default=50, help="DDIM steps")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--vae", default=None)
    parser.add_argument("--denoiser", default=None)
    parser.add_argument("--pixel-denoiser", default=None)
    parser.add_argument("--out", default="bench.json")
    args = parser.parse_args()

    argv = ["bench", "run", "--systems", "latent,pixel",
            "--iterations", str(args.iterations), "--warmup", str(args.warmup),
            "--steps", str(args.steps), "--seed", str(args.seed),
            "--out", args.out]
    for flag, value in (("--vae", args.vae), ("--denoiser", args.denoiser),
                        ("--pixel-denoiser", args.pixel_denoiser)):
        if value:
            argv += [flag, value]
    raise SystemExit(dispatch(argv))


if __name__ == "__main__":
    main()
