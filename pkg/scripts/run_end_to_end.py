"""Drive the full pipeline on synthetic fixtures via the CLI.

Chain: fixtures -> split -> stats -> distill -> finetune -> eval
       -> sr train -> sr sample -> bench run

Budgets are desk-scale by default (a few minutes on a laptop CPU); pass
--steps-* flags to go longer.

Usage:
    python scripts/run_end_to_end.py --work-dir runs/e2e --seed 0
"""

import argparse
import json
import sys
from pathlib import Path

from satvae.cli import dispatch


def run(argv: list[str]) -> None:
    code = dispatch(argv)
    if code != 0:
        print(f"step failed (exit {code}): {' '.join(argv)}", file=sys.stderr)
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", default="runs/e2e")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps-distill", type=int, default=500)
    parser.add_argument("--steps-train", type=int, default=200)
    parser.add_argument("--steps-sr", type=int, default=300)
    parser.add_argument("--sampler-steps", type=int, default=50)
    parser.add_argument("--bench-iterations", type=int, default=10)
    args = parser.parse_args()

    work = Path(args.work_dir)
    fx = work / "fixtures"
    seed = str(args.seed)

    run(["data", "inspect", "--make-fixtures", "all", "--out-dir", str(fx),
         "--seed", seed])
    run(["data", "split", "--manifest", str(fx / "recon" / "manifest.json"),
         "--cell-size", "0.5", "--seed", seed, "--out", str(work / "split.json")])
    run(["data", "stats", "--manifest", str(work / "split.json"),
         "--modality", "all", "--out", str(work / "manifest.json")])
    run(["data", "inspect", "--manifest", str(work / "manifest.json")])

    run(["distill", "--out-dir", str(work / "distill"),
         "--steps", str(args.steps_distill), "--seed", seed])
    distill_ckpt = work / "distill" / "distill_checkpoint.svcp"

    train_cfg = work / "train_cfg.json"
    train_cfg.write_text(json.dumps({"train": {
        "steps": args.steps_train, "batch_size": 4,
        "checkpoint_every": max(args.steps_train // 2, 1),
        "init_checkpoint": str(distill_ckpt),
    }}))
    run(["train", "--config", str(train_cfg), "--manifest", str(work / "manifest.json"),
         "--out-dir", str(work / "train"), "--seed", seed])
    vae_ckpt = work / "train" / "finetune_checkpoint.svcp"

    run(["eval", "--checkpoint", str(vae_ckpt), "--manifest", str(work / "manifest.json"),
         "--split", "TEST", "--out", str(work / "report.json")])

    run(["data", "stats", "--manifest", str(fx / "sr" / "manifest.json"),
         "--modality", "all", "--out", str(work / "sr_manifest.json")])
    sr_cfg = work / "sr_cfg.json"
    sr_cfg.write_text(json.dumps({
        "sr": {"scale": 4, "lr_size": 32, "hr_size": 128,
               "sampler_steps": args.sampler_steps},
        "train": {"steps": args.steps_sr, "batch_size": 4,
                  "checkpoint_every": max(args.steps_sr // 2, 1)},
    }))
    run(["sr", "train", "--config", str(sr_cfg), "--manifest", str(work / "sr_manifest.json"),
         "--vae", str(vae_ckpt), "--out-dir", str(work / "sr"), "--seed", seed])
    run(["sr", "sample", "--checkpoint", str(work / "sr" / "sr_latent_checkpoint.svcp"),
         "--vae", str(vae_ckpt), "--manifest", str(work / "sr_manifest.json"),
         "--out-dir", str(work / "samples"), "--seed", seed])

    run(["bench", "run", "--systems", "latent,pixel",
         "--iterations", str(args.bench_iterations),
         "--out", str(work / "bench.json"), "--seed", seed])
    print(f"\nall stages completed; artifacts under {work}")


if __name__ == "__main__":
    main()
