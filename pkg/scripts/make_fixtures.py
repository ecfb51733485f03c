"""Generate the synthetic corpora used by the experiments and tests.

Writes a mixed S2L2A/RGBN reconstruction corpus (with a planted -1000 DN
offset subpopulation and a checkerboard split) plus paired LR/HR tiles for
super-resolution.

Usage:
    python scripts/make_fixtures.py --out-dir fixtures --seed 0
"""

import argparse

from satvae.data import checkerboard_split, make_recon_corpus, make_sr_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="fixtures")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tiles", type=int, default=16, help="tiles per modality")
    parser.add_argument("--pairs", type=int, default=8, help="LR/HR pairs")
    parser.add_argument("--cell-size", type=float, default=0.5)
    args = parser.parse_args()

    recon_dir = f"{args.out_dir}/recon"
    manifest = make_recon_corpus(recon_dir, seed=args.seed, n_s2=args.tiles,
                                 n_rgbn=args.tiles)
    manifest = checkerboard_split(manifest, cell_size_deg=args.cell_size,
                                  seed=args.seed)
    manifest.save(f"{recon_dir}/manifest.json")
    print(f"reconstruction corpus: {len(manifest.entries)} tiles -> {recon_dir}")

    sr_manifest = make_sr_corpus(f"{args.out_dir}/sr", seed=args.seed,
                                 n_pairs=args.pairs)
    print(f"super-resolution corpus: {len(sr_manifest.entries)} tiles "
          f"-> {args.out_dir}/sr")


if __name__ == "__main__":
    main()
