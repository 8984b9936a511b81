"""Run the desk-scale comparison grid on the blob fixture and print the tables.

    python3 scripts/run_blob_grid.py [--out DIR] [--methods original gan_transformer]
"""

import argparse
from pathlib import Path

from fraudforge import pipeline
from fraudforge.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "blob.json"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--methods", nargs="+", default=None)
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = str(Path(args.out).resolve())
    if args.methods:
        cfg.methods = args.methods
    grid = pipeline.cmd_compare(cfg.validate())
    print((Path(cfg.out_dir) / "summary.md").read_text())
    print(f"wall time {grid.metadata['wall_time_s']:.0f}s, {len(grid.failures)} failed cells")
    gain = grid.median("recall", "gan_transformer", "lr") - grid.median("recall", "original", "lr")
    if "gan_transformer" in cfg.methods and "original" in cfg.methods:
        print(f"LR recall gain from gan_transformer: {gain:+.3f}")


if __name__ == "__main__":
    main()
