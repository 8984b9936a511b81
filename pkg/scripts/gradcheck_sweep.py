"""Worst relative gradient error per block over seeds, at two step sizes.

Shows why the block checks use eps=1e-4: at 1e-3 the truncation error of the
central difference already exceeds 1e-3 relative on small components.
"""

import argparse

from fraudforge.gradcheck import block_checks, gan_step_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    for eps in (1e-3, 1e-4):
        worst = {}
        for seed in range(args.seeds):
            for block, errs in block_checks(seed, eps=eps).items():
                worst[block] = max(worst.get(block, 0.0), max(errs.values()))
        print(f"eps={eps:g}")
        for block, err in worst.items():
            print(f"  {block:16s} {err:.2e}{'' if err < 1e-3 else '  > 1e-3'}")
    gan = max(max(gan_step_check(seed).values()) for seed in range(min(args.seeds, 3)))
    print(f"gan composite (eps=1e-5) {gan:.2e}")


if __name__ == "__main__":
    main()
