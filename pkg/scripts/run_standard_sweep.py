#!/usr/bin/env python3
"""Run the standard verification matrix and print the verdict table.

Five vorticity classes (zero, constant of both signs, affine of both signs)
crossed with two wave amplitudes (1% and 5% of the laminar depth), each
member run through the full property battery.
"""

import argparse
import sys
import tempfile

from steadywaves.cli import main as cli_main

CONFIG = """
[grid]
n_q = {n}
n_p = {n}
[run]
steps = 5
seed = 1234
[sweep]
vorticities = zero; constant:0.3; constant:-0.3; affine:0.5:0.1; affine:-0.5:0.1
amplitudes = 0.01, 0.05
workers = 4
"""


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/standard_sweep")
    parser.add_argument("--grid", type=int, default=65, help="nodes per direction")
    parser.add_argument("--plots", action="store_true")
    args = parser.parse_args()

    with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as handle:
        handle.write(CONFIG.format(n=args.grid))
        cfg_path = handle.name
    argv = ["sweep", "--config", cfg_path, "--out", args.out]
    if args.plots:
        argv.append("--plots")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
