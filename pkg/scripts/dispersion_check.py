#!/usr/bin/env python3
"""Bifurcation head against the analytic finite-depth dispersion relation.

For the irrotational family with the unit-depth flux normalization, the
linearization about the laminar flow must go singular exactly where the
surface speed satisfies c0^2 = g tanh(depth).  This script tabulates the
relative error of the computed singular point over a ladder of flux
resolutions, with and without Richardson extrapolation.
"""

import argparse
import sys

import numpy as np
from scipy.optimize import brentq

from steadywaves import vorticity as vort
from steadywaves.laminar import bifurcation_head
from steadywaves.solver import PhysicalParams, unit_depth_flux


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gravity", type=float, default=9.81)
    parser.add_argument("--resolutions", default="33,65,129,257")
    args = parser.parse_args()

    g = args.gravity
    params = PhysicalParams(gravity=g, mass_flux=unit_depth_flux(g))
    w_exact = brentq(
        lambda w: g * w * w * np.tanh(w * (-params.mass_flux)) - 1.0, 1e-3, 10.0, xtol=1e-15
    )
    c0_sq_exact = 1.0 / w_exact**2
    print(f"analytic: c0^2 = {c0_sq_exact:.10f}  (g tanh(1) = {g * np.tanh(1.0):.10f})")
    print(f"{'n_p':>5s} {'plain rel err':>15s} {'extrapolated':>15s}")
    for n_p in (int(tok) for tok in args.resolutions.split(",")):
        plain = bifurcation_head(vort.zero(), params, n_p=n_p, extrapolate=False)
        sharp = bifurcation_head(vort.zero(), params, n_p=n_p, extrapolate=True)
        e_plain = abs(plain.surface_speed**2 - c0_sq_exact) / c0_sq_exact
        e_sharp = abs(sharp.surface_speed**2 - c0_sq_exact) / c0_sq_exact
        print(f"{n_p:5d} {e_plain:15.3e} {e_sharp:15.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
