#!/usr/bin/env python3
"""Grid-refinement study of the differential-identity residuals.

Solves the same wave on a ladder of grids and tabulates the interior
max-norms of the divergence, vorticity-consistency, bridge-identity,
differentiated-equation, Laplacian-identity, and head-constancy residuals,
with the observed orders between consecutive grids.
"""

import argparse
import sys

import numpy as np

from steadywaves import vorticity as vort
from steadywaves.analysis import (
    _laplacian_misfit,
    bridge_identity_residual,
    hq_elliptic_residual,
)
from steadywaves.config import parse_vorticity_descriptor
from steadywaves.fields import (
    all_streamlines,
    bernoulli_head,
    divergence_residual,
    velocity_from_height,
    vorticity_mismatch,
)
from steadywaves.solver import PhysicalParams, continue_in_amplitude, unit_depth_flux

NAMES = ("divergence", "vorticity", "bridge", "hq_elliptic", "laplacian", "bernoulli")


def residual_norms(field):
    vf = velocity_from_height(field)
    inner = (slice(2, -2), slice(1, -1))
    lines = all_streamlines(vf)
    return {
        "divergence": float(np.max(np.abs(divergence_residual(vf)[inner]))),
        "vorticity": float(np.max(np.abs(vorticity_mismatch(vf)[inner]))),
        "bridge": max(float(np.max(np.abs(bridge_identity_residual(s)))) for s in lines[1:]),
        "hq_elliptic": float(np.max(np.abs(hq_elliptic_residual(field)))),
        "laplacian": _laplacian_misfit(vf, field.vorticity),
        "bernoulli": max(
            bernoulli_head(s, field.vorticity, field.params).deviation for s in lines
        ),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--vorticity", default="zero", help="zero | constant:g0 | affine:beta:g0")
    parser.add_argument("--amplitude", type=float, default=0.05, help="fraction of depth")
    parser.add_argument("--grids", default="33,65,129", help="comma-separated node counts")
    args = parser.parse_args()

    gravity = 9.81
    params = PhysicalParams(gravity=gravity, mass_flux=unit_depth_flux(gravity))
    spec = parse_vorticity_descriptor(args.vorticity).bound_to_flux(params.mass_flux)
    grids = [int(tok) for tok in args.grids.split(",")]

    rows = []
    for n in grids:
        trace = continue_in_amplitude(
            spec, params, (n, n), target_amplitude=args.amplitude, steps=5
        )
        rows.append((n, residual_norms(trace.members[-1].field)))
        print(f"solved {n}x{n}: head {trace.members[-1].head:.8f}")

    header = "grid     " + "".join(f"{name:>14s}" for name in NAMES)
    print("\n" + header)
    for n, norms in rows:
        print(f"{n:4d}     " + "".join(f"{norms[name]:14.3e}" for name in NAMES))
    print("\nobserved orders between consecutive grids:")
    for (n1, a), (n2, b) in zip(rows, rows[1:]):
        orders = "".join(f"{np.log2(a[name] / b[name]):14.2f}" for name in NAMES)
        print(f"{n1}->{n2:<4d}" + orders)
    return 0


if __name__ == "__main__":
    sys.exit(main())
