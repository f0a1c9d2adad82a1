"""Quantified verification of the vertical-velocity properties.

Every qualitative statement about the flow (sign of v, its monotonicity
against streamline curvature, inflection-point parity, the location of the
maximum of v, horizontal-velocity decay, displacement decay with depth) is
turned into a pass/fail check with an explicit tolerance, a worst-violation
magnitude, and the location of the worst site.  Sign tests on strict
inequalities exempt the known zero sets (crest/trough lines, the bed) and
zero out a discretization-noise band scaled by the stencil's truncation
order before comparing signs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateStreamlineError, ThinDomainError
from .fields import (
    Streamline,
    VelocityField,
    all_streamlines,
    bernoulli_head,
    divergence_residual,
    surface_kinematic_residual,
    velocity_from_height,
    vorticity_mismatch,
)
from .solver import (
    AmplitudePin,
    HeightField,
    assemble_jacobian,
    assemble_residual,
    diff_p,
    diff_q,
    diff_qq,
    newton_solve,
)
from .vorticity import VorticitySpec, check_decreasing_vorticity_admissible

REPORT_SCHEMA = "steadywaves.report/1"

# noise-band factors: sign tests are meaningless below the stencils'
# truncation error, which scales with the squared grid spacing
CURVATURE_BAND_FACTOR = 10.0
SLOPE_BAND_FACTOR = 10.0
V_SIGN_RELATIVE_TOL = 1e-8
LAMINAR_AMPLITUDE_FLOOR = 1e-9


@dataclass(frozen=True)
class PropertyVerdict:
    name: str
    status: str                      # "pass" | "fail" | "not-applicable"
    worst_violation: float | None = None
    tolerance: float | None = None
    locations: tuple = ()
    sample_count: int = 0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == "fail" and not self.locations:
            raise ValueError("failing verdicts must carry at least one location")

    @property
    def margin(self) -> float:
        """tolerance / violation for magnitude-style checks; inf when clean."""
        if self.worst_violation is None or self.tolerance is None:
            return np.inf
        if self.worst_violation <= 0:
            return np.inf
        return self.tolerance / self.worst_violation

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "locations": list(self.locations),
            "sample_count": self.sample_count,
            "details": self.details,
        }


@dataclass(frozen=True)
class InflectionSet:
    p_level: float
    positions: tuple[float, ...]
    count: int
    curvature_band: float

    def as_dict(self) -> dict:
        return {
            "p_level": self.p_level,
            "positions": list(self.positions),
            "count": self.count,
            "curvature_band": self.curvature_band,
        }


@dataclass(frozen=True)
class DisplacementProfile:
    p_levels: np.ndarray
    mean_depth: np.ndarray
    displacement: np.ndarray

    def as_dict(self) -> dict:
        return {
            "p_levels": [float(v) for v in self.p_levels],
            "mean_depth": [float(v) for v in self.mean_depth],
            "displacement": [float(v) for v in self.displacement],
        }


@dataclass(frozen=True)
class EigenvalueBound:
    rectangle_bound: float
    discrete_estimate: float | None
    iterations: int

    def as_dict(self) -> dict:
        return {
            "rectangle_bound": self.rectangle_bound,
            "discrete_estimate": self.discrete_estimate,
            "iterations": self.iterations,
        }


def _loc(q: float, p: float) -> dict:
    return {"q": float(q), "p": float(p)}


# -- sign-of-v checks -----------------------------------------------------------


def check_v_positive(vf: VelocityField) -> PropertyVerdict:
    """v must be positive on the open half-domain and its surface.

    The crest/trough lines and the bed are exact zero sets and are exempt;
    samples at least one cell away from the lateral boundaries must clear a
    strictly positive floor.
    """
    if vf.amplitude <= LAMINAR_AMPLITUDE_FLOOR * max(vf.depth, 1e-6):
        return PropertyVerdict(
            name="v_positive",
            status="not-applicable",
            details={"reason": "laminar flow: v vanishes identically"},
        )
    v = vf.v
    vmax = float(np.max(v))
    tol_v = V_SIGN_RELATIVE_TOL * max(vmax, 0.0)
    grid = vf.grid

    wide = v[1:, :]          # everything above the bed, surface included
    strict = v[1:, 1:-1]     # at least one cell from the lateral boundaries

    worst = 0.0
    locations = []
    wmin = float(np.min(wide))
    if wmin <= -tol_v:
        j, i = np.unravel_index(np.argmin(wide), wide.shape)
        worst = -wmin
        locations.append(_loc(grid.q[i], grid.p[j + 1]))
    smin = float(np.min(strict))
    if smin < tol_v:
        j, i = np.unravel_index(np.argmin(strict), strict.shape)
        worst = max(worst, tol_v - smin)
        locations.append(_loc(grid.q[i + 1], grid.p[j + 1]))

    status = "fail" if locations else "pass"
    return PropertyVerdict(
        name="v_positive",
        status=status,
        worst_violation=worst if locations else max(0.0, -wmin),
        tolerance=tol_v,
        locations=tuple(locations),
        sample_count=wide.size,
        details={"min_interior": smin, "max_v": vmax},
    )


# -- streamline geometry ----------------------------------------------------------


def curvature_band(sl: Streamline, dq: float) -> float:
    return CURVATURE_BAND_FACTOR * dq * dq * float(np.max(np.abs(sl.curvature)))


def slope_band(sl: Streamline, dq: float) -> float:
    return SLOPE_BAND_FACTOR * dq * dq * float(np.max(np.abs(sl.dvdx)))


def find_inflection_points(sl: Streamline, depth_scale: float = 1.0) -> InflectionSet:
    """Sign changes of the streamline curvature outside the noise band.

    The curvature used is the slope-field variant: its zeros are exactly the
    switching points of v along the streamline, and it agrees with the
    geometric second derivative up to a correction quadratic in the wave
    amplitude.  Each sign change is reported at the linearly interpolated
    root between the bracketing above-band samples.  A curve whose
    curvature never leaves the band is degenerate (only the bed is
    genuinely flat).
    """
    dq = sl.x[1] - sl.x[0]
    band = curvature_band(sl, dq)
    floor = 1e-9 * max(depth_scale, 1e-6)
    if float(np.max(np.abs(sl.curvature))) <= floor:
        raise DegenerateStreamlineError(
            f"curvature below {floor:.3e} everywhere on the streamline at "
            f"p={sl.p_level:.6g}; only the bed should be flat"
        )
    kept = np.nonzero(np.abs(sl.curvature) > band)[0]
    positions = []
    for a, b in zip(kept[:-1], kept[1:]):
        ya, yb = sl.curvature[a], sl.curvature[b]
        if np.sign(ya) != np.sign(yb):
            x0 = sl.x[a] + (sl.x[b] - sl.x[a]) * (-ya) / (yb - ya)
            positions.append(float(x0))
    return InflectionSet(
        p_level=sl.p_level,
        positions=tuple(positions),
        count=len(positions),
        curvature_band=band,
    )


def check_curvature_monotonicity_law(sl: Streamline) -> PropertyVerdict:
    """Along a streamline, v rises where the curve is concave and falls where
    it is convex: sign(dv/dx) = -sign(curvature) outside both noise bands."""
    dq = sl.x[1] - sl.x[0]
    eps_c = curvature_band(sl, dq)
    eps_s = slope_band(sl, dq)
    mask = (np.abs(sl.curvature) > eps_c) & (np.abs(sl.dvdx) > eps_s)
    agree = np.sign(sl.dvdx) == -np.sign(sl.curvature)
    mismatch = mask & ~agree
    n_checked = int(np.count_nonzero(mask))
    if not np.any(mismatch):
        return PropertyVerdict(
            name="curvature_monotonicity",
            status="pass",
            worst_violation=0.0,
            tolerance=eps_s,
            sample_count=n_checked,
            details={"mismatch_fraction": 0.0, "curvature_band": eps_c},
        )
    bad = np.nonzero(mismatch)[0]
    worst_i = bad[int(np.argmax(np.abs(sl.dvdx[bad])))]
    return PropertyVerdict(
        name="curvature_monotonicity",
        status="fail",
        worst_violation=float(np.abs(sl.dvdx[worst_i])),
        tolerance=eps_s,
        locations=(_loc(sl.x[worst_i], sl.p_level),),
        sample_count=n_checked,
        details={
            "mismatch_fraction": float(bad.size) / max(n_checked, 1),
            "curvature_band": eps_c,
        },
    )


def check_rise_then_fall(sl: Streamline, infl: InflectionSet) -> PropertyVerdict:
    """v rises from zero at the crest line, peaks, and falls back to zero at
    the trough line, with the monotone segments delimited by the inflection
    points (alternating when there are several)."""
    if infl.count == 0:
        return PropertyVerdict(
            name="rise_then_fall",
            status="not-applicable",
            details={"reason": "no inflection point detected"},
        )
    dq = sl.x[1] - sl.x[0]
    eps_s = slope_band(sl, dq)
    vmax = float(np.max(np.abs(sl.v)))
    tol_end = V_SIGN_RELATIVE_TOL * max(vmax, 1e-300)

    positions = np.asarray(infl.positions)
    locations = []
    worst = 0.0
    checked = 0
    for i in range(sl.x.size):
        if np.abs(sl.dvdx[i]) <= eps_s:
            continue
        segment = int(np.searchsorted(positions, sl.x[i]))
        expected = 1.0 if segment % 2 == 0 else -1.0
        checked += 1
        if np.sign(sl.dvdx[i]) != expected:
            locations.append(_loc(sl.x[i], sl.p_level))
            worst = max(worst, float(np.abs(sl.dvdx[i])))
    end_violation = max(abs(float(sl.v[0])), abs(float(sl.v[-1])))
    if end_violation > tol_end:
        locations.append(_loc(sl.x[0] if abs(sl.v[0]) >= abs(sl.v[-1]) else sl.x[-1], sl.p_level))
        worst = max(worst, end_violation)
    status = "fail" if locations else "pass"
    return PropertyVerdict(
        name="rise_then_fall",
        status=status,
        worst_violation=worst,
        tolerance=eps_s,
        locations=tuple(locations[:3]),
        sample_count=checked,
        details={"inflection_count": infl.count, "end_values": [float(sl.v[0]), float(sl.v[-1])]},
    )


def locate_max_v(
    vf: VelocityField,
    surface_inflections: InflectionSet,
    spec: VorticitySpec,
    admissibility: str,
) -> PropertyVerdict:
    """The global maximum of v must sit on the surface within one grid cell
    of the surface inflection point.

    Applies to irrotational, constant, and increasing vorticity, and to
    decreasing vorticity that passed the eigenvalue admissibility bound;
    gated on the surface carrying exactly one detected inflection.
    """
    cls = spec.monotonicity_class
    applicable = cls in ("irrotational", "constant", "increasing") or (
        cls == "decreasing-bounded" and admissibility == "pass"
    )
    if not applicable:
        return PropertyVerdict(
            name="max_v_location",
            status="not-applicable",
            details={"reason": f"vorticity class {cls} with admissibility {admissibility}"},
        )
    if surface_inflections.count != 1:
        return PropertyVerdict(
            name="max_v_location",
            status="not-applicable",
            details={
                "reason": "surface inflection count is not one",
                "count": surface_inflections.count,
            },
        )
    grid = vf.grid
    j, i = np.unravel_index(int(np.argmax(vf.v)), vf.v.shape)
    x0 = surface_inflections.positions[0]
    distance = abs(float(grid.q[i]) - x0)
    on_surface = j == grid.n_p - 1
    within = distance <= grid.dq * (1.0 + 1e-9)

    v_x, v_y = vf.gradients("v")
    vy_interior = v_y[1:-1, 1:-1]
    details = {
        "argmax": _loc(grid.q[i], grid.p[j]),
        "surface_x0": x0,
        "distance": distance,
        "min_interior_v_y": float(np.min(vy_interior)),
        "v_y_positive_fraction": float(np.mean(vy_interior > 0.0)),
    }
    if on_surface and within:
        return PropertyVerdict(
            name="max_v_location",
            status="pass",
            worst_violation=distance,
            tolerance=grid.dq,
            sample_count=vf.v.size,
            details=details,
        )
    return PropertyVerdict(
        name="max_v_location",
        status="fail",
        worst_violation=distance if on_surface else float(grid.n_p - 1 - j) * grid.dp,
        tolerance=grid.dq,
        locations=(_loc(grid.q[i], grid.p[j]),),
        sample_count=vf.v.size,
        details=details,
    )


def check_u_decreasing_along_streamlines(vf: VelocityField, spec: VorticitySpec) -> PropertyVerdict:
    """du/dx along every streamline stays nonpositive (up to the noise band).

    Requires nonnegative, nondecreasing vorticity; otherwise not applicable.
    """
    psi_hi = -vf.grid.p0
    gamma_prime = float(np.asarray(spec.gamma_prime(0.0)))
    gamma_ends = min(float(np.asarray(spec.gamma(0.0))), float(np.asarray(spec.gamma(psi_hi))))
    if gamma_prime < 0.0 or gamma_ends < 0.0:
        return PropertyVerdict(
            name="u_decreasing",
            status="not-applicable",
            details={"reason": "requires gamma >= 0 and gamma' >= 0"},
        )
    if vf.amplitude <= LAMINAR_AMPLITUDE_FLOOR * max(vf.depth, 1e-6):
        return PropertyVerdict(
            name="u_decreasing",
            status="not-applicable",
            details={"reason": "laminar flow: u constant along streamlines"},
        )
    from .fields import fourth_diff1

    # rows are streamlines, so this is the along-streamline derivative
    dudx = fourth_diff1(vf.u_minus_c, vf.grid.dq)
    grid = vf.grid
    eps_rows = SLOPE_BAND_FACTOR * grid.dq**2 * np.max(np.abs(dudx), axis=1, keepdims=True)
    excess = dudx - eps_rows
    worst = float(np.max(excess))
    if worst <= 0.0:
        return PropertyVerdict(
            name="u_decreasing",
            status="pass",
            worst_violation=float(np.max(dudx)),
            tolerance=float(np.max(eps_rows)),
            sample_count=dudx.size,
        )
    j, i = np.unravel_index(int(np.argmax(excess)), excess.shape)
    return PropertyVerdict(
        name="u_decreasing",
        status="fail",
        worst_violation=float(dudx[j, i]),
        tolerance=float(eps_rows[j, 0]),
        locations=(_loc(grid.q[i], grid.p[j]),),
        sample_count=dudx.size,
    )


def displacement_profile(h: HeightField) -> tuple[DisplacementProfile, PropertyVerdict]:
    """Crest-to-trough vertical displacement per streamline, checked to be
    nonincreasing with depth (for nonnegative nondecreasing vorticity)."""
    spec = h.vorticity
    psi_hi = -h.grid.p0
    gamma_prime = float(np.asarray(spec.gamma_prime(0.0)))
    gamma_ends = min(float(np.asarray(spec.gamma(0.0))), float(np.asarray(spec.gamma(psi_hi))))
    displacement = h.values[:, 0] - h.values[:, -1]
    depth_ref = h.depth_reference
    profile = DisplacementProfile(
        p_levels=h.grid.p.copy(),
        mean_depth=h.values.mean(axis=1) - depth_ref,
        displacement=displacement,
    )
    if gamma_prime < 0.0 or gamma_ends < 0.0:
        return profile, PropertyVerdict(
            name="displacement_monotone",
            status="not-applicable",
            details={"reason": "requires gamma >= 0 and gamma' >= 0"},
        )
    tol_h = 1e-12 + 1e-10 * float(np.max(np.abs(displacement)))
    drops = np.diff(displacement)  # indexed from the bed upward
    worst = -float(np.min(drops))
    bed_ok = abs(float(displacement[0])) <= 1e-13
    if worst <= tol_h and bed_ok:
        return profile, PropertyVerdict(
            name="displacement_monotone",
            status="pass",
            worst_violation=max(worst, 0.0),
            tolerance=tol_h,
            sample_count=displacement.size,
        )
    j = int(np.argmin(drops))
    return profile, PropertyVerdict(
        name="displacement_monotone",
        status="fail",
        worst_violation=worst if not bed_ok or worst > tol_h else abs(float(displacement[0])),
        tolerance=tol_h,
        locations=(_loc(0.0, h.grid.p[j]),),
        sample_count=displacement.size,
        details={"bed_displacement": float(displacement[0])},
    )


# -- differential identities -------------------------------------------------------


def bridge_identity_residual(sl: Streamline) -> np.ndarray:
    """v dv/dx - curvature (u-c)^2 slope: the exact algebraic bridge between
    the streamline's curvature and the growth of v along it.

    With the slope-field curvature and the exact transformed slope this
    identity holds up to the discrete continuity error, so its residual must
    vanish under refinement.
    """
    return sl.v * sl.dvdx - sl.curvature * sl.u_minus_c**2 * sl.slope


def hq_elliptic_residual(h: HeightField) -> np.ndarray:
    """Residual of the differentiated height equation applied to h_q.

    Differentiating the interior balance in q yields a uniformly elliptic
    operator annihilating h_q; its discrete residual measures how well the
    converged field carries that structure.  Evaluated on interior rows.
    """
    grid = h.grid
    dq, dp = grid.dq, grid.dp
    vals = h.values

    w = diff_q(vals, dq)                 # h_q, odd across the lateral lines
    wq = diff_q(w, dq, odd=True)
    wqq = diff_qq(w, dq, odd=True)
    wp = (w[2:] - w[:-2]) / (2.0 * dp)
    wpp = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (dp * dp)
    wp_full = np.empty_like(w)
    wp_full[1:-1] = wp
    wp_full[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dp)
    wp_full[-1] = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dp)
    wqp = diff_q(wp_full, dq, odd=False)[1:-1]  # w_p is even in q

    hq = w[1:-1]
    hp = (vals[2:] - vals[:-2]) / (2.0 * dp)
    hpp = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / (dp * dp)
    hqp = wp  # d(h_q)/dp equals d(h_p)/dq for smooth grids
    gam = np.asarray(h.vorticity.gamma_at_p(grid.p[1:-1]))[:, None]

    return (
        (1.0 + hq**2) * wpp
        - 2.0 * hq * hp * wqp
        + hp**2 * wqq[1:-1]
        + 2.0 * hq * hpp * wq[1:-1]
        - (3.0 * gam * hp**2 + 2.0 * hq * hqp) * wp
    )


def _observed_order(coarse: float, fine: float, floor: float = 1e-13) -> float:
    if coarse <= floor and fine <= floor:
        return np.inf
    if fine <= 0.0:
        return np.inf
    return float(np.log2(coarse / fine))


def check_hq_elliptic_residual(
    h: HeightField, refined: HeightField | None = None
) -> PropertyVerdict:
    """Interior residual of the differentiated equation, required to shrink
    at observed order >= 1 when a once-refined twin is supplied."""
    res = float(np.max(np.abs(hq_elliptic_residual(h))))
    scale = max(float(np.max(np.abs(h.h_q()))), 1e-300)
    details = {"residual": res, "hq_scale": scale}
    if refined is None:
        # without a refinement pair only the magnitude can be reported
        details["note"] = "no refined twin; order not checked"
        return PropertyVerdict(
            name="hq_elliptic",
            status="pass",
            worst_violation=res,
            tolerance=None,
            sample_count=(h.grid.n_p - 2) * h.grid.n_q,
            details=details,
        )
    res_fine = float(np.max(np.abs(hq_elliptic_residual(refined))))
    floor = 1e-12 * max(scale, 1.0)
    order = _observed_order(res, res_fine, floor=floor)
    details.update({"residual_refined": res_fine, "observed_order": order})
    ok = order >= 1.0
    return PropertyVerdict(
        name="hq_elliptic",
        status="pass" if ok else "fail",
        worst_violation=res_fine,
        tolerance=res / 2.0 if np.isfinite(res) else None,
        locations=() if ok else (_loc(0.0, 0.0),),
        sample_count=(h.grid.n_p - 2) * h.grid.n_q,
        details=details,
    )


# -- Laplacian identity on a Cartesian subgrid ----------------------------------------


def _cartesian_subgrid(vf: VelocityField, margin_cells: int = 2):
    """Resample v and the flux level onto a uniform Cartesian grid strictly
    inside the fluid region, margin_cells grid cells away from every
    boundary."""
    grid = vf.grid
    d = vf.depth
    h_vals = vf.source.values
    sp_h = RectBivariateSpline(grid.p, grid.q, h_vals, kx=3, ky=3)
    # the surface row of v carries a one-sided-stencil error with a different
    # constant than the interior; the subgrid stays below it, so drop it from
    # the interpolant to keep the data spline-smooth
    sp_v = RectBivariateSpline(grid.p[:-1], grid.q, vf.v[:-1], kx=3, ky=3)

    eta_min = float(np.min(vf.surface_y))
    dy_ref = (eta_min + d) / (grid.n_p - 1)
    mx = margin_cells * grid.dq
    my = margin_cells * dy_ref
    x_lo, x_hi = mx, np.pi - mx
    y_lo, y_hi = -d + my, eta_min - my
    if y_hi - y_lo < 4.0 * dy_ref or x_hi - x_lo < 4.0 * grid.dq:
        raise ThinDomainError(
            "fluid region too thin for the requested interior margin"
        )
    xs = np.linspace(x_lo, x_hi, grid.n_q)
    ys = np.linspace(y_lo, y_hi, grid.n_p)

    p_dense = np.linspace(grid.p0, 0.0, 4 * grid.n_p)
    v_sub = np.empty((ys.size, xs.size))
    p_sub = np.empty_like(v_sub)
    for k, xk in enumerate(xs):
        y_dense = sp_h(p_dense, xk).ravel() - d
        p_star = np.interp(ys, y_dense, p_dense)
        for _ in range(2):  # Newton polish of the level inversion
            f = sp_h.ev(p_star, np.full_like(p_star, xk)) - d - ys
            fp = sp_h.ev(p_star, np.full_like(p_star, xk), dx=1)
            p_star = p_star - f / fp
        p_sub[:, k] = p_star
        v_sub[:, k] = sp_v.ev(p_star, np.full_like(p_star, xk))
    return xs, ys, v_sub, p_sub


def _laplacian_misfit(vf: VelocityField, spec: VorticitySpec, margin_cells: int = 2) -> float:
    xs, ys, v_sub, p_sub = _cartesian_subgrid(vf, margin_cells)
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    lap = (
        (v_sub[1:-1, 2:] - 2.0 * v_sub[1:-1, 1:-1] + v_sub[1:-1, :-2]) / dx**2
        + (v_sub[2:, 1:-1] - 2.0 * v_sub[1:-1, 1:-1] + v_sub[:-2, 1:-1]) / dy**2
    )
    psi_inner = np.clip(-p_sub[1:-1, 1:-1], 0.0, -vf.grid.p0)
    gp = np.asarray(spec.gamma_prime(psi_inner))
    return float(np.max(np.abs(lap - gp * v_sub[1:-1, 1:-1])))


def laplacian_scale(vf: VelocityField) -> float:
    """Eigenvalue-sized curvature scale 1 + pi^2 / (surface height)^2."""
    top = float(np.max(vf.source.surface))
    return 1.0 + np.pi**2 / top**2


def check_laplacian_identity(
    vf: VelocityField,
    spec: VorticitySpec,
    refined: VelocityField | None = None,
    margin_cells: int = 2,
) -> PropertyVerdict:
    """The Laplacian of v must equal gamma'(psi) v.

    v is resampled on a Cartesian subgrid two cells inside every boundary;
    the misfit must fall below 1e-3 * max|v| * eigenvalue-scale on the
    finest grid and, when a refined twin is supplied, shrink at observed
    order >= 1.
    """
    if float(np.max(np.abs(vf.v))) <= 1e-300:
        return PropertyVerdict(
            name="laplacian_identity",
            status="pass",
            worst_violation=0.0,
            tolerance=0.0,
            details={"reason": "v is identically zero"},
        )
    mis_c = _laplacian_misfit(vf, spec, margin_cells)
    target = vf if refined is None else refined
    threshold = 1e-3 * float(np.max(np.abs(target.v))) * laplacian_scale(target)
    details = {"misfit": mis_c, "threshold": threshold}
    if refined is None:
        ok = mis_c <= threshold
        return PropertyVerdict(
            name="laplacian_identity",
            status="pass" if ok else "fail",
            worst_violation=mis_c,
            tolerance=threshold,
            locations=() if ok else (_loc(0.0, 0.0),),
            details=details,
        )
    mis_f = _laplacian_misfit(refined, spec, margin_cells)
    vscale = float(np.max(np.abs(vf.v)))
    order = _observed_order(mis_c, mis_f, floor=1e-12 * vscale)
    details.update({"misfit_refined": mis_f, "observed_order": order})
    ok = order >= 1.0 and mis_f <= threshold
    return PropertyVerdict(
        name="laplacian_identity",
        status="pass" if ok else "fail",
        worst_violation=mis_f,
        tolerance=threshold,
        locations=() if ok else (_loc(0.0, 0.0),),
        details=details,
    )


# -- first Dirichlet eigenvalue --------------------------------------------------------


def first_dirichlet_eigenvalue(
    h: HeightField, compute_discrete: bool = True
) -> EigenvalueBound:
    """Certified lower bound and a sharper discrete estimate of the first
    Dirichlet eigenvalue of the fluid domain.

    The bounding rectangle (0, pi) x (bed, highest surface point) contains
    the fluid region, and Dirichlet eigenvalues shrink as domains grow, so
    its closed-form eigenvalue 1 + pi^2 / (d + eta_max)^2 is a true lower
    bound.  The discrete estimate applies inverse power iteration to the
    transformed Laplacian on the mapped grid (advisory, not certified).
    """
    top = float(np.max(h.surface))
    rectangle = 1.0 + np.pi**2 / top**2
    if not compute_discrete:
        return EigenvalueBound(rectangle, None, 0)

    vf = velocity_from_height(h)
    grid = h.grid
    dq, dp = grid.dq, grid.dp
    A = vf.h_q / vf.h_p
    B = 1.0 / vf.h_p
    A_q = diff_q(A, dq, odd=True)
    A_p = diff_p(A, dp)
    B_p = diff_p(B, dp)
    C = A * A_p - A_q + B * B_p
    App = A**2 + B**2

    nj, ni = grid.n_p - 2, grid.n_q - 2

    def idx(j, i):
        return (j - 1) * ni + (i - 1)

    jj, ii = np.meshgrid(np.arange(1, grid.n_p - 1), np.arange(1, grid.n_q - 1), indexing="ij")
    rows, cols, vals = [], [], []

    def add(dj, di, coef):
        tj, ti = jj + dj, ii + di
        keep = (tj >= 1) & (tj <= grid.n_p - 2) & (ti >= 1) & (ti <= grid.n_q - 2)
        rows.append(idx(jj, ii)[keep])
        cols.append(idx(tj, ti)[keep])
        vals.append(np.broadcast_to(coef, jj.shape)[keep])

    Ai = A[1:-1, 1:-1]
    Ci = C[1:-1, 1:-1]
    Pi = App[1:-1, 1:-1]
    add(0, 0, -2.0 / dq**2 - 2.0 * Pi / dp**2)
    add(0, 1, 1.0 / dq**2 * np.ones_like(Ai))
    add(0, -1, 1.0 / dq**2 * np.ones_like(Ai))
    add(1, 0, Pi / dp**2 + Ci / (2.0 * dp))
    add(-1, 0, Pi / dp**2 - Ci / (2.0 * dp))
    add(1, 1, -2.0 * Ai / (4.0 * dq * dp))
    add(-1, -1, -2.0 * Ai / (4.0 * dq * dp))
    add(1, -1, 2.0 * Ai / (4.0 * dq * dp))
    add(-1, 1, 2.0 * Ai / (4.0 * dq * dp))

    lap = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nj * ni, nj * ni),
    ).tocsc()
    M = -lap
    lu = spla.splu(M)

    x = (
        np.sin(np.pi * np.arange(1, grid.n_p - 1) / (grid.n_p - 1))[:, None]
        * np.sin(np.pi * np.arange(1, grid.n_q - 1) / (grid.n_q - 1))[None, :]
    ).ravel()
    x /= np.linalg.norm(x)
    lam_prev = np.inf
    iterations = 0
    for iterations in range(1, 201):
        y = lu.solve(x)
        y /= np.linalg.norm(y)
        lam = float(y @ (M @ y))
        if abs(lam - lam_prev) <= 1e-12 * abs(lam):
            x = y
            break
        x, lam_prev = y, lam
    return EigenvalueBound(rectangle, lam, iterations)


# -- jacobian spot check ----------------------------------------------------------------


def jacobian_spot_check(h: HeightField, seed: int = 0, directions: int = 5) -> PropertyVerdict:
    """Analytic Jacobian against central finite differences on seeded
    random directions."""
    rng = np.random.default_rng(seed)
    J = assemble_jacobian(h)
    worst = 0.0
    eps = 1e-6
    for _ in range(directions):
        direction = rng.standard_normal(h.values.shape)
        direction[0] = 0.0
        fp = assemble_residual(h.with_values(h.values + eps * direction), check_stagnation=False)
        fm = assemble_residual(h.with_values(h.values - eps * direction), check_stagnation=False)
        fd = (fp - fm).ravel() / (2.0 * eps)
        jv = J @ direction.ravel()
        scale = float(np.max(np.abs(jv))) + 1e-30
        worst = max(worst, float(np.max(np.abs(jv - fd))) / scale)
    ok = worst <= 1e-6
    return PropertyVerdict(
        name="jacobian_consistency",
        status="pass" if ok else "fail",
        worst_violation=worst,
        tolerance=1e-6,
        locations=() if ok else (_loc(0.0, 0.0),),
        sample_count=directions,
        details={"seed": seed},
    )


# -- battery and report -------------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisReport:
    params: dict
    vorticity: dict
    grid: dict
    amplitude: float
    depth: float
    verdicts: tuple[PropertyVerdict, ...]
    inflections: tuple[InflectionSet, ...]
    displacement: DisplacementProfile | None
    eigenvalue: EigenvalueBound | None

    @property
    def failures(self) -> list[PropertyVerdict]:
        return [v for v in self.verdicts if v.status == "fail"]

    @property
    def all_applicable_pass(self) -> bool:
        return not self.failures

    def verdict(self, name: str) -> PropertyVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "params": self.params,
            "vorticity": self.vorticity,
            "grid": self.grid,
            "amplitude": self.amplitude,
            "depth": self.depth,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "inflections": [s.as_dict() for s in self.inflections],
            "displacement": None if self.displacement is None else self.displacement.as_dict(),
            "eigenvalue": None if self.eigenvalue is None else self.eigenvalue.as_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def render_report_text(report: AnalysisReport) -> str:
    lines = []
    lines.append(
        f"wave analysis: amplitude={report.amplitude:.6g} depth={report.depth:.6g} "
        f"vorticity={report.vorticity['kind']} (gamma0={report.vorticity['gamma0']}, "
        f"beta={report.vorticity['beta']}) grid={report.grid['n_q']}x{report.grid['n_p']}"
    )
    lines.append("-" * 78)
    for v in report.verdicts:
        worst = "" if v.worst_violation is None else f" worst={v.worst_violation:.3e}"
        tol = "" if v.tolerance is None else f" tol={v.tolerance:.3e}"
        loc = ""
        if v.locations:
            l0 = v.locations[0]
            loc = f" at (q={l0['q']:.4f}, p={l0['p']:.4f})"
        lines.append(f"{v.name:28s} {v.status:15s}{worst}{tol}{loc}")
    if report.eigenvalue is not None:
        ev = report.eigenvalue
        est = "n/a" if ev.discrete_estimate is None else f"{ev.discrete_estimate:.6f}"
        lines.append("-" * 78)
        lines.append(
            f"first Dirichlet eigenvalue: certified lower bound {ev.rectangle_bound:.6f}, "
            f"discrete estimate {est}"
        )
    n_fail = len(report.failures)
    lines.append("-" * 78)
    lines.append("RESULT: " + ("all applicable checks pass" if n_fail == 0 else f"{n_fail} check(s) FAILED"))
    return "\n".join(lines) + "\n"


def refined_twin(h: HeightField) -> HeightField:
    """Solve the same wave on a once-refined grid, starting from a bicubic
    interpolant of the coarse solution (laminar members are re-solved
    directly)."""
    from . import laminar

    grid2 = h.grid.refined(2)
    if h.amplitude <= LAMINAR_AMPLITUDE_FLOOR * max(h.depth_reference, 1e-6):
        prof = laminar.solve_laminar(h.vorticity, h.params, h.params.head, n_p=grid2.n_p)
        return laminar.broadcast_profile(prof, grid2, h.params, h.vorticity)
    spline = RectBivariateSpline(h.grid.p, h.grid.q, h.values, kx=3, ky=3)
    vals2 = spline(grid2.p, grid2.q)
    vals2[0] = 0.0
    start = HeightField(grid2, vals2, h.params, h.vorticity)
    return newton_solve(start, AmplitudePin(h.amplitude)).field


def run_battery(
    h: HeightField,
    refined: HeightField | None = None,
    solve_refined: bool = True,
    seed: int = 0,
) -> AnalysisReport:
    """Run every check on a height field and assemble the report.

    The refinement-based identities need a once-refined twin; it is solved
    on demand unless one is supplied or solve_refined is False.
    """
    grid = h.grid
    depth = h.depth_reference
    laminar_mode = h.amplitude <= LAMINAR_AMPLITUDE_FLOOR * max(depth, 1e-6)
    verdicts: list[PropertyVerdict] = []

    violations = h.invariant_violations()
    verdicts.append(
        PropertyVerdict(
            name="structural_invariants",
            status="pass" if not violations else "fail",
            worst_violation=float(len(violations)),
            tolerance=0.0,
            locations=() if not violations else (_loc(0.0, 0.0),),
            details={"violations": violations},
        )
    )
    if violations:
        return _report_from(h, verdicts, (), None, None)

    if refined is None and solve_refined:
        refined = refined_twin(h)

    vf = velocity_from_height(h)
    vf_ref = None if refined is None else velocity_from_height(refined)

    verdicts.append(jacobian_spot_check(h, seed=seed))

    # exact antisymmetry at the crest and trough lines
    lateral = max(float(np.max(np.abs(vf.v[:, 0]))), float(np.max(np.abs(vf.v[:, -1]))))
    verdicts.append(
        PropertyVerdict(
            name="lateral_antisymmetry",
            status="pass" if lateral == 0.0 else "fail",
            worst_violation=lateral,
            tolerance=0.0,
            locations=() if lateral == 0.0 else (_loc(0.0, grid.p0),),
            sample_count=2 * grid.n_p,
        )
    )

    kin = surface_kinematic_residual(vf)
    kin_tol = 10.0 * (1e-10 + max(grid.dq, grid.dp) ** 2)
    kin_worst = float(np.max(np.abs(kin)))
    verdicts.append(
        PropertyVerdict(
            name="surface_kinematic",
            status="pass" if kin_worst <= kin_tol else "fail",
            worst_violation=kin_worst,
            tolerance=kin_tol,
            locations=() if kin_worst <= kin_tol else (_loc(grid.q[int(np.argmax(np.abs(kin)))], 0.0),),
            sample_count=grid.n_q,
        )
    )

    # refinement-backed identity checks
    int_slice = (slice(2, -2), slice(1, -1))

    def interior_max(a):
        return float(np.max(np.abs(a[int_slice])))

    div_c = interior_max(divergence_residual(vf))
    vort_c = interior_max(vorticity_mismatch(vf))
    streamlines = all_streamlines(vf)
    bridge_c = max(
        float(np.max(np.abs(bridge_identity_residual(s)))) for s in streamlines[1:]
    )
    bern_c = max(
        bernoulli_head(s, h.vorticity, h.params).deviation for s in streamlines
    )
    id_scale = max(float(np.max(np.abs(vf.v))), 1e-300)

    if vf_ref is not None:
        div_f = interior_max(divergence_residual(vf_ref))
        vort_f = interior_max(vorticity_mismatch(vf_ref))
        ref_lines = all_streamlines(vf_ref)
        bridge_f = max(
            float(np.max(np.abs(bridge_identity_residual(s)))) for s in ref_lines[1:]
        )
        bern_f = max(
            bernoulli_head(s, refined.vorticity, refined.params).deviation for s in ref_lines
        )
        for name, coarse, fine, floor in (
            ("divergence", div_c, div_f, 1e-12 * id_scale),
            ("vorticity_consistency", vort_c, vort_f, 1e-12),
            ("bridge_identity", bridge_c, bridge_f, 1e-13 * id_scale),
            ("bernoulli_constancy", bern_c, bern_f, 1e-12),
        ):
            order = _observed_order(coarse, fine, floor=floor)
            ok = order >= 1.0
            verdicts.append(
                PropertyVerdict(
                    name=name,
                    status="pass" if ok else "fail",
                    worst_violation=fine,
                    tolerance=coarse / 2.0 if coarse > 0 else None,
                    locations=() if ok else (_loc(0.0, 0.0),),
                    details={"coarse": coarse, "refined": fine, "observed_order": order},
                )
            )
    else:
        for name, value in (
            ("divergence", div_c),
            ("vorticity_consistency", vort_c),
            ("bridge_identity", bridge_c),
            ("bernoulli_constancy", bern_c),
        ):
            verdicts.append(
                PropertyVerdict(name=name, status="pass", worst_violation=value, details={"coarse": value})
            )

    verdicts.append(
        check_hq_elliptic_residual(h, refined)
    )
    try:
        verdicts.append(check_laplacian_identity(vf, h.vorticity, vf_ref))
    except ThinDomainError as exc:
        verdicts.append(
            PropertyVerdict(
                name="laplacian_identity",
                status="not-applicable",
                details={"reason": str(exc)},
            )
        )

    eig = first_dirichlet_eigenvalue(h)
    admissibility = check_decreasing_vorticity_admissible(h.vorticity, eig.rectangle_bound)
    # a violated bound only withdraws the maximum-location theorem; the run
    # itself is not at fault, so it never counts as a failure
    verdicts.append(
        PropertyVerdict(
            name="decreasing_vorticity_admissible",
            status="pass" if admissibility == "pass" else "not-applicable",
            details={
                "admissibility": admissibility,
                "bound": eig.rectangle_bound,
                "gamma_prime": h.vorticity.beta,
            },
        )
    )

    inflections: list[InflectionSet] = []
    displacement = None
    if laminar_mode:
        verdicts.append(
            PropertyVerdict(
                name="v_positive", status="not-applicable", details={"reason": "laminar flow"}
            )
        )
        for name in ("inflection_parity", "curvature_monotonicity", "rise_then_fall", "max_v_location"):
            verdicts.append(
                PropertyVerdict(name=name, status="not-applicable", details={"reason": "laminar flow"})
            )
        verdicts.append(check_u_decreasing_along_streamlines(vf, h.vorticity))
        displacement, _ = displacement_profile(h)
        verdicts.append(
            PropertyVerdict(
                name="displacement_monotone",
                status="not-applicable",
                details={"reason": "laminar flow"},
            )
        )
    else:
        verdicts.append(check_v_positive(vf))

        above_bed = streamlines[1:]
        parity_fail = None
        curvature_verdicts = []
        rise_verdicts = []
        surface_infl = None
        for s in above_bed:
            try:
                infl = find_inflection_points(s, depth_scale=depth)
            except DegenerateStreamlineError:
                parity_fail = (s.p_level, "degenerate curvature")
                continue
            inflections.append(infl)
            if s.row == grid.n_p - 1:
                surface_infl = infl
            if infl.count % 2 == 0 or infl.count < 1:
                parity_fail = (s.p_level, f"count {infl.count}")
            curvature_verdicts.append(check_curvature_monotonicity_law(s))
            rise_verdicts.append(check_rise_then_fall(s, infl))

        verdicts.append(
            PropertyVerdict(
                name="inflection_parity",
                status="pass" if parity_fail is None else "fail",
                worst_violation=None if parity_fail is None else 1.0,
                tolerance=None,
                locations=() if parity_fail is None else (_loc(0.0, parity_fail[0]),),
                sample_count=len(inflections),
                details={} if parity_fail is None else {"reason": parity_fail[1]},
            )
        )
        verdicts.append(_worst_of("curvature_monotonicity", curvature_verdicts))
        verdicts.append(_worst_of("rise_then_fall", rise_verdicts))

        if surface_infl is None:
            verdicts.append(
                PropertyVerdict(
                    name="max_v_location",
                    status="not-applicable",
                    details={"reason": "no surface inflection set"},
                )
            )
        else:
            verdicts.append(locate_max_v(vf, surface_infl, h.vorticity, admissibility))

        verdicts.append(check_u_decreasing_along_streamlines(vf, h.vorticity))
        displacement, disp_verdict = displacement_profile(h)
        verdicts.append(disp_verdict)

    return _report_from(h, verdicts, tuple(inflections), displacement, eig)


def _worst_of(name: str, parts: list[PropertyVerdict]) -> PropertyVerdict:
    """Aggregate per-streamline verdicts into one (worst status wins)."""
    if not parts:
        return PropertyVerdict(name=name, status="not-applicable", details={"reason": "no streamlines"})
    fails = [p for p in parts if p.status == "fail"]
    if fails:
        worst = max(fails, key=lambda p: (p.worst_violation or 0.0))
        return PropertyVerdict(
            name=name,
            status="fail",
            worst_violation=worst.worst_violation,
            tolerance=worst.tolerance,
            locations=worst.locations,
            sample_count=sum(p.sample_count for p in parts),
            details={"failing_streamlines": len(fails), "streamlines": len(parts)},
        )
    applicable = [p for p in parts if p.status == "pass"]
    if not applicable:
        return PropertyVerdict(name=name, status="not-applicable", details={"streamlines": len(parts)})
    worst = max(applicable, key=lambda p: (p.worst_violation or 0.0))
    return PropertyVerdict(
        name=name,
        status="pass",
        worst_violation=worst.worst_violation,
        tolerance=worst.tolerance,
        sample_count=sum(p.sample_count for p in parts),
        details={"streamlines": len(parts)},
    )


def _report_from(h, verdicts, inflections, displacement, eig) -> AnalysisReport:
    return AnalysisReport(
        params=h.params.as_dict(),
        vorticity=h.vorticity.as_dict(),
        grid=h.grid.as_dict(),
        amplitude=h.amplitude,
        depth=h.depth_reference,
        verdicts=tuple(verdicts),
        inflections=tuple(inflections),
        displacement=displacement,
        eigenvalue=eig,
    )
