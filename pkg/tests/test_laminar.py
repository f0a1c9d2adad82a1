import numpy as np
import pytest
from scipy.optimize import brentq

from steadywaves import vorticity as vort
from steadywaves.errors import NonMonotoneProfileError, NoRealSlopeError
from steadywaves.laminar import (
    bifurcation_head,
    broadcast_profile,
    closed_form_profile,
    rk4_profile,
    solve_laminar,
)
from steadywaves.solver import Grid, PhysicalParams, assemble_residual, unit_depth_flux

G = 9.81


def test_zero_vorticity_linear_profile():
    # with p0 = -1 and Q = 2g + 1 the exact member is h(p) = p + 1
    params = PhysicalParams(gravity=G, mass_flux=-1.0)
    prof = solve_laminar(vort.zero(), params, head=2 * G + 1.0, n_p=129)
    assert prof.surface_height == pytest.approx(1.0, abs=1e-12)
    assert prof.bottom_slope == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(prof.h - (prof.p + 1.0))) < 1e-12
    assert abs(prof.surface_condition_residual()) < 1e-12


def test_closed_form_vs_rk4_constant_vorticity():
    # slope (1 - 2(p+1))^(-1/2) stays real only below p = -0.5; stay a bit
    # shy of the blowup so the march can hold eight digits
    spec = vort.constant(1.0)
    p = np.linspace(-1.0, -0.52, 401)
    h_cf, hp_cf = closed_form_profile(spec, -1.0, 1.0, p)
    h_rk, hp_rk = rk4_profile(spec, -1.0, 1.0, p)
    assert np.max(np.abs(h_cf - h_rk)) < 1e-8
    assert np.max(np.abs(hp_cf - hp_rk)) < 1e-8
    assert hp_cf[0] == pytest.approx(1.0)
    assert hp_cf[-1] == pytest.approx((1.0 - 2.0 * (p[-1] + 1.0)) ** -0.5)


def test_closed_form_blowup_raises():
    with pytest.raises(NonMonotoneProfileError):
        closed_form_profile(vort.constant(1.0), -1.0, 1.0, np.linspace(-1.0, 0.0, 11))


def test_affine_profile_satisfies_discrete_ode():
    params = PhysicalParams(gravity=G, mass_flux=unit_depth_flux(G))
    prof = solve_laminar(vort.affine(1.0, 0.0), params, head=29.0, n_p=129)
    dp = prof.p[1] - prof.p[0]
    hp_c = (prof.h[2:] - prof.h[:-2]) / (2 * dp)
    gam = prof.spec.gamma_at_p(prof.p[1:-1])
    residual = (prof.h[2:] - 2 * prof.h[1:-1] + prof.h[:-2]) / dp**2 - gam * hp_c**3
    assert np.max(np.abs(residual)) < 1e-10
    assert abs(prof.surface_condition_residual()) < 1e-10
    assert np.all(prof.hp > 0)
    assert np.all(np.diff(prof.h) > 0)
    assert prof.h[0] == 0.0


def test_no_real_slope_for_small_head():
    params = PhysicalParams(gravity=G, mass_flux=-1.0)
    with pytest.raises(NoRealSlopeError):
        solve_laminar(vort.zero(), params, head=1e-4, n_p=65)


def test_broadcast_profile_satisfies_2d_residual():
    params = PhysicalParams(gravity=G, mass_flux=unit_depth_flux(G))
    spec = vort.constant(0.3).bound_to_flux(params.mass_flux)
    bif = bifurcation_head(spec, params, n_p=65)
    grid = Grid(65, 65, params.mass_flux)
    from dataclasses import replace

    run_params = replace(params, head=bif.head, depth=bif.depth)
    field = broadcast_profile(bif.profile, grid, run_params, spec)
    residual = assemble_residual(field)
    assert np.max(np.abs(residual)) < 1e-10


def dispersion_root(gravity, mass_flux):
    """Independent oracle: bed slope of the bifurcating member solves
    g w^2 tanh(w |p0|) = 1 for a uniform irrotational stream."""
    return brentq(
        lambda w: gravity * w * w * np.tanh(w * (-mass_flux)) - 1.0,
        1e-3,
        10.0,
        xtol=1e-15,
    )


def test_bifurcation_reproduces_dispersion():
    params = PhysicalParams(gravity=G, mass_flux=unit_depth_flux(G))
    bif = bifurcation_head(vort.zero(), params, n_p=129)
    w_exact = dispersion_root(G, params.mass_flux)
    d_exact = w_exact * (-params.mass_flux)
    q_exact = 1.0 / w_exact**2 + 2 * G * d_exact
    assert bif.bottom_slope == pytest.approx(w_exact, rel=2e-7)
    assert bif.depth == pytest.approx(d_exact, rel=2e-7)
    assert bif.head == pytest.approx(q_exact, rel=2e-7)
    # unit-depth normalization puts the surface speed on g*tanh(1)
    assert bif.surface_speed**2 == pytest.approx(G * np.tanh(1.0), rel=1e-6)


def test_bifurcation_head_continuous_in_vorticity():
    params = PhysicalParams(gravity=G, mass_flux=unit_depth_flux(G))
    q_zero = bifurcation_head(vort.zero(), params, n_p=65).head
    gaps = []
    for gamma0 in (0.1, 0.01, 0.001):
        q_g = bifurcation_head(vort.constant(gamma0), params, n_p=65).head
        gaps.append(abs(q_g - q_zero))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


def test_bifurcation_head_gravity_scaling():
    # doubling g with p0 and gamma0 scaled by sqrt(2) doubles the head
    p0 = unit_depth_flux(G)
    base = bifurcation_head(vort.constant(0.2), PhysicalParams(gravity=G, mass_flux=p0), n_p=65)
    scaled = bifurcation_head(
        vort.constant(0.2 * np.sqrt(2.0)),
        PhysicalParams(gravity=2 * G, mass_flux=p0 * np.sqrt(2.0)),
        n_p=65,
    )
    assert scaled.head == pytest.approx(2.0 * base.head, rel=1e-8)
    assert scaled.depth == pytest.approx(base.depth, rel=1e-8)


def test_mode_is_surface_normalized():
    params = PhysicalParams(gravity=G, mass_flux=unit_depth_flux(G))
    bif = bifurcation_head(vort.zero(), params, n_p=65)
    assert bif.mode[-1] == pytest.approx(1.0)
    assert bif.mode[0] == pytest.approx(0.0, abs=1e-14)
    # irrotational transverse mode is sinh-shaped
    shape = np.sinh(bif.bottom_slope * (bif.p - bif.p[0]))
    shape /= shape[-1]
    assert np.max(np.abs(bif.mode - shape)) < 1e-3


def test_laminar_csv_export():
    params = PhysicalParams(gravity=G, mass_flux=-1.0)
    prof = solve_laminar(vort.zero(), params, head=2 * G + 1.0, n_p=65)
    csv = prof.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "p,h,h_p"
    assert len(lines) == 66
    p0, h0, hp0 = (float(tok) for tok in lines[1].split(","))
    assert (p0, h0) == (-1.0, 0.0)
