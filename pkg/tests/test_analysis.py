from dataclasses import replace

import numpy as np
import pytest

from steadywaves import vorticity as vort
from steadywaves import laminar
from steadywaves.analysis import (
    bridge_identity_residual,
    check_curvature_monotonicity_law,
    check_laplacian_identity,
    check_hq_elliptic_residual,
    check_rise_then_fall,
    check_u_decreasing_along_streamlines,
    check_v_positive,
    displacement_profile,
    find_inflection_points,
    first_dirichlet_eigenvalue,
    hq_elliptic_residual,
    locate_max_v,
    refined_twin,
    run_battery,
    render_report_text,
    _cartesian_subgrid,
)
from steadywaves.errors import DegenerateStreamlineError
from steadywaves.fields import (
    Streamline,
    VelocityField,
    all_streamlines,
    extract_streamline,
    oracle_height_field,
    velocity_from_height,
)
from steadywaves.solver import Grid, HeightField, PhysicalParams, continue_in_amplitude

G = 9.81


def flip_v(vf: VelocityField) -> VelocityField:
    return VelocityField(
        grid=vf.grid,
        params=vf.params,
        vorticity=vf.vorticity,
        depth=vf.depth,
        x=vf.x,
        y=vf.y,
        u_minus_c=vf.u_minus_c,
        v=-vf.v,
        h_q=vf.h_q,
        h_p=vf.h_p,
        psi=vf.psi,
        source=vf.source,
    )


def synthetic_streamline(x, y, v, u_minus_c=None):
    from steadywaves.fields import fourth_diff1, fourth_diff2

    dx = x[1] - x[0]
    if u_minus_c is None:
        u_minus_c = np.full_like(x, -2.0)
    y_xx = fourth_diff2(y, dx)
    return Streamline(
        p_level=-0.5,
        row=5,
        x=x,
        y=y,
        y_x=fourth_diff1(y, dx),
        y_xx=y_xx,
        curvature=y_xx,
        slope=fourth_diff1(y, dx),
        v=v,
        u_minus_c=u_minus_c,
        dvdx=fourth_diff1(v, dx),
        dudx=fourth_diff1(u_minus_c, dx),
        pressure=np.zeros_like(x),
        energy=np.zeros_like(x),
    )


# -- sign of v ---------------------------------------------------------------------


def test_v_positive_on_computed_wave(standard_wave):
    vf = velocity_from_height(standard_wave.members[-1].field)
    verdict = check_v_positive(vf)
    assert verdict.status == "pass"
    assert verdict.details["min_interior"] > 0.0


def test_v_positive_not_applicable_for_laminar(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    prof = laminar.solve_laminar(spec, params, head=28.0, n_p=33)
    grid = Grid(33, 33, params.mass_flux)
    run = replace(params, head=28.0, depth=prof.surface_height)
    vf = velocity_from_height(laminar.broadcast_profile(prof, grid, run, spec))
    assert check_v_positive(vf).status == "not-applicable"


def test_v_positive_rejects_sign_flip(standard_wave):
    vf = flip_v(velocity_from_height(standard_wave.members[-1].field))
    verdict = check_v_positive(vf)
    assert verdict.status == "fail"
    assert verdict.locations  # located violation
    assert verdict.worst_violation > 0.0


# -- inflections --------------------------------------------------------------------


def test_inflection_of_cosine_curve():
    x = np.linspace(0.0, np.pi, 129)
    sl = synthetic_streamline(x, np.cos(x), np.sin(x))
    infl = find_inflection_points(sl)
    assert infl.count == 1
    assert infl.positions[0] == pytest.approx(np.pi / 2, abs=1e-4)
    assert 0.0 < infl.positions[0] < np.pi


def test_inflection_degenerate_on_flat_curve():
    x = np.linspace(0.0, np.pi, 65)
    sl = synthetic_streamline(x, np.full_like(x, -1.0), np.zeros_like(x))
    with pytest.raises(DegenerateStreamlineError):
        find_inflection_points(sl)


def test_inflections_of_linear_wave_field(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    field = oracle_height_field(params, spec, Grid(65, 65, params.mass_flux), 1e-4)
    vf = velocity_from_height(field)
    for sl in all_streamlines(vf)[1:]:
        infl = find_inflection_points(sl, depth_scale=1.0)
        assert infl.count == 1
        assert infl.positions[0] == pytest.approx(np.pi / 2, abs=1e-3)


def test_inflection_parity_on_computed_wave(standard_wave):
    vf = velocity_from_height(standard_wave.members[-1].field)
    for sl in all_streamlines(vf)[1:]:
        infl = find_inflection_points(sl, depth_scale=vf.depth)
        assert infl.count % 2 == 1


# -- monotonicity laws ---------------------------------------------------------------


def test_curvature_law_on_computed_wave(standard_wave):
    vf = velocity_from_height(standard_wave.members[-1].field)
    for sl in all_streamlines(vf)[1:]:
        verdict = check_curvature_monotonicity_law(sl)
        assert verdict.status == "pass"
        assert verdict.details["mismatch_fraction"] == 0.0


def test_curvature_law_flags_wrong_sign():
    x = np.linspace(0.0, np.pi, 129)
    # convex curve with v increasing: violates the law everywhere
    sl = synthetic_streamline(x, 0.2 * (x - np.pi / 2) ** 2, np.linspace(0.0, 1.0, x.size))
    verdict = check_curvature_monotonicity_law(sl)
    assert verdict.status == "fail"
    assert verdict.locations


def test_rise_then_fall_on_linear_wave(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    field = oracle_height_field(params, spec, Grid(65, 65, params.mass_flux), 1e-4)
    vf = velocity_from_height(field)
    sl = extract_streamline(vf, vf.grid.p[40])
    infl = find_inflection_points(sl, depth_scale=1.0)
    verdict = check_rise_then_fall(sl, infl)
    assert verdict.status == "pass"


def test_rise_then_fall_rejects_double_bump():
    x = np.linspace(0.0, np.pi, 129)
    y = -0.4 + 0.01 * np.cos(x)
    v = np.sin(x) * (1.0 + 0.8 * np.cos(2 * x))  # two humps, still zero at the ends
    sl = synthetic_streamline(x, y, v)
    infl = find_inflection_points(sl)
    verdict = check_rise_then_fall(sl, infl)
    assert verdict.status == "fail"
    assert verdict.locations


def test_bridge_identity_refines(standard_wave, standard_wave_fine):
    worst = []
    for trace in (standard_wave, standard_wave_fine):
        vf = velocity_from_height(trace.members[-1].field)
        worst.append(
            max(float(np.max(np.abs(bridge_identity_residual(s)))) for s in all_streamlines(vf)[1:])
        )
    assert np.log2(worst[0] / worst[1]) >= 1.5


# -- maximum of v ----------------------------------------------------------------------


def test_max_v_on_linear_wave(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    field = oracle_height_field(params, spec, Grid(65, 65, params.mass_flux), 1e-4)
    vf = velocity_from_height(field)
    surf = extract_streamline(vf, 0.0)
    infl = find_inflection_points(surf, depth_scale=1.0)
    verdict = locate_max_v(vf, infl, spec, admissibility="not-applicable")
    assert verdict.status == "pass"
    assert verdict.details["argmax"]["p"] == 0.0
    assert abs(verdict.details["argmax"]["q"] - np.pi / 2) <= vf.grid.dq
    assert verdict.details["min_interior_v_y"] > 0.0


def test_max_v_gating(standard_wave):
    vf = velocity_from_height(standard_wave.members[-1].field)
    surf = extract_streamline(vf, 0.0)
    infl = find_inflection_points(surf, depth_scale=vf.depth)
    blocked = locate_max_v(vf, infl, vort.affine(-1.0, 0.0), admissibility="fail")
    assert blocked.status == "not-applicable"
    two = replace(infl, positions=(1.0, 2.0), count=2)
    gated = locate_max_v(vf, two, vf.vorticity, admissibility="not-applicable")
    assert gated.status == "not-applicable"


# -- differential identities -------------------------------------------------------------


def test_laplacian_identity_harmonic_cases(standard_wave, standard_wave_fine):
    vf = velocity_from_height(standard_wave.members[-1].field)
    vf_fine = velocity_from_height(standard_wave_fine.members[-1].field)
    verdict = check_laplacian_identity(vf, vf.vorticity, vf_fine)
    assert verdict.status == "pass"
    assert verdict.details["observed_order"] >= 1.0


def test_laplacian_ratio_for_affine_vorticity(params):
    spec = vort.affine(1.0, 0.1).bound_to_flux(params.mass_flux)
    trace = continue_in_amplitude(spec, params, (97, 97), target_amplitude=0.05, steps=5)
    vf = velocity_from_height(trace.members[-1].field)
    xs, ys, v_sub, p_sub = _cartesian_subgrid(vf)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    lap = (
        (v_sub[1:-1, 2:] - 2 * v_sub[1:-1, 1:-1] + v_sub[1:-1, :-2]) / dx**2
        + (v_sub[2:, 1:-1] - 2 * v_sub[1:-1, 1:-1] + v_sub[:-2, 1:-1]) / dy**2
    )
    v_in = v_sub[1:-1, 1:-1]
    mask = np.abs(v_in) > 0.3 * np.max(np.abs(v_in))
    ratio = lap[mask] / v_in[mask]
    # gamma' = beta = 1
    assert np.median(ratio) == pytest.approx(1.0, abs=0.05)


def test_hq_elliptic_laminar_identically_zero(params):
    spec = vort.constant(0.3).bound_to_flux(params.mass_flux)
    prof = laminar.solve_laminar(spec, params, head=27.0, n_p=33)
    grid = Grid(33, 33, params.mass_flux)
    run = replace(params, head=27.0, depth=prof.surface_height)
    field = laminar.broadcast_profile(prof, grid, run, spec)
    assert np.max(np.abs(hq_elliptic_residual(field))) == 0.0


def test_hq_elliptic_refines_on_wave(standard_wave, standard_wave_fine):
    verdict = check_hq_elliptic_residual(
        standard_wave.members[-1].field, standard_wave_fine.members[-1].field
    )
    assert verdict.status == "pass"
    assert verdict.details["observed_order"] >= 1.0


def non_solution_field(n, params):
    grid = Grid(n, n, params.mass_flux)
    qq, pp = np.meshgrid(grid.q, grid.p)
    s = pp - grid.p0
    values = 0.4 * s * (1.0 - 0.05 * np.cos(qq) * s)
    run = replace(params, head=30.0, depth=0.4 * (-params.mass_flux))
    return HeightField(grid, values, run, vort.zero().bound_to_flux(params.mass_flux))


def test_hq_elliptic_rejects_non_solution(params):
    verdict = check_hq_elliptic_residual(
        non_solution_field(33, params), non_solution_field(65, params)
    )
    assert verdict.status == "fail"
    assert verdict.details["observed_order"] < 1.0
    # the residual is order one, not truncation-sized
    assert verdict.details["residual"] > 1e-2


# -- eigenvalue --------------------------------------------------------------------------


def flat_field(surface_height, params, n=33):
    grid = Grid(n, n, params.mass_flux)
    values = np.repeat(
        (surface_height * (grid.p - grid.p0) / (-grid.p0))[:, None], n, axis=1
    )
    run = replace(params, head=1.0 + 2 * G * surface_height, depth=surface_height)
    return HeightField(grid, values, run, vort.zero())


def test_rectangle_bound_closed_form(params):
    bound1 = first_dirichlet_eigenvalue(flat_field(1.0, params), compute_discrete=False)
    assert bound1.rectangle_bound == 1.0 + np.pi**2
    bound2 = first_dirichlet_eigenvalue(flat_field(2.0, params), compute_discrete=False)
    assert bound2.rectangle_bound == 1.0 + np.pi**2 / 4.0


def test_discrete_eigenvalue_on_laminar_rectangle(params):
    field = flat_field(1.0, params, n=65)
    eig = first_dirichlet_eigenvalue(field)
    # the discrete estimate sits O(dp^2) below the continuum value, so it is
    # advisory only; the rectangle closed form is the certified bound
    assert eig.discrete_estimate == pytest.approx(1.0 + np.pi**2, rel=5e-4)


# -- horizontal velocity and displacement --------------------------------------------------


def test_u_decreasing_on_irrotational_wave(standard_wave):
    vf = velocity_from_height(standard_wave.members[-1].field)
    verdict = check_u_decreasing_along_streamlines(vf, vf.vorticity)
    assert verdict.status == "pass"


def test_u_decreasing_not_applicable_for_negative_vorticity(params):
    spec = vort.constant(-0.5).bound_to_flux(params.mass_flux)
    trace = continue_in_amplitude(spec, params, (33, 33), target_amplitude=0.01, steps=1)
    vf = velocity_from_height(trace.members[-1].field)
    assert check_u_decreasing_along_streamlines(vf, spec).status == "not-applicable"


def test_displacement_profile_linear_wave(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    a = 1e-4
    field = oracle_height_field(params, spec, Grid(65, 65, params.mass_flux), a)
    profile, verdict = displacement_profile(field)
    assert verdict.status == "pass"
    assert profile.displacement[0] == 0.0
    c0 = np.sqrt(G * np.tanh(1.0))
    expected = 2 * a * np.sinh((profile.p_levels - params.mass_flux) / c0) / np.sinh(1.0)
    assert np.max(np.abs(profile.displacement - expected)) < 1e-3 * a
    assert np.all(np.diff(profile.displacement) >= 0.0)


def test_displacement_fail_is_located(standard_wave):
    field = standard_wave.members[-1].field
    broken = field.with_values(np.ascontiguousarray(field.values[:, ::-1]))
    _, verdict = displacement_profile(broken)
    assert verdict.status == "fail"
    assert verdict.locations


# -- battery ------------------------------------------------------------------------------


def test_battery_on_standard_wave_passes(standard_wave):
    report = run_battery(standard_wave.members[-1].field, seed=11)
    assert report.all_applicable_pass
    names = [v.name for v in report.verdicts]
    for required in (
        "structural_invariants",
        "jacobian_consistency",
        "lateral_antisymmetry",
        "surface_kinematic",
        "divergence",
        "vorticity_consistency",
        "bridge_identity",
        "bernoulli_constancy",
        "hq_elliptic",
        "laplacian_identity",
        "v_positive",
        "inflection_parity",
        "curvature_monotonicity",
        "rise_then_fall",
        "max_v_location",
        "u_decreasing",
        "displacement_monotone",
    ):
        assert required in names
    assert report.eigenvalue is not None
    assert report.eigenvalue.discrete_estimate == pytest.approx(
        report.eigenvalue.rectangle_bound, rel=0.1
    )
    text = render_report_text(report)
    assert "all applicable checks pass" in text


def test_battery_flags_corrupted_field(standard_wave):
    field = standard_wave.members[-1].field
    corrupted = field.with_values(field.values + 1e-3 * np.sin(7 * field.grid.q)[None, :])
    report = run_battery(corrupted, solve_refined=False)
    assert not report.all_applicable_pass
    assert report.verdict("structural_invariants").status == "fail"


def test_battery_laminar_marks_wave_checks_not_applicable(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    prof = laminar.solve_laminar(spec, params, head=28.0, n_p=33)
    grid = Grid(33, 33, params.mass_flux)
    run = replace(params, head=28.0, depth=prof.surface_height)
    field = laminar.broadcast_profile(prof, grid, run, spec)
    report = run_battery(field, seed=0)
    assert report.all_applicable_pass
    for name in ("v_positive", "inflection_parity", "curvature_monotonicity",
                 "rise_then_fall", "max_v_location", "displacement_monotone"):
        assert report.verdict(name).status == "not-applicable"
    for name in ("divergence", "bernoulli_constancy", "hq_elliptic", "laplacian_identity"):
        assert report.verdict(name).status == "pass"


def test_battery_deterministic(standard_wave):
    field = standard_wave.members[0].field
    a = run_battery(field, seed=5).to_json()
    b = run_battery(field, seed=5).to_json()
    assert a == b


def test_refined_twin_matches_amplitude(standard_wave):
    field = standard_wave.members[0].field
    twin = refined_twin(field)
    assert twin.grid.n_q == 2 * (field.grid.n_q - 1) + 1
    assert abs(twin.amplitude - field.amplitude) < 1e-12
