from dataclasses import replace

import numpy as np
import pytest

from steadywaves import vorticity as vort
from steadywaves import laminar
from steadywaves.errors import StagnationError
from steadywaves.fields import (
    all_streamlines,
    bernoulli_head,
    divergence_residual,
    euler_residual,
    export_field_csv,
    extract_streamline,
    fourth_diff1,
    fourth_diff2,
    linear_wave_oracle,
    oracle_height_field,
    pressure_from_bernoulli,
    surface_kinematic_residual,
    velocity_from_height,
    vorticity_mismatch,
)
from steadywaves.solver import Grid, HeightField, PhysicalParams, unit_depth_flux

G = 9.81


def test_fourth_order_stencils_converge():
    errs1, errs2 = [], []
    for n in (33, 65):
        x = np.linspace(0.0, np.pi, n)
        y = np.cos(x) + 0.3 * np.cos(2 * x)
        errs1.append(np.max(np.abs(fourth_diff1(y, x[1] - x[0]) - (-np.sin(x) - 0.6 * np.sin(2 * x)))))
        errs2.append(np.max(np.abs(fourth_diff2(y, x[1] - x[0]) - (-np.cos(x) - 1.2 * np.cos(2 * x)))))
    assert np.log2(errs1[0] / errs1[1]) >= 3.5
    assert np.log2(errs2[0] / errs2[1]) >= 3.5


def test_laminar_velocity_is_x_independent(params):
    spec = vort.constant(0.3).bound_to_flux(params.mass_flux)
    prof = laminar.solve_laminar(spec, params, head=27.0, n_p=65)
    grid = Grid(65, 65, params.mass_flux)
    run = replace(params, head=27.0, depth=prof.surface_height)
    field = laminar.broadcast_profile(prof, grid, run, spec)
    vf = velocity_from_height(field)
    assert np.max(np.abs(vf.v)) == 0.0
    assert np.max(np.abs(vf.u_minus_c - vf.u_minus_c[:, :1])) == 0.0
    assert np.max(np.abs(vf.u_minus_c[:, 0] + 1.0 / field.h_p()[:, 0])) == 0.0


def test_synthetic_uniform_slopes():
    # h with h_p = 2 and h_q = -1 everywhere gives u-c = -0.5, v = -(-1)/2
    grid = Grid(17, 17, -1.0)
    qq, pp = np.meshgrid(grid.q, grid.p)
    vals = 2.0 * (pp - grid.p0) - qq
    params = PhysicalParams(gravity=G, mass_flux=-1.0, head=10.0, depth=2.0)
    field = HeightField(grid, vals, params, vort.zero())
    vf = velocity_from_height(field)
    inner = (slice(1, -1), slice(1, -1))
    assert np.max(np.abs(vf.u_minus_c[inner] + 0.5)) < 1e-12
    assert np.max(np.abs(vf.v[inner] - 0.5)) < 1e-12


def test_stagnation_guard_in_reconstruction():
    grid = Grid(17, 17, -1.0)
    vals = np.zeros((17, 17))
    params = PhysicalParams(gravity=G, mass_flux=-1.0, head=10.0, depth=1.0)
    field = HeightField(grid, vals, params, vort.zero())
    with pytest.raises(StagnationError):
        velocity_from_height(field)


def test_streamline_endpoints(standard_wave):
    field = standard_wave.members[-1].field
    vf = velocity_from_height(field)
    bed = extract_streamline(vf, vf.grid.p0)
    assert bed.at_bed
    assert np.max(np.abs(bed.y + vf.depth)) < 1e-12
    assert np.max(np.abs(bed.v)) == 0.0
    surf = extract_streamline(vf, 0.0)
    assert surf.row == vf.grid.n_p - 1
    assert np.array_equal(surf.y, vf.surface_y)
    with pytest.raises(ValueError):
        extract_streamline(vf, 1.0)


def test_streamline_slope_identities(standard_wave):
    field = standard_wave.members[-1].field
    vf = velocity_from_height(field)
    grid = field.grid
    for p_level in (grid.p[grid.n_p // 2], 0.0):
        sl = extract_streamline(vf, p_level)
        # geometric slope against the transformed slope v/(u-c)
        assert np.max(np.abs(sl.y_x - sl.slope)) < 20.0 * grid.dq**2
        # v = (u-c) y_x pointwise
        assert np.max(np.abs(sl.v - sl.u_minus_c * sl.y_x)) < 20.0 * grid.dq**2
        # the surface descends from crest to trough
        assert np.all(np.diff(sl.y) <= 1e-14)


def test_linear_oracle_consistency(params):
    oracle = linear_wave_oracle(params, amplitude=1e-3)
    assert oracle.depth == pytest.approx(1.0, rel=1e-12)
    assert oracle.c0**2 == pytest.approx(G * np.tanh(1.0), rel=1e-12)
    x = np.linspace(0.0, np.pi, 201)

    # kinematic surface mismatch scales quadratically with amplitude
    def kinematic_misfit(a):
        o = linear_wave_oracle(params, a)
        eta = o.eta(x)
        eta_x = np.gradient(eta, x, edge_order=2)
        return np.max(np.abs(o.v(x, eta) - o.u_minus_c(x, eta) * eta_x))

    m1, m2 = kinematic_misfit(1e-3), kinematic_misfit(1e-4)
    assert m1 / m2 > 50.0

    # dynamic surface condition with the oracle head, also quadratic
    def dynamic_misfit(a):
        o = linear_wave_oracle(params, a)
        eta = o.eta(x)
        return np.max(
            np.abs(
                o.u_minus_c(x, eta) ** 2
                + o.v(x, eta) ** 2
                + 2 * G * (eta + o.depth)
                - o.head
            )
        )

    d1, d2 = dynamic_misfit(1e-3), dynamic_misfit(1e-4)
    assert d1 / d2 > 50.0

    # zero amplitude reduces to the uniform stream
    o0 = linear_wave_oracle(params, 0.0)
    assert np.max(np.abs(o0.v(x, -0.5))) == 0.0
    assert np.max(np.abs(o0.u_minus_c(x, -0.5) + o0.c0)) == 0.0


def test_computed_wave_matches_linear_oracle(small_wave):
    field = small_wave.members[0].field
    vf = velocity_from_height(field)
    oracle = linear_wave_oracle(field.params, field.amplitude / 2.0)
    # compare against the wave's own mean level: the absolute level drifts
    # with the discrete bifurcation head at second order in the spacing
    mean = field.surface_mean
    eta_num = field.surface - mean
    eta_or = oracle.eta(vf.x)
    assert np.max(np.abs(eta_num - eta_or)) <= 0.02 * np.max(np.abs(eta_or))
    v_or = oracle.v(vf.x[None, :], field.values - mean)
    assert np.max(np.abs(vf.v - v_or)) <= 0.02 * np.max(np.abs(v_or))


def test_midlevel_streamline_matches_oracle(small_wave):
    field = small_wave.members[0].field
    vf = velocity_from_height(field)
    oracle = linear_wave_oracle(field.params, field.amplitude / 2.0)
    grid = field.grid
    sl = extract_streamline(vf, grid.p[grid.n_p // 2])
    y0 = float(np.mean(sl.y))
    expected = y0 + oracle.amplitude * np.sinh(y0 + oracle.depth) / np.sinh(oracle.depth) * np.cos(sl.x)
    assert np.max(np.abs(sl.y - expected)) <= 0.05 * oracle.amplitude


def test_oracle_height_field_round_trip(params):
    grid = Grid(65, 65, params.mass_flux)
    field = oracle_height_field(params, vort.zero().bound_to_flux(params.mass_flux), grid, 1e-4)
    vf = velocity_from_height(field)
    oracle = linear_wave_oracle(params, 1e-4)
    v_or = oracle.v(vf.x[None, :], vf.y)
    assert np.max(np.abs(vf.v - v_or)) <= 2e-3 * np.max(np.abs(v_or)) + 1e-12


def test_bernoulli_laminar_deviation_zero(params):
    spec = vort.constant(0.3).bound_to_flux(params.mass_flux)
    prof = laminar.solve_laminar(spec, params, head=27.0, n_p=65)
    grid = Grid(65, 65, params.mass_flux)
    run = replace(params, head=27.0, depth=prof.surface_height)
    field = laminar.broadcast_profile(prof, grid, run, spec)
    vf = velocity_from_height(field)
    for p_level in (grid.p0, grid.p[32], 0.0):
        head = bernoulli_head(extract_streamline(vf, p_level), spec, run)
        assert head.deviation < 1e-12


def test_bernoulli_surface_head_identity(standard_wave):
    field = standard_wave.members[-1].field
    vf = velocity_from_height(field)
    spec, run = field.vorticity, field.params
    surf = bernoulli_head(extract_streamline(vf, 0.0), spec, run)
    expected = run.surface_pressure + run.head / 2.0 - G * vf.depth
    assert surf.mean == pytest.approx(expected, abs=5e-4)
    assert surf.deviation < 5e-4


def test_bernoulli_deviation_refines(standard_wave, standard_wave_fine):
    worst = []
    for trace in (standard_wave, standard_wave_fine):
        field = trace.members[-1].field
        vf = velocity_from_height(field)
        worst.append(
            max(
                bernoulli_head(s, field.vorticity, field.params).deviation
                for s in all_streamlines(vf)
            )
        )
    assert np.log2(worst[0] / worst[1]) >= 1.5


def test_pressure_from_bernoulli_surface_and_hydrostatic(params):
    spec = vort.zero().bound_to_flux(params.mass_flux)
    bif = laminar.bifurcation_head(spec, params, n_p=65)
    run = replace(params, head=bif.head, depth=bif.depth)
    grid = Grid(65, 65, params.mass_flux)
    field = laminar.broadcast_profile(bif.profile, grid, run, spec)
    vf = velocity_from_height(field)
    pressure, energy = pressure_from_bernoulli(vf, spec, run)
    assert np.max(np.abs(pressure[-1] - run.surface_pressure)) < 1e-9
    hydrostatic = run.surface_pressure + G * (vf.surface_y[0] - vf.y)
    assert np.max(np.abs(pressure - hydrostatic)) < 1e-9
    assert energy == pytest.approx(run.surface_pressure + run.head / 2.0 - G * bif.depth, abs=1e-9)


def test_pressure_euler_residual_refines(standard_wave, standard_wave_fine):
    norms = []
    for trace in (standard_wave, standard_wave_fine):
        field = trace.members[-1].field
        vf = velocity_from_height(field)
        pressure, _ = pressure_from_bernoulli(vf, field.vorticity, field.params)
        r_x, r_y = euler_residual(vf, pressure)
        inner = (slice(2, -2), slice(1, -1))
        norms.append(max(np.max(np.abs(r_x[inner])), np.max(np.abs(r_y[inner]))))
    assert np.log2(norms[0] / norms[1]) >= 1.5


def test_divergence_and_vorticity_refine(standard_wave, standard_wave_fine):
    div, curl = [], []
    for trace in (standard_wave, standard_wave_fine):
        vf = velocity_from_height(trace.members[-1].field)
        inner = (slice(2, -2), slice(1, -1))
        div.append(np.max(np.abs(divergence_residual(vf)[inner])))
        curl.append(np.max(np.abs(vorticity_mismatch(vf)[inner])))
    assert np.log2(div[0] / div[1]) >= 1.5
    assert np.log2(curl[0] / curl[1]) >= 1.5


def test_surface_kinematic_condition(standard_wave):
    field = standard_wave.members[-1].field
    vf = velocity_from_height(field)
    residual = surface_kinematic_residual(vf)
    assert np.max(np.abs(residual)) <= 10.0 * (1e-10 + field.grid.dq**2)


def test_lateral_antisymmetry_exact(standard_wave):
    vf = velocity_from_height(standard_wave.members[-1].field)
    assert np.max(np.abs(vf.v[:, 0])) == 0.0
    assert np.max(np.abs(vf.v[:, -1])) == 0.0


def test_field_csv_export(standard_wave):
    field = standard_wave.members[0].field
    vf = velocity_from_height(field)
    pressure, _ = pressure_from_bernoulli(vf, field.vorticity, field.params)
    text = export_field_csv(vf, pressure)
    lines = text.strip().splitlines()
    assert lines[0] == "q,p,x,y,u_minus_c,v,P,psi"
    assert len(lines) == 1 + field.grid.n_p * field.grid.n_q
    row = [float(tok) for tok in lines[1].split(",")]
    assert row[0] == 0.0 and row[1] == field.grid.p0


def test_streamline_csv_export(standard_wave):
    field = standard_wave.members[0].field
    vf = velocity_from_height(field)
    sl = extract_streamline(vf, 0.0)
    lines = sl.to_csv().strip().splitlines()
    assert lines[0] == "x,y,y_x,y_xx,v,E"
    assert len(lines) == 1 + sl.x.size
    # the exported head column is the momentum-route head
    head = bernoulli_head(sl, field.vorticity, field.params)
    assert float(lines[1].split(",")[5]) == pytest.approx(head.samples[0])
