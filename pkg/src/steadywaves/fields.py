"""Physical-space reconstruction from a converged height field.

In the transformed variables the velocities come straight from the height
derivatives, u - c = -1/h_p and v = -h_q/h_p, and streamlines are rows of
the grid (level sets of the flux variable), so none of the quantities the
property checks consume require tracing or root finding.  Physical-space
derivatives follow by the chain rule through the map (q, p) -> (x, y) with
x = q, y = h - d.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import StagnationError
from .solver import Grid, HeightField, PhysicalParams, diff_p, diff_q
from .vorticity import VorticitySpec, gamma_integral


@dataclass(eq=False)
class VelocityField:
    """Grid-aligned samples of the relative flow (u - c, v).

    y is the physical height above the undisturbed level (bed at y = -depth);
    psi holds the stream-function value of each grid row.  Instances are
    treated as immutable; derived grids are memoized on first use.
    """

    grid: Grid
    params: PhysicalParams
    vorticity: VorticitySpec
    depth: float
    x: np.ndarray          # (n_q,)
    y: np.ndarray          # (n_p, n_q)
    u_minus_c: np.ndarray  # (n_p, n_q)
    v: np.ndarray          # (n_p, n_q)
    h_q: np.ndarray
    h_p: np.ndarray
    psi: np.ndarray        # (n_p,)
    source: HeightField
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def surface_y(self) -> np.ndarray:
        return self.y[-1]

    @property
    def amplitude(self) -> float:
        return float(self.surface_y[0] - self.surface_y[-1])

    def gradients(self, name: str):
        """Physical-space (d/dx, d/dy) of one of 'u_minus_c', 'v'."""
        key = f"grad_{name}"
        if key not in self._cache:
            odd = name == "v"
            self._cache[key] = physical_gradient(self, getattr(self, name), odd=odd)
        return self._cache[key]

    def momentum_pressure(self) -> np.ndarray:
        """Pressure by vertical integration of the vertical momentum balance
        down from the surface, independent of the Bernoulli closed form."""
        if "momentum_pressure" not in self._cache:
            g = self.params.gravity
            v_x, v_y = self.gradients("v")
            integrand = (g + self.u_minus_c * v_x + self.v * v_y) * self.h_p
            dp = self.grid.dp
            # cumulative trapezoid from the surface row downward
            cells = 0.5 * (integrand[1:] + integrand[:-1]) * dp
            below = np.zeros_like(integrand)
            below[:-1] = np.cumsum(cells[::-1], axis=0)[::-1]
            self._cache["momentum_pressure"] = self.params.surface_pressure + below
        return self._cache["momentum_pressure"]

    def slope_field_curvature(self) -> np.ndarray:
        """x-derivative (at fixed height) of the streamline-slope field
        v/(u - c).

        This differs from the geometric second derivative of an individual
        streamline by a term quadratic in the wave amplitude; it is the
        quantity whose sign drives the growth of v along streamlines, and
        its zeros are exactly where v switches between rising and falling.
        """
        if "slope_field_curvature" not in self._cache:
            w = self.h_q  # the slope field in the transformed variables
            wq = diff_q(w, self.grid.dq, odd=True)
            wp = diff_p(w, self.grid.dp)
            self._cache["slope_field_curvature"] = wq - wp * (self.h_q / self.h_p)
        return self._cache["slope_field_curvature"]


def velocity_from_height(h: HeightField) -> VelocityField:
    """Reconstruct (u - c, v) and the physical mesh from a height field."""
    hq = h.h_q()
    hp = h.h_p()
    if np.min(hp) <= h.eps_flow:
        raise StagnationError(
            f"h_p minimum {np.min(hp):.3e} at or below the stagnation guard "
            f"{h.eps_flow:.3e}; velocities are not meaningful"
        )
    depth = h.depth_reference
    return VelocityField(
        grid=h.grid,
        params=h.params,
        vorticity=h.vorticity,
        depth=depth,
        x=h.grid.q.copy(),
        y=h.values - depth,
        u_minus_c=-1.0 / hp,
        v=-hq / hp,
        h_q=hq,
        h_p=hp,
        psi=-h.grid.p,
        source=h,
    )


def physical_gradient(vf: VelocityField, f: np.ndarray, odd: bool = False):
    """Chain-rule gradient (f_x, f_y) of a grid function.

    odd selects the reflection parity across the crest/trough lines: the
    vertical velocity and anything proportional to it is odd, scalars like
    u, h, P are even.
    """
    fq = diff_q(f, vf.grid.dq, odd=odd)
    fp = diff_p(f, vf.grid.dp)
    fx = fq - (vf.h_q / vf.h_p) * fp
    fy = fp / vf.h_p
    return fx, fy


# -- consistency residuals -------------------------------------------------------


def divergence_residual(vf: VelocityField) -> np.ndarray:
    u_x, _ = vf.gradients("u_minus_c")
    _, v_y = vf.gradients("v")
    return u_x + v_y


def vorticity_mismatch(vf: VelocityField) -> np.ndarray:
    """u_y - v_x minus the prescribed vorticity at each node."""
    _, u_y = vf.gradients("u_minus_c")
    v_x, _ = vf.gradients("v")
    gam = np.asarray(vf.vorticity.gamma(vf.psi))[:, None]
    return (u_y - v_x) - gam


def surface_kinematic_residual(vf: VelocityField) -> np.ndarray:
    """v - (u - c) eta_x on the surface, with eta_x differenced independently
    of the velocity reconstruction."""
    eta_x = fourth_diff1(vf.surface_y, vf.grid.dq)
    return vf.v[-1] - vf.u_minus_c[-1] * eta_x


def euler_residual(vf: VelocityField, pressure: np.ndarray):
    """Residuals of the steady momentum balance for a given pressure grid."""
    g = vf.params.gravity
    u_x, u_y = vf.gradients("u_minus_c")
    v_x, v_y = vf.gradients("v")
    p_x, p_y = physical_gradient(vf, pressure, odd=False)
    r_x = vf.u_minus_c * u_x + vf.v * u_y + p_x
    r_y = vf.u_minus_c * v_x + vf.v * v_y + p_y + g
    return r_x, r_y


# -- streamlines ------------------------------------------------------------------


def fourth_diff1(y: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order first derivative along the last axis, one-sided closures
    at the ends."""
    out = np.empty_like(np.asarray(y, dtype=float))
    out[..., 2:-2] = (y[..., :-4] - 8.0 * y[..., 1:-3] + 8.0 * y[..., 3:-1] - y[..., 4:]) / (12.0 * dx)
    out[..., 0] = (
        -25.0 * y[..., 0] + 48.0 * y[..., 1] - 36.0 * y[..., 2] + 16.0 * y[..., 3] - 3.0 * y[..., 4]
    ) / (12.0 * dx)
    out[..., 1] = (
        -3.0 * y[..., 0] - 10.0 * y[..., 1] + 18.0 * y[..., 2] - 6.0 * y[..., 3] + y[..., 4]
    ) / (12.0 * dx)
    out[..., -2] = -(
        -3.0 * y[..., -1] - 10.0 * y[..., -2] + 18.0 * y[..., -3] - 6.0 * y[..., -4] + y[..., -5]
    ) / (12.0 * dx)
    out[..., -1] = -(
        -25.0 * y[..., -1] + 48.0 * y[..., -2] - 36.0 * y[..., -3] + 16.0 * y[..., -4] - 3.0 * y[..., -5]
    ) / (12.0 * dx)
    return out


def fourth_diff2(y: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order second derivative along the last axis, one-sided closures
    at the ends."""
    d2 = 12.0 * dx * dx
    out = np.empty_like(np.asarray(y, dtype=float))
    out[..., 2:-2] = (
        -y[..., :-4] + 16.0 * y[..., 1:-3] - 30.0 * y[..., 2:-2] + 16.0 * y[..., 3:-1] - y[..., 4:]
    ) / d2
    out[..., 0] = (
        45.0 * y[..., 0] - 154.0 * y[..., 1] + 214.0 * y[..., 2]
        - 156.0 * y[..., 3] + 61.0 * y[..., 4] - 10.0 * y[..., 5]
    ) / d2
    out[..., 1] = (
        10.0 * y[..., 0] - 15.0 * y[..., 1] - 4.0 * y[..., 2]
        + 14.0 * y[..., 3] - 6.0 * y[..., 4] + y[..., 5]
    ) / d2
    out[..., -2] = (
        10.0 * y[..., -1] - 15.0 * y[..., -2] - 4.0 * y[..., -3]
        + 14.0 * y[..., -4] - 6.0 * y[..., -5] + y[..., -6]
    ) / d2
    out[..., -1] = (
        45.0 * y[..., -1] - 154.0 * y[..., -2] + 214.0 * y[..., -3]
        - 156.0 * y[..., -4] + 61.0 * y[..., -5] - 10.0 * y[..., -6]
    ) / d2
    return out


@dataclass(frozen=True, eq=False)
class Streamline:
    """Samples of one streamline (a grid row) in physical coordinates.

    y_x and y_xx are the geometric derivatives of the curve; curvature is
    the slope-field variant (see VelocityField.slope_field_curvature) whose
    sign switches are what the monotonicity analysis keys on.  slope holds
    v/(u-c), the exact streamline slope in the transformed variables.
    energy carries the total head per sample, built from the
    momentum-integrated pressure.
    """

    p_level: float
    row: int
    x: np.ndarray
    y: np.ndarray
    y_x: np.ndarray
    y_xx: np.ndarray
    curvature: np.ndarray
    slope: np.ndarray
    v: np.ndarray
    u_minus_c: np.ndarray
    dvdx: np.ndarray      # total derivative of v along the curve
    dudx: np.ndarray      # total derivative of u along the curve
    pressure: np.ndarray  # momentum-integrated pressure along the row
    energy: np.ndarray    # total head samples

    @property
    def at_bed(self) -> bool:
        return self.row == 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,y_x,y_xx,v,E\n")
        for k in range(self.x.size):
            buf.write(
                f"{float(self.x[k])!r},{float(self.y[k])!r},{float(self.y_x[k])!r},"
                f"{float(self.y_xx[k])!r},{float(self.v[k])!r},{float(self.energy[k])!r}\n"
            )
        return buf.getvalue()


def extract_streamline(vf: VelocityField, p_level: float) -> Streamline:
    """Streamline at the grid row nearest to the requested flux level.

    Level sets of p are exact streamlines in these variables, so the curve
    is read off a row; derivatives use fourth-order stencils with one-sided
    closures so their error stays below the velocity reconstruction's.
    """
    grid = vf.grid
    if not (grid.p0 - 1e-12 <= p_level <= 1e-12):
        raise ValueError(f"p_level {p_level:.6g} outside [{grid.p0:.6g}, 0]")
    row = int(round((p_level - grid.p0) / grid.dp))
    row = min(max(row, 0), grid.n_p - 1)

    y_row = vf.y[row]
    y_x = fourth_diff1(y_row, grid.dq)
    y_xx = fourth_diff2(y_row, grid.dq)

    # a grid row IS the streamline, so the total derivative along the curve
    # is the plain q-derivative of the row samples
    dvdx = fourth_diff1(vf.v[row], grid.dq)
    dudx = fourth_diff1(vf.u_minus_c[row], grid.dq)

    pressure = vf.momentum_pressure()[row].copy()
    energy = _energy_samples(
        grid.p[row], y_row, vf.v[row], vf.u_minus_c[row], pressure, vf.vorticity, vf.params
    )
    return Streamline(
        p_level=grid.p[row],
        row=row,
        x=vf.x.copy(),
        y=y_row.copy(),
        y_x=y_x,
        y_xx=y_xx,
        curvature=vf.slope_field_curvature()[row].copy(),
        slope=vf.h_q[row].copy(),
        v=vf.v[row].copy(),
        u_minus_c=vf.u_minus_c[row].copy(),
        dvdx=dvdx,
        dudx=dudx,
        pressure=pressure,
        energy=energy,
    )


def all_streamlines(vf: VelocityField) -> list[Streamline]:
    return [extract_streamline(vf, p) for p in vf.grid.p]


# -- Bernoulli ---------------------------------------------------------------------


@dataclass(frozen=True)
class BernoulliHead:
    mean: float
    deviation: float
    samples: np.ndarray


def _energy_samples(p_level, y, v, u_minus_c, pressure, spec, params) -> np.ndarray:
    gi = gamma_integral(spec, params.mass_flux)
    kinetic = 0.5 * (u_minus_c**2 + v**2)
    return kinetic + params.gravity * y + pressure + gi.value(p_level)


def bernoulli_head(sl: Streamline, spec: VorticitySpec, params: PhysicalParams) -> BernoulliHead:
    """Total head along a streamline with the momentum-route pressure.

    The kinetic, gravity, and flux-antiderivative terms use the streamline's
    own samples; pressure comes from the vertical momentum integration, so a
    constant head is a genuine cross-check rather than an identity.
    """
    samples = _energy_samples(
        sl.p_level, sl.y, sl.v, sl.u_minus_c, sl.pressure, spec, params
    )
    mean = float(np.mean(samples))
    return BernoulliHead(mean=mean, deviation=float(np.max(np.abs(samples - mean))), samples=samples)


def pressure_from_bernoulli(vf: VelocityField, spec: VorticitySpec, params: PhysicalParams):
    """Pressure grid from the Bernoulli closed form, anchored at the surface.

    Returns (pressure, head_constant).  The head constant is fixed by
    requiring atmospheric pressure on the surface row (in the mean), which
    pins it to surface_pressure + Q/2 - g*depth up to the solver residual.
    """
    g = params.gravity
    gi = gamma_integral(spec, params.mass_flux)
    kinetic = 0.5 * (vf.u_minus_c**2 + vf.v**2)
    gamma_term = np.asarray(gi.value(-vf.psi))[:, None]  # Gamma(p) rowwise
    energy = params.surface_pressure + float(
        np.mean(kinetic[-1] + g * vf.surface_y + gamma_term[-1])
    )
    pressure = energy - kinetic - g * vf.y - gamma_term
    return pressure, energy


# -- linear wave oracle --------------------------------------------------------------


@dataclass(frozen=True)
class LinearWaveOracle:
    """First-order irrotational wave over the laminar flow of the same flux.

    eta(x) = a cos x, with the transverse structure sinh-shaped in depth and
    the propagation speed fixed by the finite-depth dispersion relation.
    Used exclusively as a test oracle.
    """

    amplitude: float
    depth: float
    gravity: float
    c0: float
    head: float

    def eta(self, x):
        return self.amplitude * np.cos(x)

    def v(self, x, y):
        return (
            self.amplitude
            * self.c0
            * np.sinh(np.asarray(y) + self.depth)
            / np.sinh(self.depth)
            * np.sin(x)
        )

    def u_minus_c(self, x, y):
        return -self.c0 + self.amplitude * self.c0 * np.cosh(
            np.asarray(y) + self.depth
        ) / np.sinh(self.depth) * np.cos(x)

    def height(self, q, p, p0):
        """First-order height field in the transformed variables."""
        base = (np.asarray(p) - p0) / self.c0
        mode = np.sinh(base) / np.sinh(self.depth)
        return base + self.amplitude * mode * np.cos(np.asarray(q))


def laminar_depth_for_flux(gravity: float, mass_flux: float) -> float:
    """Depth of the irrotational laminar flow at bifurcation for this flux.

    Solves g tanh(d) d^2 = p0^2, the combination of the dispersion relation
    with the flux of a uniform stream.
    """
    target = mass_flux**2

    def f(d):
        return gravity * np.tanh(d) * d * d - target

    hi = 1.0
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("no laminar depth matches this flux")
    return brentq(f, 1e-12, hi, xtol=1e-14, rtol=8.9e-16)


def linear_wave_oracle(params: PhysicalParams, amplitude: float) -> LinearWaveOracle:
    """Closed-form small-amplitude evaluators for the irrotational branch."""
    d = laminar_depth_for_flux(params.gravity, params.mass_flux)
    c0 = np.sqrt(params.gravity * np.tanh(d))
    return LinearWaveOracle(
        amplitude=amplitude,
        depth=d,
        gravity=params.gravity,
        c0=c0,
        head=c0**2 + 2.0 * params.gravity * d,
    )


def oracle_height_field(
    params: PhysicalParams, spec: VorticitySpec, grid: Grid, amplitude: float
) -> HeightField:
    """Synthetic height field built from the linear oracle (harness self-tests)."""
    oracle = linear_wave_oracle(params, amplitude)
    qq, pp = np.meshgrid(grid.q, grid.p)
    values = oracle.height(qq, pp, grid.p0)
    run_params = replace(
        params,
        depth=oracle.depth,
        head=oracle.head,
        wave_speed=oracle.c0,
    )
    return HeightField(grid, values, run_params, spec)


# -- exports -----------------------------------------------------------------------


def export_field_csv(vf: VelocityField, pressure: np.ndarray) -> str:
    """Field table with columns (q, p, x, y, u_minus_c, v, P, psi)."""
    buf = io.StringIO()
    buf.write("q,p,x,y,u_minus_c,v,P,psi\n")
    grid = vf.grid
    q, p = grid.q, grid.p
    for j in range(grid.n_p):
        for i in range(grid.n_q):
            buf.write(
                f"{float(q[i])!r},{float(p[j])!r},{float(vf.x[i])!r},{float(vf.y[j, i])!r},"
                f"{float(vf.u_minus_c[j, i])!r},{float(vf.v[j, i])!r},"
                f"{float(pressure[j, i])!r},{float(vf.psi[j])!r}\n"
            )
    return buf.getvalue()
