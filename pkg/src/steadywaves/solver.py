"""Finite-difference solver for the height-function form of steady waves.

The unknown is the height h(q, p) of a streamline above the flat bed, on the
fixed rectangle q in [0, pi], p in [p0, 0].  Interior nodes carry the
quasilinear balance

    (1 + h_q^2) h_pp - 2 h_q h_p h_qp + h_p^2 h_qq = gamma(-p) h_p^3,

the surface row (p = 0) carries the dynamic condition

    1 + h_q^2 + (2 g h - Q) h_p^2 = 0,

and the bed row (p = p0) carries h = 0.  Reflection symmetry about the crest
line q = 0 and the trough line q = pi is imposed by ghost-node mirroring,
which is what makes the vertical velocity vanish there identically.

All stencils are second-order central differences; the surface row uses a
one-sided second-order slope.  The Jacobian is assembled analytically and
factored with a sparse direct solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceStallError,
    InvariantViolationError,
    NewtonDivergenceError,
    SchemaError,
    StagnationError,
)
from .vorticity import VorticitySpec

HALF_PERIOD = np.pi
FIELD_SCHEMA = "steadywaves.field/1"

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 30
STALL_STEP_FLOOR = 1e-14


def unit_depth_flux(gravity: float) -> float:
    """Mass flux that makes the irrotational laminar depth at bifurcation 1."""
    return -np.sqrt(gravity * np.tanh(1.0))


@dataclass(frozen=True)
class PhysicalParams:
    """Physical data of a run.

    gravity and mass_flux (negative) are inputs; head is the Bernoulli-type
    surface constant, free during amplitude continuation.  wave_speed is a
    reporting convenience only (no check depends on it) and depth is the
    surface height of the laminar member the waves grew from.
    """

    gravity: float
    mass_flux: float
    head: float = 0.0
    surface_pressure: float = 0.0
    wave_speed: float | None = None
    depth: float | None = None

    def __post_init__(self):
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")
        if self.mass_flux >= 0:
            raise ValueError("mass flux p0 must be negative")

    @property
    def half_period(self) -> float:
        return HALF_PERIOD

    def as_dict(self) -> dict:
        return {
            "gravity": self.gravity,
            "mass_flux": self.mass_flux,
            "head": self.head,
            "surface_pressure": self.surface_pressure,
            "wave_speed": self.wave_speed,
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicalParams":
        return cls(
            gravity=float(d["gravity"]),
            mass_flux=float(d["mass_flux"]),
            head=float(d.get("head", 0.0)),
            surface_pressure=float(d.get("surface_pressure", 0.0)),
            wave_speed=None if d.get("wave_speed") is None else float(d["wave_speed"]),
            depth=None if d.get("depth") is None else float(d["depth"]),
        )


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [0, pi] x [p0, 0], endpoints included."""

    n_q: int
    n_p: int
    p0: float

    def __post_init__(self):
        if self.n_q < 17:
            raise ValueError("n_q must be at least 17")
        if self.n_p < 9:
            raise ValueError("n_p must be at least 9")
        if self.p0 >= 0:
            raise ValueError("p0 must be negative")

    @property
    def dq(self) -> float:
        return HALF_PERIOD / (self.n_q - 1)

    @property
    def dp(self) -> float:
        return -self.p0 / (self.n_p - 1)

    @property
    def q(self) -> np.ndarray:
        return np.linspace(0.0, HALF_PERIOD, self.n_q)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p0, 0.0, self.n_p)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid((self.n_q - 1) * factor + 1, (self.n_p - 1) * factor + 1, self.p0)

    def as_dict(self) -> dict:
        return {"n_q": self.n_q, "n_p": self.n_p}


def mirror_extend_q(f: np.ndarray, odd: bool = False) -> np.ndarray:
    """Extend an array by one ghost column on each side, reflecting about the
    crest and trough lines (sign-flipped for odd symmetry)."""
    ext = np.empty((f.shape[0], f.shape[1] + 2))
    ext[:, 1:-1] = f
    sign = -1.0 if odd else 1.0
    ext[:, 0] = sign * f[:, 1]
    ext[:, -1] = sign * f[:, -2]
    return ext


def diff_q(f: np.ndarray, dq: float, odd: bool = False) -> np.ndarray:
    """Central q-derivative with reflection ghosts."""
    ext = mirror_extend_q(f, odd=odd)
    return (ext[:, 2:] - ext[:, :-2]) / (2.0 * dq)


def diff_qq(f: np.ndarray, dq: float, odd: bool = False) -> np.ndarray:
    ext = mirror_extend_q(f, odd=odd)
    return (ext[:, 2:] - 2.0 * ext[:, 1:-1] + ext[:, :-2]) / (dq * dq)


def diff_p(f: np.ndarray, dp: float) -> np.ndarray:
    """p-derivative: central inside, one-sided second order on the end rows."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dp)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dp)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dp)
    return out


@dataclass(frozen=True, eq=False)
class HeightField:
    """Discrete height field h(q, p) with its physical data.

    values has shape (n_p, n_q), row 0 at the bed, last row at the surface.
    Treated as immutable after construction.
    """

    grid: Grid
    values: np.ndarray
    params: PhysicalParams
    vorticity: VorticitySpec

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_p, self.grid.n_q):
            raise ValueError(
                f"values shape {vals.shape} does not match grid "
                f"({self.grid.n_p}, {self.grid.n_q})"
            )
        if abs(self.grid.p0 - self.params.mass_flux) > 1e-12 * abs(self.params.mass_flux):
            raise ValueError("grid flux range disagrees with params.mass_flux")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- derived quantities -------------------------------------------------

    def h_q(self) -> np.ndarray:
        return diff_q(self.values, self.grid.dq)

    def h_p(self) -> np.ndarray:
        return diff_p(self.values, self.grid.dp)

    @property
    def surface(self) -> np.ndarray:
        return self.values[-1]

    @property
    def amplitude(self) -> float:
        """Crest-to-trough surface height difference."""
        return float(self.surface[0] - self.surface[-1])

    @property
    def surface_mean(self) -> float:
        """Trapezoid mean of the surface height over the half period."""
        s = self.surface
        return float((0.5 * s[0] + s[1:-1].sum() + 0.5 * s[-1]) / (self.grid.n_q - 1))

    @property
    def depth_reference(self) -> float:
        if self.params.depth is not None:
            return self.params.depth
        return max(self.surface_mean, 1e-12)

    @property
    def eps_flow(self) -> float:
        """Stagnation guard on h_p: the flow must stay strictly slower than
        the wave, with margin."""
        return 1e-6 * (-self.params.mass_flux) / self.depth_reference

    def with_values(self, values: np.ndarray) -> "HeightField":
        return HeightField(self.grid, values, self.params, self.vorticity)

    def with_head(self, head: float) -> "HeightField":
        return HeightField(self.grid, self.values, replace(self.params, head=head), self.vorticity)

    # -- invariants ----------------------------------------------------------

    def invariant_violations(self, tol: float = NEWTON_TOL) -> list[str]:
        """Structural checks a converged field must satisfy."""
        out = []
        if np.max(np.abs(self.values[0])) > 1e-13:
            out.append("bed row is not identically zero")
        hp = self.h_p()
        if np.min(hp) <= self.eps_flow:
            out.append(
                f"h_p reaches {np.min(hp):.3e} <= stagnation guard {self.eps_flow:.3e}"
            )
        hq = self.h_q()
        if np.max(hq[1:, 1:-1]) > 1e-12 * max(1.0, float(np.max(np.abs(hq)))):
            out.append(f"h_q is positive in the interior (max {np.max(hq[1:, 1:-1]):.3e})")
        if np.max(np.abs(hq[:, 0])) != 0.0 or np.max(np.abs(hq[:, -1])) != 0.0:
            out.append("h_q does not vanish on the crest/trough lines")
        surf = surface_residual(self)
        if np.max(np.abs(surf)) > 10.0 * tol:
            out.append(f"surface condition residual {np.max(np.abs(surf)):.3e} above tolerance")
        return out

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": FIELD_SCHEMA,
            "params": self.params.as_dict(),
            "vorticity": self.vorticity.as_dict(),
            "grid": self.grid.as_dict(),
            "h": [float(v) for v in self.values.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "HeightField":
        if d.get("schema") != FIELD_SCHEMA:
            raise SchemaError(f"expected schema {FIELD_SCHEMA!r}, got {d.get('schema')!r}")
        try:
            params = PhysicalParams.from_dict(d["params"])
            spec = VorticitySpec.from_dict(d["vorticity"]).bound_to_flux(params.mass_flux)
            grid = Grid(int(d["grid"]["n_q"]), int(d["grid"]["n_p"]), params.mass_flux)
            values = np.asarray(d["h"], dtype=float).reshape(grid.n_p, grid.n_q)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed height-field document: {exc}") from exc
        return cls(grid, values, params, spec)

    @classmethod
    def from_json(cls, text: str) -> "HeightField":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def surface_residual(h: HeightField) -> np.ndarray:
    """Dynamic surface condition evaluated on the surface row."""
    g = h.params.gravity
    Q = h.params.head
    dq, dp = h.grid.dq, h.grid.dp
    vals = h.values
    hq_s = diff_q(vals[-1:], dq)[0]
    hp_s = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * dp)
    return 1.0 + hq_s**2 + (2.0 * g * vals[-1] - Q) * hp_s**2


def assemble_residual(
    h: HeightField,
    forcing: np.ndarray | None = None,
    check_stagnation: bool = True,
) -> np.ndarray:
    """Residual grid of the discrete system, same shape as h.values.

    Row 0 carries the bed condition h = 0, the last row the surface
    condition, and interior rows the quasilinear balance.  An optional
    forcing grid (used by manufactured-solution studies) is subtracted from
    the interior and surface rows.
    """
    grid = h.grid
    dq, dp = grid.dq, grid.dp
    vals = h.values

    hp_all = diff_p(vals, dp)
    if check_stagnation and np.min(hp_all) <= h.eps_flow:
        jmin, imin = np.unravel_index(np.argmin(hp_all), hp_all.shape)
        raise StagnationError(
            f"h_p = {hp_all[jmin, imin]:.3e} at (q={grid.q[imin]:.4f}, p={grid.p[jmin]:.4f}) "
            f"is at or below the stagnation guard {h.eps_flow:.3e}"
        )

    res = np.empty_like(vals)
    res[0] = vals[0]

    ext = mirror_extend_q(vals, odd=False)

    # interior rows
    c = slice(1, -1)
    hq_i = (ext[c, 2:] - ext[c, :-2]) / (2.0 * dq)
    hp_i = (vals[2:] - vals[:-2]) / (2.0 * dp)
    hqq_i = (ext[c, 2:] - 2.0 * ext[c, 1:-1] + ext[c, :-2]) / (dq * dq)
    hpp_i = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / (dp * dp)
    hqp_i = (ext[2:, 2:] - ext[2:, :-2] - ext[:-2, 2:] + ext[:-2, :-2]) / (4.0 * dq * dp)
    gam_i = np.asarray(h.vorticity.gamma_at_p(grid.p[1:-1]))[:, None]
    res[1:-1] = (
        (1.0 + hq_i**2) * hpp_i
        - 2.0 * hq_i * hp_i * hqp_i
        + hp_i**2 * hqq_i
        - gam_i * hp_i**3
    )

    res[-1] = surface_residual(h)

    if forcing is not None:
        if np.max(np.abs(forcing[0])) != 0.0:
            raise ValueError("forcing must vanish on the bed row")
        res = res - forcing
    return res


def assemble_jacobian(h: HeightField, with_head_column: bool = False):
    """Analytic Jacobian of the residual with respect to the node values.

    Returns a CSR matrix ordered like the raveled residual (bed row first,
    surface row last).  With with_head_column=True, also returns the
    derivative of the residual with respect to the head Q.
    """
    grid = h.grid
    n_q, n_p = grid.n_q, grid.n_p
    dq, dp = grid.dq, grid.dp
    vals = h.values
    g = h.params.gravity
    Q = h.params.head
    N = n_q * n_p

    rows_list, cols_list, vals_list = [], [], []

    def node_index(j, i):
        return j * n_q + i

    def mirrored_cols(i_arr):
        out = i_arr.copy()
        out[out == -1] = 1
        out[out == n_q] = n_q - 2
        return out

    # bed rows: identity
    i_idx = np.arange(n_q)
    rows_list.append(i_idx)
    cols_list.append(i_idx)
    vals_list.append(np.ones(n_q))

    # interior rows
    ext = mirror_extend_q(vals, odd=False)
    c = slice(1, -1)
    hq = (ext[c, 2:] - ext[c, :-2]) / (2.0 * dq)
    hp = (vals[2:] - vals[:-2]) / (2.0 * dp)
    hqq = (ext[c, 2:] - 2.0 * ext[c, 1:-1] + ext[c, :-2]) / (dq * dq)
    hpp = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / (dp * dp)
    hqp = (ext[2:, 2:] - ext[2:, :-2] - ext[:-2, 2:] + ext[:-2, :-2]) / (4.0 * dq * dp)
    gam = np.asarray(h.vorticity.gamma_at_p(grid.p[1:-1]))[:, None]

    A = 1.0 + hq**2                    # multiplies h_pp
    B = -2.0 * hq * hp                 # multiplies h_qp
    C = hp**2                          # multiplies h_qq
    Dq = 2.0 * hq * hpp - 2.0 * hp * hqp            # d residual / d h_q
    Dp = -2.0 * hq * hqp + 2.0 * hp * hqq - 3.0 * gam * hp**2  # d residual / d h_p

    jj, ii = np.meshgrid(np.arange(1, n_p - 1), np.arange(n_q), indexing="ij")
    stencil = [
        (0, 0, A * (-2.0 / dp**2) + C * (-2.0 / dq**2)),
        (0, 1, A / dp**2 + Dp / (2.0 * dp)),
        (0, -1, A / dp**2 - Dp / (2.0 * dp)),
        (1, 0, C / dq**2 + Dq / (2.0 * dq)),
        (-1, 0, C / dq**2 - Dq / (2.0 * dq)),
        (1, 1, B / (4.0 * dq * dp)),
        (-1, -1, B / (4.0 * dq * dp)),
        (1, -1, -B / (4.0 * dq * dp)),
        (-1, 1, -B / (4.0 * dq * dp)),
    ]
    row_idx = (jj * n_q + ii).ravel()
    for di, dj, coef in stencil:
        ci = mirrored_cols((ii + di).ravel())
        cj = (jj + dj).ravel()
        rows_list.append(row_idx)
        cols_list.append(cj * n_q + ci)
        vals_list.append(np.broadcast_to(coef, jj.shape).ravel())

    # surface rows
    J = n_p - 1
    hq_s = diff_q(vals[-1:], dq)[0]
    hp_s = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * dp)
    bern = 2.0 * g * vals[-1] - Q
    i_all = np.arange(n_q)
    surface_rows = node_index(J, i_all)

    # d/dh at the surface node itself: direct + one-sided slope part
    rows_list.append(surface_rows)
    cols_list.append(node_index(J, i_all))
    vals_list.append(2.0 * g * hp_s**2 + 2.0 * bern * hp_s * (3.0 / (2.0 * dp)))
    rows_list.append(surface_rows)
    cols_list.append(node_index(J - 1, i_all))
    vals_list.append(2.0 * bern * hp_s * (-4.0 / (2.0 * dp)))
    rows_list.append(surface_rows)
    cols_list.append(node_index(J - 2, i_all))
    vals_list.append(2.0 * bern * hp_s * (1.0 / (2.0 * dp)))
    # d/dh_q part, mirrored at the lateral columns
    for di in (1, -1):
        ci = mirrored_cols(i_all + di)
        rows_list.append(surface_rows)
        cols_list.append(node_index(J, ci))
        vals_list.append(float(di) * 2.0 * hq_s / (2.0 * dq))

    Jmat = sp.coo_matrix(
        (np.concatenate(vals_list), (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(N, N),
    ).tocsr()

    if not with_head_column:
        return Jmat
    dF_dQ = np.zeros(N)
    dF_dQ[surface_rows] = -(hp_s**2)
    return Jmat, dF_dQ


# -- Newton ------------------------------------------------------------------


@dataclass(frozen=True)
class HeadPin:
    """Hold the head Q fixed; h is the only unknown."""


@dataclass(frozen=True)
class AmplitudePin:
    """Pin the crest-to-trough surface amplitude; Q becomes an unknown."""

    amplitude: float


@dataclass(frozen=True)
class SolveResult:
    field: HeightField
    iterations: int
    residual_norm: float


def _pin_residual(h: HeightField, amplitude: float) -> float:
    return h.surface[0] - h.surface[-1] - amplitude


def newton_solve(
    h0: HeightField,
    constraint: HeadPin | AmplitudePin = HeadPin(),
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    forcing: np.ndarray | None = None,
) -> SolveResult:
    """Damped Newton iteration with halving line search on the residual norm.

    Raises NewtonDivergenceError when the line search cannot reduce the
    residual or the iteration cap is hit, ConvergenceStallError when steps
    underflow while the residual plateaus, and InvariantViolationError when
    the converged field breaks a structural invariant (the field is attached
    to the exception for diagnosis).
    """
    if np.max(np.abs(h0.values[0])) > 1e-13:
        raise ValueError("starting field must satisfy the bed condition exactly")
    pin_amplitude = constraint.amplitude if isinstance(constraint, AmplitudePin) else None

    current = h0

    def full_residual(fld: HeightField) -> np.ndarray:
        r = assemble_residual(fld, forcing=forcing).ravel()
        if pin_amplitude is None:
            return r
        return np.append(r, _pin_residual(fld, pin_amplitude))

    res = full_residual(current)
    norm = float(np.max(np.abs(res)))

    for iteration in range(max_iter):
        if norm <= tol:
            return _finish(current, iteration, norm, tol)

        if pin_amplitude is None:
            Jmat = assemble_jacobian(current)
            system = Jmat.tocsc()
        else:
            Jmat, dF_dQ = assemble_jacobian(current, with_head_column=True)
            n_q = current.grid.n_q
            N = Jmat.shape[0]
            pin_row = np.zeros(N)
            pin_row[(current.grid.n_p - 1) * n_q + 0] = 1.0
            pin_row[(current.grid.n_p - 1) * n_q + (n_q - 1)] = -1.0
            system = sp.bmat(
                [[Jmat, dF_dQ[:, None]], [sp.csr_matrix(pin_row[None, :]), None]],
                format="csc",
            )

        delta = spla.splu(system).solve(-res)

        lam = 1.0
        accepted = False
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            trial = _apply_step(current, delta, lam, pin_amplitude is not None)
            try:
                trial_res = full_residual(trial)
            except StagnationError:
                lam *= 0.5
                continue
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < norm:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise NewtonDivergenceError(
                f"residual {norm:.3e} would not decrease after "
                f"{NEWTON_MAX_HALVINGS} step halvings",
                field=current,
                residual_norm=norm,
            )

        step_size = lam * float(np.max(np.abs(delta)))
        current, res, norm = trial, trial_res, trial_norm
        if norm > tol and step_size < STALL_STEP_FLOOR * max(1.0, float(np.max(np.abs(current.values)))):
            raise ConvergenceStallError(
                f"step collapsed to {step_size:.3e} with residual stuck at {norm:.3e}",
                field=current,
                residual_norm=norm,
            )

    if norm <= tol:
        return _finish(current, max_iter, norm, tol)
    raise NewtonDivergenceError(
        f"no convergence in {max_iter} iterations (residual {norm:.3e})",
        field=current,
        residual_norm=norm,
    )


def _apply_step(fld: HeightField, delta: np.ndarray, lam: float, has_head: bool) -> HeightField:
    n = fld.grid.n_p * fld.grid.n_q
    new_vals = fld.values + lam * delta[:n].reshape(fld.values.shape)
    new_vals[0] = 0.0  # the bed equation is linear; keep it exact
    out = fld.with_values(new_vals)
    if has_head:
        out = out.with_head(fld.params.head + lam * delta[n])
    return out


def _finish(fld: HeightField, iterations: int, norm: float, tol: float) -> SolveResult:
    violations = fld.invariant_violations(tol=tol)
    if violations:
        raise InvariantViolationError(
            "converged field violates invariants: " + "; ".join(violations),
            field=fld,
            violations=violations,
        )
    return SolveResult(field=fld, iterations=iterations, residual_norm=norm)


# -- continuation --------------------------------------------------------------


@dataclass(frozen=True)
class TraceMember:
    amplitude: float
    head: float
    field: HeightField
    newton_iterations: int
    residual_norm: float


@dataclass(frozen=True)
class ContinuationTrace:
    members: tuple[TraceMember, ...]
    bifurcation_head: float
    laminar_depth: float
    failure: str | None = None

    @property
    def complete(self) -> bool:
        return self.failure is None


def continue_in_amplitude(
    spec: VorticitySpec,
    params: PhysicalParams,
    grid_shape: tuple[int, int],
    target_amplitude: float,
    steps: int,
    tol: float = NEWTON_TOL,
    bifurcation=None,
) -> ContinuationTrace:
    """March the wave branch from the laminar state to the target amplitude.

    Equal amplitude steps a_k = k * target / steps, each solved by damped
    Newton with the previous member as the start and the head Q free.  The
    march aborts cleanly on the first failed step, returning the partial
    trace; a failure on the very first step raises instead.  A precomputed
    bifurcation result (matching this grid's flux resolution) may be passed
    to avoid recomputing it.
    """
    from . import laminar  # deferred: laminar builds on the types above

    if steps < 1:
        raise ValueError("steps must be at least 1")
    if target_amplitude <= 0:
        raise ValueError("target amplitude must be positive")

    n_q, n_p = grid_shape
    bif = bifurcation
    if bif is None:
        bif = laminar.bifurcation_head(spec, params, n_p=n_p)
    elif bif.p.size != n_p:
        raise ValueError("precomputed bifurcation does not match the grid resolution")
    run_params = replace(
        params, head=bif.head, depth=bif.depth, wave_speed=bif.surface_speed
    )
    grid = Grid(n_q, n_p, params.mass_flux)
    base = laminar.broadcast_profile(bif.profile, grid, run_params, spec)

    # Surface-normalized transverse mode of the linearization, used to kick
    # the first step off the laminar branch.
    kick = np.outer(bif.mode, np.cos(grid.q))

    members: list[TraceMember] = []
    current = base
    failure = None
    for k in range(1, steps + 1):
        a_k = k * target_amplitude / steps
        if k == 1:
            start = base.with_values(base.values + 0.5 * a_k * kick)
        else:
            start = current
        try:
            result = newton_solve(start, AmplitudePin(a_k), tol=tol)
        except (NewtonDivergenceError, ConvergenceStallError, StagnationError,
                InvariantViolationError) as exc:
            if k == 1:
                raise
            failure = f"step {k} (amplitude {a_k:.6g}): {exc}"
            break
        current = result.field
        members.append(
            TraceMember(
                amplitude=a_k,
                head=current.params.head,
                field=current,
                newton_iterations=result.iterations,
                residual_norm=result.residual_norm,
            )
        )
    return ContinuationTrace(
        members=tuple(members),
        bifurcation_head=bif.head,
        laminar_depth=bif.depth,
        failure=failure,
    )
