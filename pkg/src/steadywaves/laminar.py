"""Laminar (flat-surface) flows and the bifurcation point of the wave branch.

A laminar flow is x-independent, so the height equation collapses to the ODE
h'' = gamma(-p) h'^3 with h(p0) = 0 and the dynamic surface condition
1 + (2 g h(0) - Q) h'(0)^2 = 0.  Writing w = h', the slope satisfies
(w^-2)' = -2 gamma(-p), which integrates in closed form for zero and
constant vorticity; other shapes are integrated with a classical RK4 march.
The free parameter is the bed slope w0 = h'(p0), selected by root-finding on
the surface condition.

Waves bifurcate from the laminar family where the transverse linearization
about a laminar member becomes singular in its first cosine mode.  That
member is located by root-finding on the leading eigenvalue of the
discretized one-dimensional operator

    m'' - 3 gamma(-p) w^2 m' - w^2 m = 0,   m(p0) = 0,
    m'(0) = g w(0)^3 m(0),

with Richardson extrapolation over the flux step to sharpen the root.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BifurcationBracketError,
    NonMonotoneProfileError,
    NoRealSlopeError,
)
from .solver import Grid, HeightField, PhysicalParams
from .vorticity import VorticitySpec

SHOOTING_TOL = 1e-12
RK4_TARGET_STEPS = 2048  # total fine steps for a profile march


@dataclass(frozen=True)
class LaminarProfile:
    """One laminar member: height samples on the flux grid.

    h and hp are the discrete solution of the collapsed system on the grid
    (hp is the same differencing the 2-D solver uses: central inside,
    one-sided second order at the bed and surface), so broadcasting the
    profile across all q-columns satisfies the 2-D discrete residual to
    solver tolerance.  bottom_slope is the continuous shooting parameter w0.
    """

    p: np.ndarray
    h: np.ndarray
    hp: np.ndarray
    head: float
    gravity: float
    spec: VorticitySpec
    bottom_slope: float

    @property
    def surface_height(self) -> float:
        return float(self.h[-1])

    @property
    def surface_slope(self) -> float:
        """One-sided slope at p = 0, the one the surface condition uses."""
        dp = self.p[1] - self.p[0]
        return float((3.0 * self.h[-1] - 4.0 * self.h[-2] + self.h[-3]) / (2.0 * dp))

    @property
    def surface_speed(self) -> float:
        """Relative flow speed at the surface, 1 / h_p(0)."""
        return 1.0 / self.surface_slope

    def surface_condition_residual(self) -> float:
        return float(
            1.0
            + (2.0 * self.gravity * self.surface_height - self.head) * self.surface_slope**2
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("p,h,h_p\n")
        for pj, hj, wj in zip(self.p, self.h, self.hp):
            buf.write(f"{float(pj)!r},{float(hj)!r},{float(wj)!r}\n")
        return buf.getvalue()


# -- continuous profile paths ---------------------------------------------------


def closed_form_profile(spec: VorticitySpec, p0: float, w0: float, p: np.ndarray):
    """Exact (h, h_p) for zero or constant vorticity.

    h_p(p) = (w0^-2 - 2 gamma0 (p - p0))^(-1/2); the height follows from the
    antiderivative.  Raises NonMonotoneProfileError where the slope blows up
    (internal stagnation).
    """
    if spec.kind not in ("zero", "constant"):
        raise ValueError("closed form only covers zero and constant vorticity")
    p = np.asarray(p, dtype=float)
    g0 = spec.gamma0
    rad = w0 ** (-2.0) - 2.0 * g0 * (p - p0)
    if np.any(rad <= 0.0):
        raise NonMonotoneProfileError(
            f"slope blows up inside the flux range for w0={w0:.6g} (vorticity {g0:.6g})"
        )
    hp = rad ** (-0.5)
    if g0 == 0.0:
        h = w0 * (p - p0)
    else:
        h = (1.0 / w0 - np.sqrt(rad)) / g0
    return h, hp


def rk4_profile(spec: VorticitySpec, p0: float, w0, p: np.ndarray, substeps: int | None = None):
    """(h, h_p) by an RK4 march of h' = w, w' = gamma(-p) w^3.

    w0 may be a scalar or an array of shooting candidates; candidates whose
    slope leaves (0, inf) are marked invalid with NaN columns.  substeps
    defaults to whatever brings the total step count to RK4_TARGET_STEPS.
    """
    p = np.asarray(p, dtype=float)
    if substeps is None:
        substeps = max(1, round(RK4_TARGET_STEPS / (p.size - 1)))
    w0_arr = np.atleast_1d(np.asarray(w0, dtype=float))
    scalar = np.ndim(w0) == 0
    n_cand = w0_arr.size

    h = np.zeros((p.size, n_cand))
    w = np.zeros((p.size, n_cand))
    w[0] = w0_arr
    alive = np.isfinite(w0_arr) & (w0_arr > 0)

    def slope_rate(pv, wv):
        # dead candidates carry NaN/huge slopes; overflow there is benign
        with np.errstate(over="ignore", invalid="ignore"):
            return spec.gamma_at_p(pv) * wv**3

    for j in range(p.size - 1):
        hj = h[j].copy()
        wj = w[j].copy()
        dp_out = p[j + 1] - p[j]
        dst = dp_out / substeps
        pv = p[j]
        for _ in range(substeps):
            k1h, k1w = wj, slope_rate(pv, wj)
            k2h, k2w = wj + 0.5 * dst * k1w, slope_rate(pv + 0.5 * dst, wj + 0.5 * dst * k1w)
            k3h, k3w = wj + 0.5 * dst * k2w, slope_rate(pv + 0.5 * dst, wj + 0.5 * dst * k2w)
            k4h, k4w = wj + dst * k3w, slope_rate(pv + dst, wj + dst * k3w)
            hj = hj + (dst / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
            wj = wj + (dst / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            pv += dst
            bad = ~np.isfinite(wj) | (wj <= 0.0) | (wj > 1e8)
            alive &= ~bad
            wj[~alive] = np.nan
            hj[~alive] = np.nan
        h[j + 1] = hj
        w[j + 1] = wj

    if scalar:
        if not alive[0]:
            raise NonMonotoneProfileError(
                f"slope left (0, inf) during the march for w0={float(w0_arr[0]):.6g}"
            )
        return h[:, 0], w[:, 0]
    return h, w


def _continuous_profile(spec: VorticitySpec, p0: float, w0: float, p: np.ndarray, fast: bool = False):
    if spec.kind in ("zero", "constant"):
        return closed_form_profile(spec, p0, w0, p)
    # fast mode: a coarse march good enough to seed a discrete Newton polish
    return rk4_profile(spec, p0, w0, p, substeps=2 if fast else None)


def _slope_limit(spec: VorticitySpec, p0: float) -> float:
    """Largest bed slope before the slope blows up inside the column.

    From (w^-2)' = -2 gamma(-p): w stays finite iff
    w0^-2 > 2 max_p (Gamma(p) - Gamma(p0)).
    """
    from .vorticity import gamma_integral

    gi = gamma_integral(spec, p0, n_p=513)
    excess = gi.gamma_max - gi.value(p0)
    if excess <= 0.0:
        return np.inf
    return (2.0 * excess) ** (-0.5)


# -- surface-condition shooting -------------------------------------------------


def _surface_misfit(spec, g, Q, p0, w0, p_fine):
    h, w = _continuous_profile(spec, p0, w0, p_fine)
    return 1.0 + (2.0 * g * h[-1] - Q) * w[-1] ** 2


def _scan_bed_slopes(spec: VorticitySpec, p0: float, n_scan: int = 241):
    w_ref = 1.0 / (-p0)  # slope of a unit-depth column
    w_hi = min(0.999999 * _slope_limit(spec, p0), 1e3 * w_ref)
    return np.geomspace(1e-3 * w_ref, w_hi, n_scan)


def solve_laminar(
    spec: VorticitySpec,
    params: PhysicalParams,
    head: float,
    n_p: int = 257,
    tol: float = SHOOTING_TOL,
) -> LaminarProfile:
    """Laminar member at the given head Q.

    The bed slope is found by bracketed root-finding on the surface
    condition; when several laminar flows share the head, the slowest branch
    (largest bed slope) is taken, which is the one the wave branch perturbs.
    The continuous solution is then polished into the exact solution of the
    discrete 1-D system on the n_p-point flux grid.
    """
    g, p0 = params.gravity, params.mass_flux
    p_grid = np.linspace(p0, 0.0, n_p)
    p_fine = np.linspace(p0, 0.0, 8 * (n_p - 1) + 1)

    candidates = _scan_bed_slopes(spec, p0)
    if spec.kind in ("zero", "constant"):
        misfit = np.array([_misfit_or_nan(spec, g, head, p0, w, p_fine) for w in candidates])
    else:
        h_all, w_all = rk4_profile(spec, p0, candidates, p_fine)
        misfit = 1.0 + (2.0 * g * h_all[-1] - head) * w_all[-1] ** 2

    valid = np.isfinite(misfit)
    # <= 0 so that a scan point landing exactly on a root still brackets it
    sign_change = (
        valid[:-1]
        & valid[1:]
        & (misfit[:-1] * misfit[1:] <= 0.0)
        & ~((misfit[:-1] == 0.0) & (misfit[1:] == 0.0))
    )
    brackets = np.nonzero(sign_change)[0]
    if brackets.size == 0:
        raise NoRealSlopeError(
            f"surface condition has no root for head Q={head:.6g}: the head must "
            f"exceed 2*g*h(0) so that a real surface slope exists"
        )
    k = brackets[-1]  # largest-slope root: the slow, wave-bearing branch

    # Refine the root against the discrete surface condition so the returned
    # samples satisfy the discrete system at the requested head to machine
    # accuracy.  The discrete and continuous roots differ by O(dp^2), so the
    # continuous bracket rarely needs widening.
    lo, hi = k, k + 1

    def disc_misfit(w):
        h_disc, _ = _discrete_profile_at_slope(spec, g, p0, w, p_grid, tol=tol)
        hps = (3.0 * h_disc[-1] - 4.0 * h_disc[-2] + h_disc[-3]) / (2.0 * (p_grid[1] - p_grid[0]))
        return 1.0 + (2.0 * g * h_disc[-1] - head) * hps**2

    f_lo, f_hi = disc_misfit(candidates[lo]), disc_misfit(candidates[hi])
    while f_lo * f_hi > 0.0:
        if lo > 0:
            lo -= 1
            f_lo = disc_misfit(candidates[lo])
        elif hi < candidates.size - 1:
            hi += 1
            f_hi = disc_misfit(candidates[hi])
        else:
            raise NoRealSlopeError(
                f"discrete surface condition has no root near the continuous one "
                f"for head Q={head:.6g}"
            )
    if f_lo == 0.0:
        w0 = float(candidates[lo])
    elif f_hi == 0.0:
        w0 = float(candidates[hi])
    else:
        w0 = brentq(disc_misfit, candidates[lo], candidates[hi], xtol=1e-15, rtol=8.9e-16)

    h_disc, _ = _discrete_profile_at_slope(spec, g, p0, w0, p_grid, tol=tol)
    return _profile_from_samples(spec, g, head, p_grid, h_disc, w0)


def _misfit_or_nan(spec, g, Q, p0, w0, p_fine):
    try:
        return _surface_misfit(spec, g, Q, p0, w0, p_fine)
    except NonMonotoneProfileError:
        return np.nan


def _profile_from_samples(spec, g, head, p_grid, h, w0) -> LaminarProfile:
    dp = p_grid[1] - p_grid[0]
    hp = np.empty_like(h)
    hp[1:-1] = (h[2:] - h[:-2]) / (2.0 * dp)
    hp[0] = (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dp)
    hp[-1] = (3.0 * h[-1] - 4.0 * h[-2] + h[-3]) / (2.0 * dp)
    if np.min(hp) <= 0.0:
        raise NonMonotoneProfileError("polished profile lost strict monotonicity")
    return LaminarProfile(
        p=p_grid, h=h, hp=hp, head=head, gravity=g, spec=spec, bottom_slope=w0
    )


def _discrete_profile_at_slope(spec, g, p0, w0, p_grid, tol=SHOOTING_TOL, max_iter=40):
    """Exact solution of the discrete column ODE with a pinned bed slope.

    Unknowns are h_1 .. h_J (bed value fixed at zero): the first equation
    pins the one-sided bed slope at w0, the rest carry the central-difference
    ODE.  Parameterizing by the slope keeps the Newton regular even at folds
    of the head-parameterized laminar family.  Returns (h, Q) where Q is the
    head the discrete surface condition assigns to these samples.
    """
    n = p_grid.size
    dp = p_grid[1] - p_grid[0]
    gam = np.asarray(spec.gamma_at_p(p_grid[1:-1]))
    h_init, _ = _continuous_profile(spec, p0, w0, p_grid, fast=True)
    h = np.asarray(h_init, dtype=float).copy()
    h[0] = 0.0

    # the second difference divided by dp^2 has a roundoff floor
    eps = np.finfo(float).eps
    tol_eff = max(tol, 100.0 * eps * (np.max(np.abs(h)) + 1.0) / dp**2)

    def residual(hv):
        hp_c = (hv[2:] - hv[:-2]) / (2.0 * dp)
        r = np.empty(n - 1)
        r[0] = (-3.0 * hv[0] + 4.0 * hv[1] - hv[2]) / (2.0 * dp) - w0
        r[1:] = (hv[2:] - 2.0 * hv[1:-1] + hv[:-2]) / dp**2 - gam * hp_c**3
        return r

    for _ in range(max_iter):
        r = residual(h)
        if np.max(np.abs(r)) <= tol_eff:
            break
        Jm = np.zeros((n - 1, n - 1))
        Jm[0, 0] = 4.0 / (2.0 * dp)
        Jm[0, 1] = -1.0 / (2.0 * dp)
        hp_c = (h[2:] - h[:-2]) / (2.0 * dp)
        for row in range(1, n - 1):
            j = row  # grid index of this interior equation
            dlo = 1.0 / dp**2 + 3.0 * gam[row - 1] * hp_c[row - 1] ** 2 / (2.0 * dp)
            dmi = -2.0 / dp**2
            dhi = 1.0 / dp**2 - 3.0 * gam[row - 1] * hp_c[row - 1] ** 2 / (2.0 * dp)
            if j - 1 >= 1:
                Jm[row, j - 2] = dlo
            Jm[row, j - 1] = dmi
            Jm[row, j] = dhi
        step = np.linalg.solve(Jm, -r)
        lam = 1.0
        base = np.max(np.abs(r))
        accepted = False
        for _ in range(40):
            trial = h.copy()
            trial[1:] += lam * step
            if np.max(np.abs(residual(trial))) < base:
                h = trial
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if base <= 10.0 * tol_eff:
                break  # parked at the roundoff floor
            raise NonMonotoneProfileError("discrete column solve failed to reduce the residual")
    else:
        r = residual(h)
        if np.max(np.abs(r)) > 10.0 * tol_eff:
            raise NonMonotoneProfileError(
                f"discrete column solve did not converge (residual {np.max(np.abs(r)):.3e})"
            )

    hps = (3.0 * h[-1] - 4.0 * h[-2] + h[-3]) / (2.0 * dp)
    if hps <= 0.0:
        raise NonMonotoneProfileError("discrete column lost monotonicity at the surface")
    head = 1.0 / hps**2 + 2.0 * g * h[-1]
    return h, head


def broadcast_profile(
    profile: LaminarProfile, grid: Grid, params: PhysicalParams, spec: VorticitySpec
) -> HeightField:
    """Lift a laminar profile to a 2-D height field, constant in q."""
    if profile.p.size != grid.n_p:
        raise ValueError("profile resolution does not match the grid")
    values = np.repeat(profile.h[:, None], grid.n_q, axis=1)
    return HeightField(grid, values, params, spec)


# -- bifurcation ------------------------------------------------------------------


@dataclass(frozen=True)
class BifurcationResult:
    """Laminar member whose first-cosine-mode linearization is singular."""

    head: float
    bottom_slope: float
    depth: float
    surface_speed: float
    mode: np.ndarray       # transverse mode m(p), normalized to 1 at the surface
    p: np.ndarray
    profile: LaminarProfile


def _implied_head(spec, g, p0, w0, p_fine) -> float:
    h, w = _continuous_profile(spec, p0, w0, p_fine)
    return 1.0 / w[-1] ** 2 + 2.0 * g * h[-1]


def _mode_matrix(profile: LaminarProfile):
    """Discrete transverse-mode operator with the surface value eliminated.

    Rows are the interior flux nodes; the surface unknown is folded in
    through the linearized surface condition, so singularity of this matrix
    is exactly singularity of the full linearized boundary-value problem.
    """
    p, h = profile.p, profile.h
    g = profile.gravity
    dp = p[1] - p[0]
    n = p.size
    gam = np.asarray(profile.spec.gamma_at_p(p[1:-1]))
    hp_c = (h[2:] - h[:-2]) / (2.0 * dp)

    lower = 1.0 / dp**2 + 3.0 * gam * hp_c**2 / (2.0 * dp)
    diag = -2.0 / dp**2 - hp_c**2
    upper = 1.0 / dp**2 - 3.0 * gam * hp_c**2 / (2.0 * dp)

    m = n - 2  # unknowns m_1 .. m_{n-2}
    T = np.zeros((m, m))
    for row in range(m):
        T[row, row] = diag[row]
        if row > 0:
            T[row, row - 1] = lower[row]
        if row < m - 1:
            T[row, row + 1] = upper[row]

    # Fold in the surface node: m'(0) = g w(0)^3 m(0) with the one-sided slope.
    hps = profile.surface_slope
    denom = 3.0 - 2.0 * dp * g * hps**3
    if abs(denom) < 1e-12:
        denom = np.sign(denom) * 1e-12 if denom != 0 else 1e-12
    T[m - 1, m - 1] += upper[m - 1] * 4.0 / denom
    T[m - 1, m - 2] += upper[m - 1] * (-1.0) / denom
    return T, denom


def _leading_eigenvalue(profile: LaminarProfile) -> float:
    T, _ = _mode_matrix(profile)
    return float(np.max(np.linalg.eigvals(T).real))


def _laminar_at_slope(spec, g, p0, w0, n_p) -> LaminarProfile:
    """Discrete laminar member at a given bed slope, head implied."""
    p_grid = np.linspace(p0, 0.0, n_p)
    h_disc, head = _discrete_profile_at_slope(spec, g, p0, w0, p_grid)
    return _profile_from_samples(spec, g, head, p_grid, h_disc, w0)


def _mode_root(spec, g, p0, n_p, candidates, k_lo, k_hi) -> float | None:
    """Zero of the leading eigenvalue at this flux resolution.

    The bracket found during the scan may not bracket the root of the
    operator discretized at a different resolution, so the endpoints are
    re-checked and widened along the candidate ladder when necessary.
    Returns None when no bracket exists at this resolution.
    """

    def mu(w0):
        try:
            return _leading_eigenvalue(_laminar_at_slope(spec, g, p0, w0, n_p))
        except NonMonotoneProfileError:
            return np.nan

    lo, hi = k_lo, k_hi
    f_lo, f_hi = mu(candidates[lo]), mu(candidates[hi])
    for _ in range(candidates.size):
        if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi <= 0.0:
            break
        if lo > 0:
            lo -= 1
            f_lo = mu(candidates[lo])
        elif hi < candidates.size - 1:
            hi += 1
            f_hi = mu(candidates[hi])
        else:
            return None
    else:
        return None
    if f_lo == 0.0:
        return float(candidates[lo])
    if f_hi == 0.0:
        return float(candidates[hi])
    return brentq(mu, candidates[lo], candidates[hi], xtol=1e-13, rtol=8.9e-16)


def bifurcation_head(
    spec: VorticitySpec,
    params: PhysicalParams,
    n_p: int = 257,
    extrapolate: bool = True,
) -> BifurcationResult:
    """Head Q* at which waves bifurcate from the laminar family.

    The laminar family is scanned in the bed slope; at each member the
    leading eigenvalue of the discretized transverse-mode operator is
    evaluated, and its first zero crossing is refined by Brent iteration.
    With extrapolate=True the root is also located on a once-coarsened flux
    grid and Richardson-extrapolated, removing the leading second-order
    discretization error.
    """
    g, p0 = params.gravity, params.mass_flux

    candidates = _scan_bed_slopes(spec, p0, n_scan=61)
    scan_np = min(n_p, 65)
    mus = np.full(candidates.size, np.nan)
    heads = np.full(candidates.size, np.nan)
    for k, w0 in enumerate(candidates):
        try:
            prof = _laminar_at_slope(spec, g, p0, w0, scan_np)
        except NonMonotoneProfileError:
            continue
        mus[k] = _leading_eigenvalue(prof)
        heads[k] = prof.head

    valid = np.isfinite(mus)
    cross = valid[:-1] & valid[1:] & (mus[:-1] * mus[1:] < 0.0)
    idx = np.nonzero(cross)[0]
    if idx.size == 0:
        finite_heads = heads[np.isfinite(heads)]
        interval = (
            (float(np.min(finite_heads)), float(np.max(finite_heads)))
            if finite_heads.size
            else None
        )
        raise BifurcationBracketError(
            "linearized operator never became singular along the laminar family",
            head_interval=interval,
        )
    k = idx[0]

    w_star = _mode_root(spec, g, p0, n_p, candidates, k, k + 1)
    if w_star is None:
        finite_heads = heads[np.isfinite(heads)]
        raise BifurcationBracketError(
            "scan bracketed a singularity but the full-resolution operator "
            "does not change sign",
            head_interval=(float(np.min(finite_heads)), float(np.max(finite_heads))),
        )
    if extrapolate and (n_p - 1) % 2 == 0 and (n_p - 1) // 2 >= 16:
        n_half = (n_p - 1) // 2 + 1
        w_half = _mode_root(spec, g, p0, n_half, candidates, k, k + 1)
        if w_half is not None:
            w_star = w_star + (w_star - w_half) / 3.0

    profile = _laminar_at_slope(spec, g, p0, w_star, n_p)
    head_star = profile.head

    T, denom = _mode_matrix(profile)
    eigvals, eigvecs = np.linalg.eig(T)
    j = int(np.argmin(np.abs(eigvals.real)))
    interior = eigvecs[:, j].real
    m_full = np.zeros(n_p)
    m_full[1:-1] = interior
    m_full[-1] = (4.0 * interior[-1] - interior[-2]) / denom
    if m_full[-1] == 0.0:
        raise BifurcationBracketError("transverse mode has no surface displacement")
    m_full /= m_full[-1]

    return BifurcationResult(
        head=head_star,
        bottom_slope=w_star,
        depth=profile.surface_height,
        surface_speed=profile.surface_speed,
        mode=m_full,
        p=profile.p,
        profile=profile,
    )
