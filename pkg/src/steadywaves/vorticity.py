"""Vorticity distributions for steady waves.

The flow's vorticity is prescribed as a function of the stream function,
gamma(psi), together with its antiderivative in the flux variable,
Gamma(p) = integral of gamma(-s) from 0 to p.  Only three shapes ship:
identically zero, constant, and affine.  These realize every sign class of
gamma' that the qualitative results distinguish, while keeping Gamma in
closed form so no quadrature error enters the property checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FluxRangeError

KINDS = ("zero", "constant", "affine")

MONOTONICITY_CLASSES = (
    "irrotational",
    "constant",
    "increasing",
    "decreasing-bounded",
    "general",
)


@dataclass(frozen=True)
class VorticitySpec:
    """A vorticity function gamma(psi) with closed-form derivative.

    kind:
        "zero"      gamma = 0
        "constant"  gamma = gamma0
        "affine"    gamma = beta * psi + gamma0
    psi_max:
        Upper end of the flux interval [0, psi_max] the flow attains
        (psi_max = -p0).  When set, evaluation outside it is an error;
        unset specs evaluate everywhere.
    """

    kind: str
    gamma0: float = 0.0
    beta: float = 0.0
    psi_max: float | None = None
    monotonicity_class: str = field(init=False, default="")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown vorticity kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "zero" and (self.gamma0 != 0.0 or self.beta != 0.0):
            raise ValueError("kind='zero' requires gamma0 = beta = 0")
        if self.kind == "constant" and self.beta != 0.0:
            raise ValueError("kind='constant' requires beta = 0")
        if self.kind == "affine" and self.beta == 0.0:
            raise ValueError("kind='affine' requires beta != 0; use 'constant' instead")
        object.__setattr__(self, "monotonicity_class", self._classify())

    def _classify(self) -> str:
        if self.kind == "zero":
            return "irrotational"
        if self.kind == "constant":
            return "constant"
        return "increasing" if self.beta > 0 else "decreasing-bounded"

    def bound_to_flux(self, p0: float) -> "VorticitySpec":
        """Return a copy restricted to the flux interval [0, -p0]."""
        if p0 >= 0:
            raise ValueError("mass flux p0 must be negative")
        return VorticitySpec(self.kind, self.gamma0, self.beta, psi_max=-p0)

    def _check_range(self, psi):
        if self.psi_max is None:
            return
        psi = np.asarray(psi)
        if np.any(psi < -1e-12) or np.any(psi > self.psi_max + 1e-12):
            raise FluxRangeError(
                f"psi={psi if psi.ndim == 0 else 'array'} outside the flux interval "
                f"[0, {self.psi_max:.6g}] attained by the flow"
            )

    def gamma(self, psi):
        """Vorticity at stream-function value psi."""
        self._check_range(psi)
        psi = np.asarray(psi, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(psi)[()]
        if self.kind == "constant":
            return np.full_like(psi, self.gamma0)[()]
        return (self.beta * psi + self.gamma0)[()]

    def gamma_prime(self, psi):
        """d gamma / d psi (constant for every shipped kind)."""
        self._check_range(psi)
        psi = np.asarray(psi, dtype=float)
        if self.kind == "affine":
            return np.full_like(psi, self.beta)[()]
        return np.zeros_like(psi)[()]

    def gamma_at_p(self, p):
        """gamma(-p), the source term of the height equation at flux level p."""
        return self.gamma(-np.asarray(p, dtype=float))

    def as_dict(self) -> dict:
        return {"kind": self.kind, "gamma0": self.gamma0, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "VorticitySpec":
        return cls(kind=d["kind"], gamma0=float(d.get("gamma0", 0.0)), beta=float(d.get("beta", 0.0)))


def zero() -> VorticitySpec:
    return VorticitySpec("zero")


def constant(gamma0: float) -> VorticitySpec:
    if gamma0 == 0.0:
        return zero()
    return VorticitySpec("constant", gamma0=gamma0)


def affine(beta: float, gamma0: float = 0.0) -> VorticitySpec:
    if beta == 0.0:
        return constant(gamma0)
    return VorticitySpec("affine", gamma0=gamma0, beta=beta)


def evaluate_gamma(spec: VorticitySpec, psi):
    """Evaluate gamma(psi), enforcing the flux range when one is bound."""
    return spec.gamma(psi)


@dataclass(frozen=True)
class GammaIntegral:
    """Gamma(p) on [p0, 0] with its maximum over that interval.

    Gamma(0) = 0 by construction; the maximum is sampled on a grid
    oversampled 4x relative to the solver's flux grid, which for these
    smooth closed forms bounds the sampling error far below solver
    tolerance.
    """

    spec: VorticitySpec
    p0: float
    gamma_max: float

    def __call__(self, p):
        return self.value(p)

    def value(self, p):
        """Closed-form Gamma(p) = integral_0^p gamma(-s) ds."""
        p = np.asarray(p, dtype=float)
        if self.spec.kind == "zero":
            return np.zeros_like(p)[()]
        if self.spec.kind == "constant":
            return (self.spec.gamma0 * p)[()]
        # gamma(-s) = gamma0 - beta s, so the antiderivative is
        # gamma0 p - beta p^2 / 2.
        return (self.spec.gamma0 * p - 0.5 * self.spec.beta * p * p)[()]


def gamma_integral(spec: VorticitySpec, p0: float, n_p: int = 257) -> GammaIntegral:
    """Build the flux antiderivative of the vorticity on [p0, 0].

    n_p is the solver's flux-grid node count; the maximum of Gamma is
    located on a 4x oversampling of that grid.
    """
    if p0 >= 0:
        raise ValueError("mass flux p0 must be negative")
    integral = GammaIntegral(spec=spec, p0=p0, gamma_max=0.0)
    samples = np.linspace(p0, 0.0, 4 * (n_p - 1) + 1)
    gmax = float(np.max(integral.value(samples)))
    return GammaIntegral(spec=spec, p0=p0, gamma_max=gmax)


def check_decreasing_vorticity_admissible(spec: VorticitySpec, lambda1_lower: float) -> str:
    """Admissibility of a decreasing vorticity against the domain's first
    Dirichlet eigenvalue.

    A decreasing vorticity keeps the maximum principle available as long as
    sup |gamma'| stays below a certified lower bound on the first Dirichlet
    eigenvalue of the fluid domain.  Returns "pass" or "fail" for the
    decreasing-bounded class and "not-applicable" otherwise.
    """
    if lambda1_lower <= 0:
        raise ValueError("lambda1_lower must be a positive certified bound")
    if spec.monotonicity_class != "decreasing-bounded":
        return "not-applicable"
    return "pass" if abs(spec.beta) < lambda1_lower else "fail"
