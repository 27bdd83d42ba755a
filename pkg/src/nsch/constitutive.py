"""Free energy of the binary mixture and every quantity derived from it.

The free energy density has the form

    f(rho, c) = a rho^(gamma-1) + log(rho) H(c) + fc(c)

with a smooth bounded mixing profile H and a smoothed double-well fc whose
second and third derivatives stay bounded and whose derivative grows linearly
at large |c|.  Pressure, chemical potential, partial derivatives, the
Newtonian viscous stress and the capillary (Korteweg) stress are all computed
from it.  Density is never clamped: any evaluation at or below the positivity
floor raises, because vacuum formation is a scheme failure, not a state to
regularize.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityError
from .spectral import (
    SpectralField,
    gradient,
    laplacian,
    pointwise,
    to_physical,
    to_spectral,
)

__all__ = [
    "DoubleWell",
    "QuadraticWell",
    "ZeroFunction",
    "TanhMixing",
    "FreeEnergySpec",
    "ViscositySpec",
    "free_energy",
    "pressure",
    "chemical_potential",
    "f_partials",
    "stress",
    "korteweg",
]


@dataclass(frozen=True)
class ZeroFunction:
    """Identically zero profile; switches the mixing or well term off."""

    def value(self, c):
        return np.zeros_like(np.asarray(c, dtype=float))

    d1 = value
    d2 = value
    d3 = value


@dataclass(frozen=True)
class QuadraticWell:
    """fc(c) = lam * c^2 / 2; the linear-potential test case."""

    lam: float = 1.0

    def value(self, c):
        return 0.5 * self.lam * np.asarray(c, dtype=float) ** 2

    def d1(self, c):
        return self.lam * np.asarray(c, dtype=float)

    def d2(self, c):
        return np.full_like(np.asarray(c, dtype=float), self.lam)

    def d3(self, c):
        return np.zeros_like(np.asarray(c, dtype=float))


@dataclass(frozen=True)
class DoubleWell:
    """Double well (c^2-1)^2/4 - 1/4, blended to a quadratic of curvature kappa.

    Inside |c| <= cstar the well is the plain quartic (shifted so the value at
    c = 0 vanishes).  On cstar < |c| < cstar + 1 the second derivative follows
    a cubic Hermite profile joining the quartic's curvature and slope to the
    constant kappa, which makes the function exactly C^3 with bounded second
    and third derivatives and an asymptotically linear derivative of slope
    kappa.
    """

    cstar: float = 2.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.cstar <= 0:
            raise ValueError("cstar must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    def _consts(self):
        cs, kap = self.cstar, self.kappa
        a = 3.0 * cs**2 - 1.0  # curvature at the joint
        b = 6.0 * cs  # its slope
        cc = 3.0 * (kap - a) - 2.0 * b
        dd = 2.0 * (a - kap) + b
        w1 = cs**3 - cs  # first derivative at the joint
        f0 = 0.25 * (cs**2 - 1.0) ** 2 - 0.25
        p1 = w1 + a + b / 2.0 + cc / 3.0 + dd / 4.0
        p0 = f0 + w1 + a / 2.0 + b / 6.0 + cc / 12.0 + dd / 20.0
        return a, b, cc, dd, w1, f0, p1, p0

    def value(self, c):
        c = np.asarray(c, dtype=float)
        s = np.abs(c)
        a, b, cc, dd, w1, f0, p1, p0 = self._consts()
        r = np.clip(s - self.cstar, 0.0, 1.0)
        q = np.maximum(s - self.cstar - 1.0, 0.0)
        inner = 0.25 * (c**2 - 1.0) ** 2 - 0.25
        mid = f0 + w1 * r + a * r**2 / 2.0 + b * r**3 / 6.0 + cc * r**4 / 12.0 + dd * r**5 / 20.0
        out = p0 + p1 * q + 0.5 * self.kappa * q**2
        return np.where(s <= self.cstar, inner, np.where(q > 0.0, out, mid))

    def d1(self, c):
        c = np.asarray(c, dtype=float)
        s = np.abs(c)
        sg = np.sign(c)
        a, b, cc, dd, w1, _, p1, _ = self._consts()
        r = np.clip(s - self.cstar, 0.0, 1.0)
        q = np.maximum(s - self.cstar - 1.0, 0.0)
        inner = c**3 - c
        mid = sg * (w1 + a * r + b * r**2 / 2.0 + cc * r**3 / 3.0 + dd * r**4 / 4.0)
        out = sg * (p1 + self.kappa * q)
        return np.where(s <= self.cstar, inner, np.where(q > 0.0, out, mid))

    def d2(self, c):
        c = np.asarray(c, dtype=float)
        s = np.abs(c)
        a, b, cc, dd, *_ = self._consts()
        r = np.clip(s - self.cstar, 0.0, 1.0)
        inner = 3.0 * c**2 - 1.0
        mid = a + b * r + cc * r**2 + dd * r**3
        return np.where(s <= self.cstar, inner, np.where(s >= self.cstar + 1.0, self.kappa, mid))

    def d3(self, c):
        c = np.asarray(c, dtype=float)
        s = np.abs(c)
        sg = np.sign(c)
        a, b, cc, dd, *_ = self._consts()
        r = np.clip(s - self.cstar, 0.0, 1.0)
        inner = 6.0 * c
        mid = sg * (b + 2.0 * cc * r + 3.0 * dd * r**2)
        return np.where(s <= self.cstar, inner, np.where(s >= self.cstar + 1.0, 0.0, mid))


@dataclass(frozen=True)
class TanhMixing:
    """H(c) = h0 tanh(c): bounded with bounded derivatives up to third order."""

    h0: float = 0.1

    def value(self, c):
        return self.h0 * np.tanh(c)

    def d1(self, c):
        return self.h0 / np.cosh(c) ** 2

    def d2(self, c):
        sech2 = 1.0 / np.cosh(c) ** 2
        return -2.0 * self.h0 * sech2 * np.tanh(c)

    def d3(self, c):
        sech2 = 1.0 / np.cosh(c) ** 2
        t = np.tanh(c)
        return self.h0 * (4.0 * sech2 * t**2 - 2.0 * sech2**2)


@dataclass(frozen=True)
class FreeEnergySpec:
    """Parameters and component profiles of the free energy density."""

    a: float = 1.0
    gamma: float = 4.0
    mixing: object = field(default_factory=TanhMixing)
    well: object = field(default_factory=DoubleWell)
    rho_floor: float = 1e-8
    derivative_bound: float = 20.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("elastic coefficient a must be positive")
        if self.gamma <= 3:
            raise ValueError(f"adiabatic exponent gamma must exceed 3, got {self.gamma}")
        if self.rho_floor <= 0:
            raise ValueError("rho_floor must be positive")

    def validate(self) -> list[str]:
        """Numeric checks of the structural hypotheses; returns violations."""
        problems = []
        cgrid = np.linspace(-10.0, 10.0, 10_001)
        if abs(float(self.well.value(np.array(0.0)))) > 1e-12:
            problems.append("well value at c=0 must vanish")
        for name, fn in (("well d2", self.well.d2), ("well d3", self.well.d3),
                         ("mixing d1", self.mixing.d1), ("mixing d2", self.mixing.d2),
                         ("mixing d3", self.mixing.d3)):
            m = float(np.max(np.abs(fn(cgrid))))
            if not np.isfinite(m) or m > self.derivative_bound:
                problems.append(f"{name} exceeds bound {self.derivative_bound} (max {m:.3g})")
        # derivative of the well must grow linearly far from the origin
        far = 10.0 * getattr(self.well, "cstar", 1.0)
        r1 = float(self.well.d1(np.array(far))) / far
        r2 = float(self.well.d1(np.array(2.0 * far))) / (2.0 * far)
        if isinstance(self.well, ZeroFunction):
            pass
        elif r1 <= 0 or r2 <= 0 or abs(r2 - r1) > 0.5 * max(abs(r1), 1e-12):
            problems.append(f"well derivative is not asymptotically linear (ratios {r1:.3g}, {r2:.3g})")
        return problems


@dataclass(frozen=True)
class ViscositySpec:
    nu_shear: float = 1.0
    nu_bulk: float = 0.0

    def __post_init__(self):
        if self.nu_shear <= 0:
            raise ValueError("nu_shear must be positive")
        if self.nu_bulk < 0:
            raise ValueError("nu_bulk must be nonnegative")


def check_positive(rho: np.ndarray, floor: float):
    m = float(np.min(rho))
    if m <= floor:
        raise PositivityError(m)


def free_energy(rho: np.ndarray, c: np.ndarray, spec: FreeEnergySpec) -> np.ndarray:
    """f(rho, c) evaluated pointwise."""
    check_positive(rho, spec.rho_floor)
    return spec.a * rho ** (spec.gamma - 1.0) + np.log(rho) * spec.mixing.value(c) + spec.well.value(c)


def pressure(rho: np.ndarray, c: np.ndarray, spec: FreeEnergySpec) -> np.ndarray:
    """p = rho^2 df/drho = a (gamma-1) rho^gamma + rho H(c)."""
    check_positive(rho, spec.rho_floor)
    return spec.a * (spec.gamma - 1.0) * rho**spec.gamma + rho * spec.mixing.value(c)


def f_partials(rho: np.ndarray, c: np.ndarray, spec: FreeEnergySpec, which: str) -> np.ndarray:
    """Closed-form partial derivatives of f and of rho*f.

    which: "f_c"           df/dc           = log(rho) H'(c) + fc'(c)
           "f_cc"          d2f/dc2         = log(rho) H''(c) + fc''(c)
           "rho_f_rho_rho" d2(rho f)/drho2 = a gamma (gamma-1) rho^(gamma-2) + H(c)/rho
           "rho_f_rho_c"   d2(rho f)/drho dc = (1 + log rho) H'(c) + fc'(c)
    """
    check_positive(rho, spec.rho_floor)
    if which == "f_c":
        return np.log(rho) * spec.mixing.d1(c) + spec.well.d1(c)
    if which == "f_cc":
        return np.log(rho) * spec.mixing.d2(c) + spec.well.d2(c)
    if which == "rho_f_rho_rho":
        g = spec.gamma
        return spec.a * g * (g - 1.0) * rho ** (g - 2.0) + spec.mixing.value(c) / rho
    if which == "rho_f_rho_c":
        return (1.0 + np.log(rho)) * spec.mixing.d1(c) + spec.well.d1(c)
    raise ValueError(f"unknown partial {which!r}")


def chemical_potential(rho: SpectralField, c: SpectralField, spec: FreeEnergySpec) -> SpectralField:
    """mu = df/dc - (1/rho) Lap c as a spectral field."""
    grid = rho.grid
    lap_c = laplacian(c)

    def mu_values(rv, cv, lv):
        check_positive(rv[0], spec.rho_floor)
        return f_partials(rv[0], cv[0], spec, "f_c") - lv[0] / rv[0]

    return pointwise(grid, mu_values, rho, c, lap_c)


def stress(grad_u: SpectralField, visc: ViscositySpec) -> SpectralField:
    """Newtonian stress S = nu_shear (G + G^T - (2/N) tr G I) + nu_bulk tr G I.

    Linear in the velocity gradient, so it is assembled directly on
    coefficients with no dealiasing pass.
    """
    grid = grad_u.grid
    n = grid.dim
    if grad_u.ncomp != n * n:
        raise ValueError(f"expected {n * n} tensor components, got {grad_u.ncomp}")
    g = grad_u.coeffs
    tr = sum(g[i * n + i] for i in range(n))
    comps = []
    for i in range(n):
        for j in range(n):
            s = visc.nu_shear * (g[i * n + j] + g[j * n + i])
            if i == j:
                s = s - visc.nu_shear * (2.0 / n) * tr + visc.nu_bulk * tr
            comps.append(s)
    return SpectralField(grid, np.stack(comps))


def korteweg(grad_c: SpectralField) -> SpectralField:
    """Capillary stress grad c x grad c - |grad c|^2 I / 2, dealiased."""
    grid = grad_c.grid
    n = grid.dim
    if grad_c.ncomp != n:
        raise ValueError(f"expected {n} gradient components, got {grad_c.ncomp}")
    gv = to_physical(grad_c)
    sq = np.sum(gv**2, axis=0)
    comps = []
    for i in range(n):
        for j in range(n):
            t = gv[i] * gv[j]
            if i == j:
                t = t - 0.5 * sq
            comps.append(t)
    return to_spectral(grid, np.stack(comps))
