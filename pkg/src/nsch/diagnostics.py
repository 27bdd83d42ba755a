"""Audits of every functional and inequality the analysis rests on.

The central object is the per-step energy ledger.  Writing E for the total
energy (kinetic + free + interface) plus the artificial-pressure energy
sqrt(eps)/(alpha-1) int rho^alpha, one step of the scheme should satisfy

    dE + [S(grad u):grad u + |grad mu|^2] dt + eps int rho |grad u|^2 dt
       + sqrt(eps) eps alpha int rho^(alpha-2) |grad rho|^2 dt
    = - eps int d2(rho f)/drho2 |grad rho|^2 dt
      - eps int d2(rho f)/drho dc grad rho . grad c dt
      + ito1 + ito2 + (int rho mu sigma(c)) dW

with the two Ito corrections ito1 = (1/2) int sum alpha_k^2 |grad sigma_k(c)|^2
and ito2 = (1/2) int rho f_cc sum alpha_k^2 sigma_k(c)^2.  Every right-hand
entry is evaluated at the pre-step state (Ito convention), so the ledger
residual is O(dt^2) per step in the deterministic case and a mean-zero
martingale increment plus O(dt^2) with noise.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from .constitutive import FreeEnergySpec, ViscositySpec, chemical_potential, f_partials, free_energy, stress
from .errors import PositivityError
from .noise import WienerIncrement, ito_grad_correction, ito_value_correction
from .scheme import ApproxParams, SchemeState, cutoff
from .spectral import (
    SpectralField,
    divergence,
    grad_tensor,
    gradient,
    integral,
    integrate_values,
    laplacian,
    norm_sobolev,
    to_physical,
)

__all__ = [
    "EnergyLedger",
    "LEDGER_COLUMNS",
    "total_energy",
    "artificial_energy",
    "initial_ledger_row",
    "energy_ledger_step",
    "mass",
    "renormalized_residual",
    "concentration_momentum_residual",
    "InequalityReport",
    "korn_check",
    "poincare_check",
    "holder_estimate",
    "ledger_to_csv",
    "ledger_from_csv",
    "audit_ledger_rows",
    "v15_functional",
]


@dataclass(frozen=True)
class EnergyLedger:
    """Post-step energies plus the per-step transfer terms of the balance."""

    kinetic: float
    free: float
    interface: float
    artificial: float
    dissipation_viscous: float
    dissipation_mu: float
    dissipation_eps: float
    dissipation_art: float
    rhs_eps1: float
    rhs_eps2: float
    ito1: float
    ito2: float
    stochastic_increment: float
    residual: float


LEDGER_COLUMNS = [f.name for f in fields(EnergyLedger)]


def _energy_parts(state: SchemeState, fspec: FreeEnergySpec) -> tuple[float, float, float]:
    grid = state.rho.grid
    rv = to_physical(state.rho)[0]
    if float(np.min(rv)) <= fspec.rho_floor:
        raise PositivityError(float(np.min(rv)), t=state.t)
    uv = to_physical(state.u)
    cv = to_physical(state.c)[0]
    kinetic = 0.5 * integrate_values(grid, rv * np.sum(uv**2, axis=0))
    free = integrate_values(grid, rv * free_energy(rv, cv, fspec))
    gcv = to_physical(gradient(state.c))
    interface = 0.5 * integrate_values(grid, np.sum(gcv**2, axis=0))
    return kinetic, free, interface


def total_energy(state: SchemeState, fspec: FreeEnergySpec) -> float:
    """int [ rho |u|^2 / 2 + rho f(rho, c) + |grad c|^2 / 2 ]."""
    return float(sum(_energy_parts(state, fspec)))


def artificial_energy(state: SchemeState, params: ApproxParams) -> float:
    """sqrt(eps)/(alpha-1) int rho^alpha."""
    grid = state.rho.grid
    rv = to_physical(state.rho)[0]
    return float(
        np.sqrt(params.eps) / (params.alpha_exp - 1.0) * integrate_values(grid, rv**params.alpha_exp)
    )


def initial_ledger_row(state: SchemeState, params: ApproxParams) -> EnergyLedger:
    """Row zero: initial energies, no transfers, zero residual."""
    kin, fre, inter = _energy_parts(state, params.fspec)
    art = artificial_energy(state, params)
    return EnergyLedger(kin, fre, inter, art, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def energy_ledger_step(
    pre: SchemeState, post: SchemeState, inc: WienerIncrement, params: ApproxParams
) -> EnergyLedger:
    """Evaluate every balance entry for one step; all transfers use the pre state."""
    grid = pre.rho.grid
    fspec = params.fspec
    dt = inc.dt
    noise = params.noise

    kin1, fre1, int1 = _energy_parts(post, fspec)
    art1 = artificial_energy(post, params)
    kin0, fre0, int0 = _energy_parts(pre, fspec)
    art0 = artificial_energy(pre, params)
    d_total = (kin1 + fre1 + int1 + art1) - (kin0 + fre0 + int0 + art0)

    rv = to_physical(pre.rho)[0]
    cv = to_physical(pre.c)[0]
    uv_grad = grad_tensor(pre.u)
    sv = to_physical(stress(uv_grad, params.visc))
    gv = to_physical(uv_grad)
    diss_visc = integrate_values(grid, np.sum(sv * gv, axis=0)) * dt

    mu = chemical_potential(pre.rho, pre.c, fspec)
    gmu = to_physical(gradient(mu))
    diss_mu = integrate_values(grid, np.sum(gmu**2, axis=0)) * dt

    grad_u_sq = np.sum(gv**2, axis=0)
    diss_eps = params.eps * integrate_values(grid, rv * grad_u_sq) * dt

    grho = to_physical(gradient(pre.rho))
    grho_sq = np.sum(grho**2, axis=0)
    diss_art = (
        np.sqrt(params.eps)
        * params.eps
        * params.alpha_exp
        * integrate_values(grid, rv ** (params.alpha_exp - 2.0) * grho_sq)
        * dt
    )

    rho_f_rr = f_partials(rv, cv, fspec, "rho_f_rho_rho")
    rhs1 = -params.eps * integrate_values(grid, rho_f_rr * grho_sq) * dt
    gcv = to_physical(gradient(pre.c))
    rho_f_rc = f_partials(rv, cv, fspec, "rho_f_rho_c")
    rhs2 = -params.eps * integrate_values(grid, rho_f_rc * np.sum(grho * gcv, axis=0)) * dt

    ito1 = ito_grad_correction(pre.c, noise) * dt
    ito2 = ito_value_correction(pre.rho, pre.c, noise, fspec) * dt

    stoch = 0.0
    if noise.K > 0:
        muv = to_physical(mu)[0]
        base = rv * muv
        for i, k in enumerate(noise.modes):
            if inc.dbeta[i] != 0.0:
                stoch += (
                    noise.alphas[i]
                    * inc.dbeta[i]
                    * integrate_values(grid, base * noise.family.value(k, cv))
                )

    residual = d_total + diss_visc + diss_mu + diss_eps + diss_art - rhs1 - rhs2 - ito1 - ito2 - stoch
    return EnergyLedger(
        kinetic=kin1,
        free=fre1,
        interface=int1,
        artificial=art1,
        dissipation_viscous=diss_visc,
        dissipation_mu=diss_mu,
        dissipation_eps=diss_eps,
        dissipation_art=diss_art,
        rhs_eps1=rhs1,
        rhs_eps2=rhs2,
        ito1=ito1,
        ito2=ito2,
        stochastic_increment=stoch,
        residual=residual,
    )


def mass(state: SchemeState) -> float:
    """Total mass from the zero coefficient; exact."""
    return integral(state.rho)


def renormalized_residual(
    pre: SchemeState, post: SchemeState, params: ApproxParams, b, db, d2b
) -> float:
    """Scalar residual of the renormalized continuity identity over one step.

    For b twice differentiable on (0, inf):

        int [b(rho_post) - b(rho_pre)]
        + dt int [b'(rho) rho - b(rho)] Div [u]_R
        - eps dt int b'(rho) Lap rho       (evaluated at the pre state)

    The transport divergence integrates to zero on the torus.  b = identity
    reduces to exact mass conservation; general b has an O(dt) defect.
    """
    grid = pre.rho.grid
    rv0 = to_physical(pre.rho)[0]
    rv1 = to_physical(post.rho)[0]
    if min(float(np.min(rv0)), float(np.min(rv1))) <= params.fspec.rho_floor:
        raise PositivityError(min(float(np.min(rv0)), float(np.min(rv1))))
    dt = post.t - pre.t
    u_r, _ = cutoff(pre.u, params.R)
    div_u = to_physical(divergence(u_r))[0]
    lap_rho = to_physical(laplacian(pre.rho))[0]
    d_b = integrate_values(grid, b(rv1) - b(rv0))
    defect = integrate_values(grid, (db(rv0) * rv0 - b(rv0)) * div_u)
    diffusion = params.eps * integrate_values(grid, db(rv0) * lap_rho)
    return float(d_b + dt * defect - dt * diffusion)


def concentration_momentum_residual(
    pre: SchemeState, post: SchemeState, inc: WienerIncrement, params: ApproxParams, phi: SpectralField
) -> float:
    """One-step residual of the mass-weighted concentration identity.

    For a time-independent test function phi, the evolved pair should satisfy

        d int rho c phi = [ int rho c [u]_R . grad phi - int grad mu . grad phi
                            - eps int grad rho . grad(c phi) ] dt
                          + (int rho sigma(c) phi) dW

    with every transfer at the pre-step state.  No Ito correction appears:
    the density has bounded variation, so the quadratic covariation of rho
    and c vanishes.  The concentration is evolved in its own form, not this
    one, so the residual measures the discrete consistency between the two
    formulations; it is O(dt^2) per step plus projection commutators.
    """
    grid = pre.rho.grid
    if not phi.is_scalar:
        raise ValueError("test function must be scalar")
    dt = inc.dt
    phi_v = to_physical(phi)[0]
    gphi = to_physical(gradient(phi))

    rv0, cv0 = to_physical(pre.rho)[0], to_physical(pre.c)[0]
    rv1, cv1 = to_physical(post.rho)[0], to_physical(post.c)[0]
    d_pair = integrate_values(grid, (rv1 * cv1 - rv0 * cv0) * phi_v)

    u_r, _ = cutoff(pre.u, params.R)
    uv = to_physical(u_r)
    transport = integrate_values(grid, rv0 * cv0 * np.sum(uv * gphi, axis=0))

    mu = chemical_potential(pre.rho, pre.c, params.fspec)
    gmu = to_physical(gradient(mu))
    diffusion = integrate_values(grid, np.sum(gmu * gphi, axis=0))

    grho = to_physical(gradient(pre.rho))
    gc = to_physical(gradient(pre.c))
    grad_cphi = gc * phi_v + cv0 * gphi
    regularization = params.eps * integrate_values(grid, np.sum(grho * grad_cphi, axis=0))

    stoch = 0.0
    noise = params.noise
    if noise.K > 0:
        base = rv0 * phi_v
        for i, k in enumerate(noise.modes):
            if inc.dbeta[i] != 0.0:
                stoch += noise.alphas[i] * inc.dbeta[i] * integrate_values(
                    grid, base * noise.family.value(k, cv0)
                )
    return float(d_pair - dt * (transport - diffusion - regularization) - stoch)


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    margin: float
    witness: object
    passed: bool
    degenerate: bool = False
    constant: float = float("nan")


def korn_check(u: SpectralField, visc: ViscositySpec) -> InequalityReport:
    """Verify int S(grad u):grad u >= C int |grad u|^2.

    The reference constant is nu_shear (2 - 2/N) for N >= 2; in 1D the shear
    part is identically deviatoric-free and only the bulk viscosity
    dissipates, so the reference constant is nu_bulk.
    """
    grid = u.grid
    n = grid.dim
    g = grad_tensor(u)
    gv = to_physical(g)
    sv = to_physical(stress(g, visc))
    lhs_raw = integrate_values(grid, np.sum(gv**2, axis=0))
    rhs = integrate_values(grid, np.sum(sv * gv, axis=0))
    c_ref = visc.nu_shear * (2.0 - 2.0 / n) + (visc.nu_bulk if n == 1 else 0.0)
    if lhs_raw <= 1e-28:
        return InequalityReport(0.0, rhs, rhs, u, passed=rhs >= -1e-12, degenerate=True, constant=c_ref)
    lhs = c_ref * lhs_raw
    margin = rhs - lhs
    passed = margin >= -1e-10 * max(abs(rhs), abs(lhs), 1.0)
    return InequalityReport(lhs, rhs, margin, u, passed=passed, constant=rhs / lhs_raw)


def poincare_check(
    rho: SpectralField, v: SpectralField, total_mass: float, gamma: float, fitted_constant: float | None = None
) -> InequalityReport:
    """Verify ||v||^2 <= C [(1 + ||rho||_{L^gamma}^2) ||grad v||^2 + |int rho v|^2].

    With no constant supplied, reports the smallest admissible C for this
    sample (the fitted ratio); with one supplied, checks the inequality at
    that C.  Requires rho >= 0 with int rho >= total_mass > 0 and
    gamma > 2N/(N+2).
    """
    grid = rho.grid
    n = grid.dim
    if gamma <= 2.0 * n / (n + 2.0):
        raise ValueError(f"gamma = {gamma} violates gamma > 2N/(N+2) = {2.0 * n / (n + 2.0):.3g}")
    rv = to_physical(rho)[0]
    if float(np.min(rv)) < -1e-12:
        raise ValueError("density must be nonnegative")
    got_mass = integral(rho)
    if got_mass < total_mass - 1e-12:
        raise ValueError(f"hypothesis violated: int rho = {got_mass:.6g} < M = {total_mass:.6g}")
    vv = to_physical(v)[0]
    lhs = integrate_values(grid, vv**2)
    rho_lg = integrate_values(grid, rv**gamma) ** (1.0 / gamma)
    gvv = to_physical(gradient(v))
    grad_sq = integrate_values(grid, np.sum(gvv**2, axis=0))
    mean_term = integrate_values(grid, rv * vv) ** 2
    rhs_raw = (1.0 + rho_lg**2) * grad_sq + mean_term
    if rhs_raw <= 1e-28:
        return InequalityReport(lhs, 0.0, -lhs, v, passed=lhs <= 1e-24, degenerate=True)
    ratio = lhs / rhs_raw
    c_fit = fitted_constant if fitted_constant is not None else ratio
    rhs = c_fit * rhs_raw
    margin = rhs - lhs
    passed = math.isfinite(ratio) and margin >= -1e-10 * max(abs(rhs), abs(lhs), 1.0)
    return InequalityReport(lhs, rhs, margin, v, passed=passed, constant=ratio)


def holder_estimate(snapshots: list[tuple[float, SpectralField]], omega: float, ell: float | None = None) -> float:
    """Worst Holder quotient of the momentum-of-concentration trajectory.

    snapshots: (time, rho*c field) pairs; the norm is the negative Sobolev
    norm with weights (1 + |k|^2)^(-ell).  Default ell = ceil((N+2)/2) + 1.
    """
    if len(snapshots) < 2:
        raise ValueError("at least 2 snapshots required")
    if not 0.0 < omega < 0.5:
        raise ValueError(f"omega must lie in (0, 1/2), got {omega}")
    grid = snapshots[0][1].grid
    if ell is None:
        ell = math.ceil((grid.dim + 2) / 2) + 1
    worst = 0.0
    for i in range(len(snapshots)):
        t1, f1 = snapshots[i]
        for j in range(i + 1, len(snapshots)):
            t2, f2 = snapshots[j]
            if t1 == t2:
                continue
            diff = SpectralField(grid, f1.coeffs - f2.coeffs)
            q = norm_sobolev(diff, -ell) / abs(t1 - t2) ** omega
            worst = max(worst, q)
    return worst


def v15_functional(state: SchemeState, gamma: float) -> float:
    """int [rho |u|^2 + rho^gamma + rho c^2 + |grad c|^2], the sup-bound integrand."""
    grid = state.rho.grid
    rv = to_physical(state.rho)[0]
    uv = to_physical(state.u)
    cv = to_physical(state.c)[0]
    gcv = to_physical(gradient(state.c))
    return integrate_values(
        grid, rv * np.sum(uv**2, axis=0) + rv**gamma + rv * cv**2 + np.sum(gcv**2, axis=0)
    )


def ledger_to_csv(rows: list[EnergyLedger]) -> str:
    """One row per step, columns exactly the ledger fields; 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LEDGER_COLUMNS)
    for row in rows:
        writer.writerow([f"{getattr(row, c):.17g}" for c in LEDGER_COLUMNS])
    return buf.getvalue()


def ledger_from_csv(text: str) -> list[EnergyLedger]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != LEDGER_COLUMNS:
        raise ValueError(f"unexpected ledger header {header}")
    return [EnergyLedger(*(float(x) for x in row)) for row in reader if row]


def audit_ledger_rows(rows: list[EnergyLedger], tol: float = 1e-9) -> list[str]:
    """Re-derive each residual from consecutive rows and check sign constraints.

    Row zero must carry the initial energies with zero transfers.  Returns a
    list of violations naming the offending step.
    """
    problems = []
    if not rows:
        return ["empty ledger"]
    r0 = rows[0]
    if any(
        getattr(r0, c) != 0.0
        for c in LEDGER_COLUMNS
        if c not in ("kinetic", "free", "interface", "artificial")
    ):
        problems.append("step 0: initial row must have zero transfer entries")
    for i, row in enumerate(rows):
        for name in ("kinetic", "interface", "artificial", "dissipation_viscous", "dissipation_mu",
                     "dissipation_eps", "dissipation_art"):
            if getattr(row, name) < -tol:
                problems.append(f"step {i}: {name} negative ({getattr(row, name):.3e})")
        if i == 0:
            continue
        prev = rows[i - 1]
        d_total = (row.kinetic + row.free + row.interface + row.artificial) - (
            prev.kinetic + prev.free + prev.interface + prev.artificial
        )
        recomputed = (
            d_total
            + row.dissipation_viscous
            + row.dissipation_mu
            + row.dissipation_eps
            + row.dissipation_art
            - row.rhs_eps1
            - row.rhs_eps2
            - row.ito1
            - row.ito2
            - row.stochastic_increment
        )
        scale = max(1.0, abs(row.kinetic) + abs(row.free) + abs(row.interface))
        if abs(recomputed - row.residual) > tol * scale:
            problems.append(
                f"step {i}: stored residual {row.residual:.6e} disagrees with recomputed {recomputed:.6e}"
            )
    return problems
