"""Plain-text run configuration: sections, ``key = value`` lines, # comments.

Grammar (all keys optional; defaults shown by ``print-config``):

    [grid]        dim, modes
    [scheme]      eps, alpha_exp, R, m, n, dt, cfl
    [free_energy] a, gamma, well, well_cstar, well_kappa, well_lambda,
                  mixing, mixing_h0, rho_floor
    [viscosity]   shear, bulk
    [noise]       kind (geometric|off), modes, alpha0, sigma (sine|constant),
                  sigma_value, seed
    [initial]     mass, rho_amp, rho_band, u_amp, u_band, c_amp, c_band, c_mean
    [run]         horizon, snapshot_stride, paths, betas
    [output]      dir

Validation is collected, not short-circuited: a rejected configure lists
every violation.  Floats are echoed with 17 significant digits so a printed
configuration parses back to the identical run.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .constitutive import DoubleWell, FreeEnergySpec, QuadraticWell, TanhMixing, ViscositySpec, ZeroFunction
from .errors import ConfigError
from .noise import ConstantDiffusion, SineDiffusion, geometric_noise, silent_noise
from .scheme import ApproxParams, InitialData
from .spectral import TorusGrid

__all__ = ["RunConfig", "parse_config", "format_config", "default_config"]

_DEFAULTS: dict[str, dict[str, object]] = {
    "grid": {"dim": 1, "modes": 32},
    "scheme": {"eps": 1e-2, "alpha_exp": 5.0, "R": 5.0, "m": 6, "n": 8, "dt": 1e-5, "cfl": 1.0},
    "free_energy": {
        "a": 1.0,
        "gamma": 4.0,
        "well": "double_well",
        "well_cstar": 2.0,
        "well_kappa": 1.0,
        "well_lambda": 1.0,
        "mixing": "tanh",
        "mixing_h0": 0.1,
        "rho_floor": 1e-8,
    },
    "viscosity": {"shear": 1.0, "bulk": 0.0},
    "noise": {"kind": "geometric", "modes": 20, "alpha0": 1.0, "sigma": "sine", "sigma_value": 1.0, "seed": 20260809},
    "initial": {
        "mass": None,  # (2 pi)^dim unless given
        "rho_amp": 0.05,
        "rho_band": 2,
        "u_amp": 0.05,
        "u_band": 2,
        "c_amp": 0.3,
        "c_band": 2,
        "c_mean": 0.0,
    },
    "run": {"horizon": 2e-3, "snapshot_stride": 50, "paths": 64, "betas": "1,2"},
    "output": {"dir": "out"},
}

_INT_KEYS = {
    ("grid", "dim"),
    ("grid", "modes"),
    ("scheme", "m"),
    ("scheme", "n"),
    ("noise", "modes"),
    ("noise", "seed"),
    ("initial", "rho_band"),
    ("initial", "u_band"),
    ("initial", "c_band"),
    ("run", "snapshot_stride"),
    ("run", "paths"),
}
_STR_KEYS = {
    ("free_energy", "well"),
    ("free_energy", "mixing"),
    ("noise", "kind"),
    ("noise", "sigma"),
    ("run", "betas"),
    ("output", "dir"),
}


@dataclass(frozen=True)
class RunConfig:
    grid: TorusGrid
    params: ApproxParams
    initial: InitialData
    horizon: float
    snapshot_stride: int
    paths: int
    betas: tuple[int, ...]
    outdir: str
    raw: dict  # resolved section -> key -> value, the printable form


def default_config() -> "RunConfig":
    return parse_config("")


def _coerce(section: str, key: str, text: str, problems: list[str]):
    if (section, key) in _STR_KEYS:
        return text.strip()
    if (section, key) in _INT_KEYS:
        try:
            return int(text)
        except ValueError:
            problems.append(f"[{section}] {key}: expected an integer, got {text!r}")
            return None
    try:
        return float(text)
    except ValueError:
        problems.append(f"[{section}] {key}: expected a number, got {text!r}")
        return None


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate; raises ConfigError listing every violation."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None

    problems: list[str] = []
    resolved: dict[str, dict[str, object]] = {s: dict(kv) for s, kv in _DEFAULTS.items()}
    for section in parser.sections():
        if section not in _DEFAULTS:
            problems.append(f"[{section}]: unknown section")
            continue
        for key, value in parser.items(section):
            if key not in _DEFAULTS[section]:
                problems.append(f"[{section}] {key}: unknown key")
                continue
            coerced = _coerce(section, key, value, problems)
            if coerced is not None:
                resolved[section][key] = coerced

    g = resolved["grid"]
    if g["dim"] not in (1, 2):
        problems.append(f"[grid] dim must be 1 or 2, got {g['dim']}")
    if not (isinstance(g["modes"], int) and g["modes"] > 0 and g["modes"] % 2 == 0):
        problems.append(f"[grid] modes must be a positive even integer, got {g['modes']}")

    s = resolved["scheme"]
    if s["eps"] <= 0:
        problems.append(f"[scheme] eps must be positive, got {s['eps']}")
    if s["alpha_exp"] <= 4:
        problems.append(f"[scheme] alpha_exp must exceed 4 (artificial-pressure exponent), got {s['alpha_exp']}")
    if s["R"] <= 0:
        problems.append(f"[scheme] R must be positive, got {s['R']}")
    if s["dt"] <= 0:
        problems.append(f"[scheme] dt must be positive, got {s['dt']}")
    if s["cfl"] <= 0:
        problems.append(f"[scheme] cfl must be positive, got {s['cfl']}")
    kmax = g["modes"] // 2 if isinstance(g["modes"], int) else 0
    for name in ("m", "n"):
        v = s[name]
        if not (isinstance(v, int) and 1 <= v):
            problems.append(f"[scheme] {name} must be a positive integer, got {v}")
        elif kmax and v > kmax:
            problems.append(f"[scheme] {name} = {v} exceeds the grid truncation {kmax}")

    fe = resolved["free_energy"]
    if fe["a"] <= 0:
        problems.append(f"[free_energy] a must be positive, got {fe['a']}")
    if fe["gamma"] <= 3:
        problems.append(f"[free_energy] gamma must exceed 3, got {fe['gamma']}")
    if fe["rho_floor"] <= 0:
        problems.append(f"[free_energy] rho_floor must be positive, got {fe['rho_floor']}")
    well = None
    if fe["well"] == "double_well":
        if fe["well_cstar"] <= 0:
            problems.append(f"[free_energy] well_cstar must be positive, got {fe['well_cstar']}")
        elif fe["well_kappa"] <= 0:
            problems.append(f"[free_energy] well_kappa must be positive, got {fe['well_kappa']}")
        else:
            well = DoubleWell(cstar=fe["well_cstar"], kappa=fe["well_kappa"])
    elif fe["well"] == "quadratic":
        well = QuadraticWell(lam=fe["well_lambda"])
    elif fe["well"] == "zero":
        well = ZeroFunction()
    else:
        problems.append(f"[free_energy] well must be double_well, quadratic or zero, got {fe['well']!r}")
    if fe["mixing"] == "tanh":
        mixing = TanhMixing(h0=fe["mixing_h0"])
    elif fe["mixing"] == "zero":
        mixing = ZeroFunction()
    else:
        mixing = None
        problems.append(f"[free_energy] mixing must be tanh or zero, got {fe['mixing']!r}")
    fspec = None
    if well is not None and mixing is not None and fe["gamma"] > 3 and fe["a"] > 0 and fe["rho_floor"] > 0:
        fspec = FreeEnergySpec(a=fe["a"], gamma=fe["gamma"], mixing=mixing, well=well, rho_floor=fe["rho_floor"])
        problems.extend(f"[free_energy] {p}" for p in fspec.validate())

    vs = resolved["viscosity"]
    visc = None
    if vs["shear"] <= 0:
        problems.append(f"[viscosity] shear must be positive, got {vs['shear']}")
    elif vs["bulk"] < 0:
        problems.append(f"[viscosity] bulk must be nonnegative, got {vs['bulk']}")
    else:
        visc = ViscositySpec(nu_shear=vs["shear"], nu_bulk=vs["bulk"])

    nz = resolved["noise"]
    noise = None
    if nz["kind"] == "off":
        noise = silent_noise(seed=nz["seed"])
    elif nz["kind"] == "geometric":
        family = None
        if nz["sigma"] == "sine":
            family = SineDiffusion()
        elif nz["sigma"] == "constant":
            family = ConstantDiffusion(nz["sigma_value"])
        else:
            problems.append(f"[noise] sigma must be sine or constant, got {nz['sigma']!r}")
        if nz["alpha0"] <= 0:
            problems.append(f"[noise] alpha0 must be positive, got {nz['alpha0']}")
        if family is not None and nz["alpha0"] > 0:
            try:
                noise = geometric_noise(K=nz["modes"], alpha0=nz["alpha0"], family=family, seed=nz["seed"])
            except ValueError as exc:
                problems.append(f"[noise] {exc}")
            if noise is not None:
                problems.extend(f"[noise] {p}" for p in noise.validate_bounds())
    else:
        problems.append(f"[noise] kind must be geometric or off, got {nz['kind']!r}")

    init = resolved["initial"]
    if init["mass"] is None:
        init["mass"] = float((2.0 * np.pi) ** g["dim"]) if g["dim"] in (1, 2) else 2.0 * np.pi
    if init["mass"] <= 0:
        problems.append(f"[initial] mass must be positive, got {init['mass']}")
    if not 0 <= init["rho_amp"] < 1:
        problems.append(f"[initial] rho_amp must lie in [0, 1), got {init['rho_amp']}")
    for name in ("u_amp", "c_amp"):
        if init[name] < 0:
            problems.append(f"[initial] {name} must be nonnegative, got {init[name]}")
    for name in ("rho_band", "u_band", "c_band"):
        v = init[name]
        if not (isinstance(v, int) and v >= 0):
            problems.append(f"[initial] {name} must be a nonnegative integer, got {v}")
        elif kmax and v > kmax:
            problems.append(f"[initial] {name} = {v} exceeds the grid truncation {kmax}")

    r = resolved["run"]
    if r["horizon"] <= 0:
        problems.append(f"[run] horizon must be positive, got {r['horizon']}")
    elif s["dt"] > 0:
        steps = r["horizon"] / s["dt"]
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            problems.append(f"[run] horizon = {r['horizon']} is not an integral number of steps at dt = {s['dt']}")
    if not (isinstance(r["snapshot_stride"], int) and r["snapshot_stride"] >= 0):
        problems.append(f"[run] snapshot_stride must be a nonnegative integer, got {r['snapshot_stride']}")
    if not (isinstance(r["paths"], int) and r["paths"] >= 1):
        problems.append(f"[run] paths must be a positive integer, got {r['paths']}")
    betas: tuple[int, ...] = ()
    try:
        betas = tuple(int(b) for b in str(r["betas"]).split(",") if b.strip())
        if not betas or any(b < 1 for b in betas):
            raise ValueError
    except ValueError:
        problems.append(f"[run] betas must be a comma list of positive integers, got {r['betas']!r}")

    if problems:
        raise ConfigError(problems)

    grid = TorusGrid(dim=g["dim"], modes_per_dim=g["modes"])
    params = ApproxParams(
        eps=s["eps"],
        alpha_exp=s["alpha_exp"],
        R=s["R"],
        m=s["m"],
        n=s["n"],
        dt=s["dt"],
        cfl=s["cfl"],
        visc=visc,
        fspec=fspec,
        noise=noise,
    )
    initial = InitialData(
        mass=init["mass"],
        rho_amp=init["rho_amp"],
        rho_band=init["rho_band"],
        u_amp=init["u_amp"],
        u_band=init["u_band"],
        c_amp=init["c_amp"],
        c_band=init["c_band"],
        c_mean=init["c_mean"],
    )
    return RunConfig(
        grid=grid,
        params=params,
        initial=initial,
        horizon=r["horizon"],
        snapshot_stride=r["snapshot_stride"],
        paths=r["paths"],
        betas=betas,
        outdir=str(resolved["output"]["dir"]),
        raw=resolved,
    )


def _format_value(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def format_config(config: RunConfig) -> str:
    """Emit the resolved configuration; parse(format(c)) reproduces c exactly."""
    buf = io.StringIO()
    for section, kv in config.raw.items():
        buf.write(f"[{section}]\n")
        for key, value in kv.items():
            buf.write(f"{key} = {_format_value(value)}\n")
        buf.write("\n")
    return buf.getvalue()
