"""Real trigonometric-polynomial fields on the flat torus [-pi, pi)^N, N = 1, 2.

A field is stored as the half-spectrum of its Fourier-series coefficients
c_k (the coefficients of e^{i k.x}), restricted to the band |k_i| <= kmax.
Conjugate symmetry c_{-k} = conj(c_k) is implied by the storage and enforced
on the one stored line that carries both signs, so every field is real by
construction.  All differential operators act exactly on coefficients;
pointwise nonlinearities go through a padded collocation grid wide enough
that quadratic products are alias-free after re-truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.fft import next_fast_len

__all__ = [
    "TorusGrid",
    "SpectralField",
    "zeros",
    "constant",
    "from_coeffs",
    "to_physical",
    "to_spectral",
    "project",
    "derivative",
    "gradient",
    "divergence",
    "laplacian",
    "bilaplacian",
    "grad_tensor",
    "div_tensor",
    "multiply",
    "dot",
    "outer",
    "pointwise",
    "inner_product",
    "norm_l2",
    "norm_sobolev",
    "integral",
    "integrate_values",
    "random_band_limited",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform collocation grid on [-pi, pi)^N with a fixed spectral band.

    ``modes_per_dim`` must be even and positive; the retained wavevectors
    satisfy |k_i| <= modes_per_dim // 2.  The collocation count is padded
    beyond twice the band so products of two band-limited fields re-truncate
    without aliasing (2/3-rule padding).
    """

    dim: int
    modes_per_dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.modes_per_dim <= 0 or self.modes_per_dim % 2 != 0:
            raise ValueError(f"modes_per_dim must be a positive even integer, got {self.modes_per_dim}")

    @property
    def kmax(self) -> int:
        return self.modes_per_dim // 2

    @cached_property
    def points_per_dim(self) -> int:
        # exact dealiased quadratic products need >= 3*kmax + 1 points per dim
        return next_fast_len(3 * self.kmax + 1, real=True)

    @property
    def pshape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def band_shape(self) -> tuple[int, ...]:
        k = self.kmax
        return (k + 1,) if self.dim == 1 else (2 * k + 1, k + 1)

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.points_per_dim

    @property
    def volume(self) -> float:
        return (2.0 * np.pi) ** self.dim

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Collocation coordinates per axis, uniform on [-pi, pi)."""
        x = -np.pi + self.spacing * np.arange(self.points_per_dim)
        return (x,) * self.dim

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    @cached_property
    def k_axes(self) -> tuple[np.ndarray, ...]:
        """Wavevector component arrays broadcast over the band shape."""
        k = self.kmax
        if self.dim == 1:
            return (np.arange(k + 1, dtype=float),)
        kx = np.arange(-k, k + 1, dtype=float)[:, None]
        ky = np.arange(0, k + 1, dtype=float)[None, :]
        return (kx, ky)

    @cached_property
    def k_squared(self) -> np.ndarray:
        out = np.zeros(self.band_shape)
        for ka in self.k_axes:
            out = out + ka**2
        return out

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each stored mode in the full two-sided spectrum."""
        w = np.full(self.band_shape, 2.0)
        if self.dim == 1:
            w[0] = 1.0
        else:
            w[:, 0] = 1.0
        return w

    @cached_property
    def _twist(self) -> np.ndarray:
        # the FFT references x = 0 while the grid starts at -pi; the basis
        # change multiplies mode k by (-1)^(sum |k_i|)
        axes = self.k_axes
        t = np.ones(self.band_shape)
        for ka in axes:
            t = t * np.where(np.abs(ka).astype(int) % 2 == 0, 1.0, -1.0)
        return t


@dataclass(frozen=True)
class SpectralField:
    """Immutable real field; ``coeffs`` has shape (ncomp,) + grid.band_shape."""

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = self.grid.band_shape
        if self.coeffs.ndim != len(expected) + 1 or self.coeffs.shape[1:] != expected:
            raise ValueError(f"coefficient shape {self.coeffs.shape} does not match band {expected}")
        if self.coeffs.dtype != np.complex128:
            raise ValueError(f"coefficients must be complex128, got {self.coeffs.dtype}")
        self.coeffs.setflags(write=False)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.ncomp == 1


def _symmetrize(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Enforce exact conjugate symmetry on the self-paired stored line."""
    if grid.dim == 1:
        coeffs[..., 0] = coeffs[..., 0].real
    else:
        line = coeffs[..., :, 0]
        coeffs[..., :, 0] = 0.5 * (line + line[..., ::-1].conj())
        k = grid.kmax
        coeffs[..., k, 0] = coeffs[..., k, 0].real
    return coeffs


def from_coeffs(grid: TorusGrid, coeffs: np.ndarray) -> SpectralField:
    """Build a field from band coefficients, adding a component axis to scalars."""
    arr = np.asarray(coeffs, dtype=np.complex128)
    if arr.shape == grid.band_shape:
        arr = arr[None, ...]
    arr = _symmetrize(grid, arr.copy())
    return SpectralField(grid, arr)


def zeros(grid: TorusGrid, ncomp: int = 1) -> SpectralField:
    return SpectralField(grid, np.zeros((ncomp,) + grid.band_shape, dtype=np.complex128))


def constant(grid: TorusGrid, value: float) -> SpectralField:
    c = np.zeros((1,) + grid.band_shape, dtype=np.complex128)
    if grid.dim == 1:
        c[0, 0] = value
    else:
        c[0, grid.kmax, 0] = value
    return SpectralField(grid, c)


def _scatter(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Place band coefficients into an rfftn-layout buffer."""
    npts = grid.points_per_dim
    k = grid.kmax
    ncomp = coeffs.shape[0]
    tw = coeffs * grid._twist
    if grid.dim == 1:
        buf = np.zeros((ncomp, npts // 2 + 1), dtype=np.complex128)
        buf[:, : k + 1] = tw
    else:
        buf = np.zeros((ncomp, npts, npts // 2 + 1), dtype=np.complex128)
        buf[:, : k + 1, : k + 1] = tw[:, k:, :]
        buf[:, npts - k :, : k + 1] = tw[:, :k, :]
    return buf


def _gather(grid: TorusGrid, buf: np.ndarray) -> np.ndarray:
    npts = grid.points_per_dim
    k = grid.kmax
    ncomp = buf.shape[0]
    if grid.dim == 1:
        out = buf[:, : k + 1].copy()
    else:
        out = np.empty((ncomp, 2 * k + 1, k + 1), dtype=np.complex128)
        out[:, k:, :] = buf[:, : k + 1, : k + 1]
        out[:, :k, :] = buf[:, npts - k :, : k + 1]
    return out * grid._twist


def to_physical(f: SpectralField) -> np.ndarray:
    """Values on the collocation grid, shape (ncomp,) + grid.pshape."""
    grid = f.grid
    axes = tuple(range(1, grid.dim + 1))
    buf = _scatter(grid, f.coeffs)
    return np.fft.irfftn(buf, s=grid.pshape, axes=axes, norm="forward")


def to_spectral(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    """Forward transform of real grid values, truncated to the band."""
    vals = np.asarray(values, dtype=float)
    if vals.shape == grid.pshape:
        vals = vals[None, ...]
    if vals.shape[1:] != grid.pshape:
        raise ValueError(f"value shape {values.shape} does not match collocation grid {grid.pshape}")
    axes = tuple(range(1, grid.dim + 1))
    buf = np.fft.rfftn(vals, axes=axes, norm="forward")
    coeffs = _symmetrize(grid, _gather(grid, buf))
    return SpectralField(grid, coeffs)


def project(f: SpectralField, order: int) -> SpectralField:
    """Orthogonal projection onto the subspace with all |k_i| <= order."""
    grid = f.grid
    if not 0 <= order <= grid.kmax:
        raise ValueError(f"projection order {order} outside [0, {grid.kmax}]")
    mask = np.ones(grid.band_shape, dtype=bool)
    for ka in grid.k_axes:
        mask &= np.abs(ka) <= order
    return SpectralField(grid, np.where(mask, f.coeffs, 0.0))


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar field; output has grid.dim components."""
    if not f.is_scalar:
        raise ValueError("gradient expects a scalar field")
    grid = f.grid
    comps = [1j * ka * f.coeffs[0] for ka in grid.k_axes]
    return SpectralField(grid, np.stack(comps))


def divergence(f: SpectralField) -> SpectralField:
    # in 1D a vector has a single component, so the scalar/vector distinction
    # collapses; in 2D a scalar input is rejected here
    grid = f.grid
    if f.ncomp != grid.dim:
        raise ValueError(f"divergence expects {grid.dim} components, got {f.ncomp} (scalar input?)")
    out = np.zeros(grid.band_shape, dtype=np.complex128)
    for i, ka in enumerate(grid.k_axes):
        out += 1j * ka * f.coeffs[i]
    return SpectralField(grid, out[None, ...])


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.k_squared * f.coeffs)


def bilaplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.grid.k_squared**2 * f.coeffs)


_KINDS = {"gradient": gradient, "divergence": divergence, "laplacian": laplacian, "bilaplacian": bilaplacian}


def derivative(f: SpectralField, kind: str) -> SpectralField:
    try:
        op = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown derivative kind {kind!r}") from None
    return op(f)


def grad_tensor(u: SpectralField) -> SpectralField:
    """Velocity gradient du_i/dx_j of a vector field, components flattened as i*N+j."""
    grid = u.grid
    if u.ncomp != grid.dim:
        raise ValueError("grad_tensor expects a vector field")
    comps = [1j * grid.k_axes[j] * u.coeffs[i] for i in range(grid.dim) for j in range(grid.dim)]
    return SpectralField(grid, np.stack(comps))


def div_tensor(t: SpectralField) -> SpectralField:
    """Row-wise divergence (Div T)_i = d T_ij / dx_j of a flattened tensor field."""
    grid = t.grid
    n = grid.dim
    if t.ncomp != n * n:
        raise ValueError(f"div_tensor expects {n * n} components, got {t.ncomp}")
    comps = []
    for i in range(n):
        out = np.zeros(grid.band_shape, dtype=np.complex128)
        for j in range(n):
            out += 1j * grid.k_axes[j] * t.coeffs[i * n + j]
        comps.append(out)
    return SpectralField(grid, np.stack(comps))


def _check_same_grid(f: SpectralField, g: SpectralField):
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased pointwise product; scalars broadcast against vectors."""
    _check_same_grid(f, g)
    fv, gv = to_physical(f), to_physical(g)
    if f.ncomp == g.ncomp:
        prod = fv * gv
    elif f.is_scalar:
        prod = fv[0] * gv
    elif g.is_scalar:
        prod = fv * gv[0]
    else:
        raise ValueError(f"incompatible component counts {f.ncomp} and {g.ncomp}")
    return to_spectral(f.grid, prod)


def dot(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased pointwise dot product of two vector fields."""
    _check_same_grid(f, g)
    if f.ncomp != g.ncomp:
        raise ValueError("dot requires matching component counts")
    prod = np.sum(to_physical(f) * to_physical(g), axis=0)
    return to_spectral(f.grid, prod)


def outer(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased outer product (f tensor g)_ij = f_i g_j, flattened as i*N+j."""
    _check_same_grid(f, g)
    fv, gv = to_physical(f), to_physical(g)
    prod = np.stack([fv[i] * gv[j] for i in range(f.ncomp) for j in range(g.ncomp)])
    return to_spectral(f.grid, prod)


def pointwise(grid: TorusGrid, fn, *fields: SpectralField) -> SpectralField:
    """Apply ``fn`` to the physical values of the given fields, re-truncate.

    Used for compositions of degree higher than two (powers of the density,
    free-energy derivatives); these accept truncation error but see no
    aliasing of retained modes beyond it.
    """
    vals = [to_physical(f) for f in fields]
    return to_spectral(grid, fn(*vals))


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product over the torus, summed over components."""
    _check_same_grid(f, g)
    if f.ncomp != g.ncomp:
        raise ValueError("inner product requires matching component counts")
    w = f.grid.parseval_weights
    return float(f.grid.volume * np.sum(w * (f.coeffs * g.coeffs.conj()).real))


def norm_l2(f: SpectralField) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def norm_sobolev(f: SpectralField, order: float) -> float:
    """Sobolev norm with coefficient weights (1 + |k|^2)^order; order may be negative."""
    w = f.grid.parseval_weights * (1.0 + f.grid.k_squared) ** order
    val = f.grid.volume * np.sum(w * np.abs(f.coeffs) ** 2)
    return float(np.sqrt(max(val, 0.0)))


def integral(f: SpectralField) -> float:
    """Integral over the torus, exact from the zero mode."""
    grid = f.grid
    if not f.is_scalar:
        raise ValueError("integral expects a scalar field")
    k0 = f.coeffs[0, 0] if grid.dim == 1 else f.coeffs[0, grid.kmax, 0]
    return float(grid.volume * k0.real)


def integrate_values(grid: TorusGrid, values: np.ndarray) -> float:
    """Uniform-grid quadrature of physical values over the torus."""
    return float(np.sum(values) * grid.spacing**grid.dim)


def random_band_limited(
    grid: TorusGrid,
    rng: np.random.Generator,
    ncomp: int = 1,
    band: int = 2,
    amplitude: float = 1.0,
    zero_mean: bool = True,
) -> SpectralField:
    """Random field supported on |k_i| <= band, scaled to the given sup norm."""
    if band > grid.kmax:
        raise ValueError(f"band {band} exceeds grid truncation {grid.kmax}")
    shape = (ncomp,) + grid.band_shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    f = project(from_coeffs(grid, raw), band)
    coeffs = f.coeffs.copy()
    if zero_mean:
        if grid.dim == 1:
            coeffs[:, 0] = 0.0
        else:
            coeffs[:, grid.kmax, 0] = 0.0
    f = SpectralField(grid, coeffs)
    sup = np.max(np.abs(to_physical(f)))
    if sup == 0.0:
        return f
    return SpectralField(grid, coeffs * (amplitude / sup))
