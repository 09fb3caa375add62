"""Spectral machinery on the domain (0,1)^2 x (-h, h).

Horizontal directions are doubly periodic and use a Fourier basis.  The
vertical direction uses an explicit parity basis: even fields are expanded in
``cos(m*pi*z/h)`` and odd fields in ``sin(m*pi*z/h)``, so the reflection
symmetry about ``z = 0`` holds by construction.

Coefficient layout
------------------
A :class:`SpectralField3D` stores complex coefficients ``c[ix, iy, m]`` of shape
``(nx, ny, nz)`` with horizontal wavenumbers in FFT order
(``kx = 0, 1, ..., nx/2-1, -nx/2, ..., -1``).  The represented field is::

    f(x, y, z) = sum c[kx, ky, m] exp(2 pi i (kx x + ky y)) Z_m(z)

with ``Z_m = cos(m pi z / h)`` (even) or ``sin(m pi z / h)`` (odd).

Physical grids
--------------
The full-domain collocation grid has ``2*N`` uniformly spaced vertical points
``z_j = -h + j h / N`` (``j = 0 .. 2N-1``), periodic with period ``2h``.  Internally,
parity lets us work on the half column ``j = 0 .. N`` (``z`` in ``[-h, 0]``), where
the trapezoid rule makes the cos/sin bases discretely orthogonal (DCT-I/DST-I).
Quadratic products are evaluated on a padded column (``N >= (3 nz - 2) / 2``) and
projected back, which together with the horizontal 2/3 truncation makes
products of retained modes alias-free.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
import scipy.fft as sfft

Parity = Literal["even", "odd"]
Axis = Literal["x", "y", "z"]

PARITY_TOL = 1e-8
SOLVABILITY_TOL = 1e-10


def fft_workers() -> int:
    """Worker count for scipy.fft, bounded by ``APES_THREADS`` if set."""
    env = os.environ.get("APES_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class ParityError(ValueError):
    """Physical data does not have the declared vertical symmetry."""


class SolvabilityError(ValueError):
    """Right-hand side of a periodic Poisson problem has nonzero mean."""


def flip_parity(parity: Parity) -> Parity:
    return "odd" if parity == "even" else "even"


def product_parity(a: Parity, b: Parity) -> Parity:
    return "even" if a == b else "odd"


@dataclass(frozen=True)
class Grid:
    """Resolution and geometry.  Horizontal periods are fixed at 1 x 1.

    ``nx``, ``ny`` are horizontal mode counts (even, >= 8); ``nz`` is the number
    of vertical basis functions (``m = 0 .. nz-1``).
    """

    nx: int
    ny: int
    nz: int
    h: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if n < 8 or n % 2:
                raise ValueError(f"{name} must be even and >= 8, got {n}")
        if self.nz < 4:
            raise ValueError(f"nz must be >= 4, got {self.nz}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def kx(self) -> np.ndarray:
        return np.fft.fftfreq(self.nx, 1.0 / self.nx)

    @property
    def ky(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, 1.0 / self.ny)

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.nz)

    @property
    def kmax_x(self) -> int:
        """Largest retained |kx| under the 2/3 rule (3|k| < nx)."""
        return (self.nx - 1) // 3

    @property
    def kmax_y(self) -> int:
        return (self.ny - 1) // 3

    @property
    def n_pad(self) -> int:
        """Half-column resolution used for alias-free vertical products."""
        return max(self.nz, (3 * self.nz + 1) // 2)

    @property
    def z(self) -> np.ndarray:
        """Full-domain vertical collocation points, ``2*nz`` of them."""
        return -self.h + np.arange(2 * self.nz) * self.h / self.nz

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) / self.ny

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full-domain physical mesh ``(X, Y, Z)``, shape ``(nx, ny, 2*nz)``."""
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    def half_z(self, n: int | None = None) -> np.ndarray:
        n = self.nz if n is None else n
        return -self.h + np.arange(n + 1) * self.h / n

    def half_mesh(self, n: int | None = None):
        return np.meshgrid(self.x, self.y, self.half_z(n), indexing="ij")

    # Wavenumber arrays broadcast against (nx, ny, nz) coefficient arrays.
    @property
    def KX(self) -> np.ndarray:
        return self.kx[:, None, None]

    @property
    def KY(self) -> np.ndarray:
        return self.ky[None, :, None]

    @property
    def KZ(self) -> np.ndarray:
        """Vertical wavenumbers ``m pi / h``."""
        return (np.pi / self.h) * self.m[None, None, :]

    @property
    def k2_h(self) -> np.ndarray:
        """Eigenvalues of ``-Delta_H``: ``4 pi^2 (kx^2 + ky^2)``, shape (nx, ny, 1)."""
        return 4.0 * np.pi**2 * (self.KX**2 + self.KY**2)

    @property
    def dealias_mask(self) -> np.ndarray:
        keep_x = 3 * np.abs(self.kx) < self.nx
        keep_y = 3 * np.abs(self.ky) < self.ny
        return (keep_x[:, None] & keep_y[None, :])[:, :, None]

    def vertical_weights(self, parity: Parity) -> np.ndarray:
        """Parseval weights ``int_{-h}^{h} Z_m^2 dz`` per vertical mode."""
        w = np.full(self.nz, self.h)
        if parity == "even":
            w[0] = 2.0 * self.h
        else:
            w[0] = 0.0
        return w

    def basis(self, parity: Parity, n: int):
        return _vertical_basis(self.nz, self.h, parity, n)


@lru_cache(maxsize=64)
def _vertical_basis(nz: int, h: float, parity: Parity, n: int):
    """Synthesis ``(n+1, nz)`` and analysis ``(nz, n+1)`` matrices on the half column."""
    if n < nz - 1:
        raise ValueError("half-column resolution too small for the basis")
    z = -h + np.arange(n + 1) * h / n
    arg = np.pi * np.outer(z, np.arange(nz)) / h
    if parity == "even":
        synth = np.cos(arg)
    else:
        synth = np.sin(arg)
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    analysis = (2.0 / n) * (w[:, None] * synth).T
    if parity == "even":
        analysis[0] *= 0.5
        if nz > n:
            analysis[n] *= 0.5
    else:
        analysis[0] = 0.0
    synth.setflags(write=False)
    analysis.setflags(write=False)
    return synth, analysis


@dataclass(eq=False)
class SpectralField3D:
    """Modal coefficients of a real scalar field with a vertical parity tag."""

    grid: Grid
    parity: Parity
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError(f"unknown parity {self.parity!r}")
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid, parity: Parity) -> SpectralField3D:
        return cls(grid, parity, np.zeros(grid.shape, dtype=complex))

    def copy(self) -> SpectralField3D:
        return SpectralField3D(self.grid, self.parity, self.coeffs.copy())

    def _check(self, other: SpectralField3D):
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        if other.parity != self.parity:
            raise ValueError(f"cannot combine {self.parity} and {other.parity} fields")

    def __add__(self, other):
        self._check(other)
        return SpectralField3D(self.grid, self.parity, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField3D(self.grid, self.parity, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField3D(self.grid, self.parity, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField3D):
            return multiply(self, scalar)
        return SpectralField3D(self.grid, self.parity, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField3D(self.grid, self.parity, self.coeffs / scalar)

    def values(self) -> np.ndarray:
        """Physical values on the full-domain grid ``(nx, ny, 2*nz)``."""
        return inverse(self)

    def half_values(self, n: int | None = None) -> np.ndarray:
        """Physical values on the half column ``z in [-h, 0]``, ``n+1`` points."""
        return synthesize(self.coeffs, self.grid, self.parity, self.grid.nz if n is None else n)


@dataclass(eq=False)
class HorizontalField:
    """A z-independent field: Fourier coefficients of shape ``(nx, ny)``."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, grid: Grid) -> HorizontalField:
        return cls(grid, np.zeros((grid.nx, grid.ny), dtype=complex))

    def lift(self) -> SpectralField3D:
        """Extend uniformly in z as an even field (only the m = 0 mode)."""
        c = np.zeros(self.grid.shape, dtype=complex)
        c[:, :, 0] = self.coeffs
        return SpectralField3D(self.grid, "even", c)

    def values(self) -> np.ndarray:
        return sfft.ifft2(self.coeffs, norm="forward", workers=fft_workers()).real

    def __add__(self, other):
        return HorizontalField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return HorizontalField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return HorizontalField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def _hermitian_expand(half: np.ndarray, ny: int) -> np.ndarray:
    nx = half.shape[0]
    nyh = half.shape[1]
    out = np.empty((nx, ny) + half.shape[2:], dtype=complex)
    out[:, :nyh] = half
    neg = (-np.arange(nx)) % nx
    j = np.arange(nyh, ny)
    out[:, nyh:] = np.conj(half[neg][:, ny - j])
    return out


def synthesize(coeffs: np.ndarray, grid: Grid, parity: Parity, n: int) -> np.ndarray:
    """Evaluate coefficients on the half column with ``n+1`` vertical points."""
    synth, _ = grid.basis(parity, n)
    half = coeffs[:, : grid.ny // 2 + 1, :] @ synth.T
    return sfft.irfft2(
        half, s=(grid.nx, grid.ny), axes=(0, 1), norm="forward", workers=fft_workers()
    )


def analyze(values: np.ndarray, grid: Grid, parity: Parity) -> np.ndarray:
    """Project half-column samples ``(nx, ny, n+1)`` onto the retained basis."""
    n = values.shape[2] - 1
    _, analysis = grid.basis(parity, n)
    half = sfft.rfft2(values, axes=(0, 1), norm="forward", workers=fft_workers())
    half = half @ analysis.T
    return _hermitian_expand(half, grid.ny)


def _split_parity(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and antisymmetric parts about z = 0 on the full periodic grid."""
    n2 = values.shape[2]
    mirror = (-np.arange(n2)) % n2
    reflected = values[:, :, mirror]
    return 0.5 * (values + reflected), 0.5 * (values - reflected)


def symmetrize(values: np.ndarray, parity: Parity) -> np.ndarray:
    """Orthogonal projection of full-domain physical data onto a parity class."""
    sym, anti = _split_parity(np.asarray(values, dtype=float))
    return sym if parity == "even" else anti


def forward(values: np.ndarray, grid: Grid, parity: Parity) -> SpectralField3D:
    """Physical full-domain samples ``(nx, ny, 2*nz)`` to modal coefficients."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        if np.max(np.abs(values.imag), initial=0.0) > 0:
            raise ValueError("physical input must be real")
        values = values.real
    expected = (grid.nx, grid.ny, 2 * grid.nz)
    if values.shape != expected:
        raise ValueError(f"physical array shape {values.shape} does not match grid {expected}")
    sym, anti = _split_parity(values)
    wrong = anti if parity == "even" else sym
    scale = max(np.max(np.abs(values)), np.finfo(float).tiny)
    if np.max(np.abs(wrong)) > PARITY_TOL * scale:
        kind = "antisymmetric" if parity == "even" else "symmetric"
        raise ParityError(
            f"field declared {parity} has a {kind} part of relative size "
            f"{np.max(np.abs(wrong)) / scale:.3e}"
        )
    coeffs = analyze(values[:, :, : grid.nz + 1], grid, parity)
    return SpectralField3D(grid, parity, coeffs)


def inverse(field: SpectralField3D) -> np.ndarray:
    """Modal coefficients to physical values on the full-domain grid."""
    grid = field.grid
    half = synthesize(field.coeffs, grid, field.parity, grid.nz)
    sign = 1.0 if field.parity == "even" else -1.0
    # z_{2N-j} = -z_j, so the upper half is the reflection of j = 1 .. N-1.
    upper = sign * half[:, :, grid.nz - 1 : 0 : -1]
    return np.concatenate([half, upper], axis=2)


def transform(obj, direction: Literal["forward", "inverse"], *, grid: Grid | None = None,
              parity: Parity | None = None):
    """Dispatch to :func:`forward` or :func:`inverse`."""
    if direction == "forward":
        if grid is None or parity is None:
            raise ValueError("forward transform needs grid and parity")
        return forward(obj, grid, parity)
    if direction == "inverse":
        return inverse(obj)
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# Linear operators
# ---------------------------------------------------------------------------


def differentiate(field: SpectralField3D, axis: Axis, order: int = 1) -> SpectralField3D:
    """Exact modal derivative.  Odd-order z-derivatives flip parity."""
    if order < 1:
        raise ValueError("order must be a positive integer")
    grid = field.grid
    if axis in ("x", "y"):
        k = grid.KX if axis == "x" else grid.KY
        return SpectralField3D(grid, field.parity, field.coeffs * (2j * np.pi * k) ** order)
    if axis != "z":
        raise ValueError(f"unknown axis {axis!r}")
    c = field.coeffs
    parity = field.parity
    kz = grid.KZ
    for _ in range(order):
        if parity == "even":
            # d/dz cos = -k sin
            c = -kz * c
        else:
            # d/dz sin = k cos; the m = 0 slot stays zero because kz[0] = 0
            c = kz * c
        parity = flip_parity(parity)
    return SpectralField3D(grid, parity, c)


def dx(f: SpectralField3D) -> SpectralField3D:
    return differentiate(f, "x")


def dy(f: SpectralField3D) -> SpectralField3D:
    return differentiate(f, "y")


def dz(f: SpectralField3D) -> SpectralField3D:
    return differentiate(f, "z")


def laplacian_h(f: SpectralField3D) -> SpectralField3D:
    return SpectralField3D(f.grid, f.parity, -f.grid.k2_h * f.coeffs)


def dzz(f: SpectralField3D) -> SpectralField3D:
    return SpectralField3D(f.grid, f.parity, -(f.grid.KZ**2) * f.coeffs)


def div_h(a: SpectralField3D, b: SpectralField3D) -> SpectralField3D:
    return dx(a) + dy(b)


def curl_h(a: SpectralField3D, b: SpectralField3D) -> SpectralField3D:
    """``nabla_H^perp . (a, b) = -d_y a + d_x b``."""
    return dx(b) - dy(a)


def integrate_z_from_bottom(field: SpectralField3D, tol: float = 1e-10) -> SpectralField3D:
    """``G(z) = int_{-h}^{z} f dxi`` computed mode by mode; parity flips.

    An even integrand must have a vanishing ``m = 0`` mode (its primitive
    ``c0 (z + h)`` is not periodic); anything above ``tol`` relative raises.
    """
    grid = field.grid
    c = field.coeffs
    m = grid.m[None, None, 1:]
    k = np.pi * m / grid.h
    out = np.zeros_like(c)
    if field.parity == "even":
        scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
        if np.max(np.abs(c[:, :, 0]), initial=0.0) > tol * scale:
            raise ValueError("even integrand has a nonzero vertical mean; primitive is not periodic")
        # int cos(k xi) from -h = sin(k z)/k since sin(-m pi) = 0
        out[:, :, 1:] = c[:, :, 1:] / k
        return SpectralField3D(grid, "odd", out)
    # int sin(k xi) from -h = -(cos(k z) - (-1)^m)/k
    out[:, :, 1:] = -c[:, :, 1:] / k
    out[:, :, 0] = np.sum(c[:, :, 1:] * ((-1.0) ** m) / k, axis=2)
    return SpectralField3D(grid, "even", out)


def vertical_mean(field: SpectralField3D) -> HorizontalField:
    """``(1/2h) int_{-h}^{h} f dz``."""
    if field.parity == "odd":
        return HorizontalField.zeros(field.grid)
    return HorizontalField(field.grid, field.coeffs[:, :, 0].copy())


def remove_vertical_mean(field: SpectralField3D) -> SpectralField3D:
    c = field.coeffs.copy()
    if field.parity == "even":
        c[:, :, 0] = 0.0
    return SpectralField3D(field.grid, field.parity, c)


def horizontal_mean(field: SpectralField3D) -> SpectralField3D:
    """Per-level average over M, returned as a field (only kx = ky = 0 content)."""
    c = np.zeros_like(field.coeffs)
    c[0, 0, :] = field.coeffs[0, 0, :]
    return SpectralField3D(field.grid, field.parity, c)


def solve_poisson_2d(rhs):
    """Solve ``-Delta_H u = rhs`` on the torus with zero horizontal mean.

    Accepts a :class:`HorizontalField` or a :class:`SpectralField3D` (solved
    level by level).  The rhs must have zero horizontal mean.
    """
    grid = rhs.grid
    c = rhs.coeffs
    k2 = grid.k2_h[:, :, 0] if c.ndim == 2 else grid.k2_h
    mean = c[0, 0]
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    if np.max(np.abs(mean), initial=0.0) > SOLVABILITY_TOL * scale:
        raise SolvabilityError("Poisson right-hand side has nonzero horizontal mean")
    safe = np.where(k2 == 0, 1.0, k2)
    out = np.where(k2 == 0, 0.0, c / safe)
    out[0, 0] = 0.0
    if isinstance(rhs, HorizontalField):
        return HorizontalField(grid, out)
    return SpectralField3D(grid, rhs.parity, out)


def dealias(field: SpectralField3D) -> SpectralField3D:
    """Zero every mode with ``3|kx| >= nx`` or ``3|ky| >= ny``."""
    return SpectralField3D(field.grid, field.parity, field.coeffs * field.grid.dealias_mask)


def enforce_hermitian(coeffs: np.ndarray) -> np.ndarray:
    """Average coefficients with their conjugate partners ``conj(c[-k])``."""
    nx, ny = coeffs.shape[:2]
    ix = (-np.arange(nx)) % nx
    iy = (-np.arange(ny)) % ny
    partner = np.conj(coeffs[ix][:, iy])
    return 0.5 * (coeffs + partner)


# ---------------------------------------------------------------------------
# Nonlinear products
# ---------------------------------------------------------------------------


def multiply(*fields: SpectralField3D) -> SpectralField3D:
    """Dealiased pointwise product of two fields (alias-free on retained modes)."""
    if len(fields) != 2:
        raise ValueError("multiply takes exactly two fields")
    a, b = fields
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    grid = a.grid
    n = grid.n_pad
    prod = a.half_values(n) * b.half_values(n)
    parity = product_parity(a.parity, b.parity)
    return dealias(SpectralField3D(grid, parity, analyze(prod, grid, parity)))


def from_half_values(values: np.ndarray, grid: Grid, parity: Parity) -> SpectralField3D:
    """Project half-column samples (any resolution) and dealias."""
    return dealias(SpectralField3D(grid, parity, analyze(values, grid, parity)))


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def inner(a: SpectralField3D, b: SpectralField3D) -> float:
    """``int_Omega a b`` by Parseval (zero for fields of opposite parity)."""
    if a.parity != b.parity:
        return 0.0
    w = a.grid.vertical_weights(a.parity)
    return float(np.sum(w * np.real(a.coeffs * np.conj(b.coeffs))))


def l2_sq(*fields: SpectralField3D) -> float:
    """Sum of squared L^2(Omega) norms by Parseval."""
    total = 0.0
    for f in fields:
        w = f.grid.vertical_weights(f.parity)
        total += float(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2)))
    return total


def l2(*fields: SpectralField3D) -> float:
    return float(np.sqrt(l2_sq(*fields)))


def half_column_weights(grid: Grid, n: int) -> np.ndarray:
    """Trapezoid weights on the half column that integrate symmetric |f|^q over Omega."""
    w = np.full(n + 1, 2.0 * grid.h / n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w / (grid.nx * grid.ny)


def grid_integral(values: np.ndarray, grid: Grid) -> float:
    """Integral over Omega of a z-symmetric quantity given on the half column."""
    n = values.shape[2] - 1
    return float(np.sum(values * half_column_weights(grid, n)))


def magnitude(*fields: SpectralField3D, n: int | None = None) -> np.ndarray:
    """Pointwise Euclidean magnitude of a (vector of) fields on the half column."""
    acc = None
    for f in fields:
        v = f.half_values(n)
        acc = v * v if acc is None else acc + v * v
    return np.sqrt(acc)


def lq_norm(*fields: SpectralField3D, q: float, n: int | None = None) -> float:
    """Grid L^q(Omega) norm of the vector ``fields``."""
    mag = magnitude(*fields, n=n)
    grid = fields[0].grid
    return grid_integral(mag**q, grid) ** (1.0 / q)


def linf_norm(*fields: SpectralField3D, n: int | None = None) -> float:
    """Grid maximum of the magnitude (a lower bound of the true sup-norm)."""
    return float(np.max(magnitude(*fields, n=n)))
