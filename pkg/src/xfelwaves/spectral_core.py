"""Periodic-box discretization: grids, fields, kernels, and transforms.

Everything downstream (functionals, solvers, time stepping) runs on a uniform
cubic grid over ``[-L, L)^3`` with endpoint-exclusive nodes ``x_j = -L + j h``,
``h = 2L/n``.  Quadrature is the plain Riemann weight ``h^3``; derivatives are
spectral with wavenumbers ``k = 2*pi*fftfreq(n, d=h)``.

The nonlocal Coulomb self-interaction uses a truncated kernel whose Fourier
transform is ``4*pi*(1 - cos(|k| L_c)) / |k|^2`` with truncation radius
``L_c = 2L``.  Sampled on the modes of a doubled (zero-padded) box of side
``4L``, the periodized truncated kernel has non-overlapping images, so the
discrete convolution reproduces the free-space potential exactly for
densities supported inside the ball of radius ``L_c / 2 = L`` (up to
quadrature error of the density transform, which is spectrally small for
smooth fields).

The pointwise ``1/|x|`` attraction is sampled directly, except on the cell
containing the origin, where the value is the cell average of ``1/|x|``
computed with a fixed 8^3 Gauss-Legendre rule.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

__all__ = [
    "GridSpecError",
    "GridMismatchError",
    "SnapshotFormatError",
    "GridSpec",
    "Field",
    "KernelSet",
    "make_kernels",
    "hartree_convolve",
    "hartree_potential",
    "coulomb_apply",
    "gradient_norm_sq",
    "lp_norm_pow",
    "mass",
    "fftn",
    "ifftn",
    "set_fft_workers",
    "fft_workers",
    "gaussian_field",
    "random_field",
    "write_snapshot",
    "read_snapshot",
]


class GridSpecError(ValueError):
    """Invalid grid parameters."""


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class SnapshotFormatError(ValueError):
    """Binary snapshot failed validation."""


# ---------------------------------------------------------------------------
# FFT plumbing
# ---------------------------------------------------------------------------

_WORKERS: int | None = None


def set_fft_workers(n: int | None) -> None:
    """Pin the scipy.fft worker count (None restores the env/cpu default)."""

    global _WORKERS
    if n is not None and n < 1:
        raise ValueError("worker count must be >= 1")
    _WORKERS = n


def fft_workers() -> int:
    if _WORKERS is not None:
        return _WORKERS
    env = os.environ.get("XFELWAVES_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def fftn(a: np.ndarray) -> np.ndarray:
    return scipy.fft.fftn(a, workers=fft_workers())


def ifftn(a: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(a, workers=fft_workers())


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform cubic grid on ``[-L, L)^3``.

    Attributes:
        n_per_axis: nodes per axis (even, >= 8).
        half_length: box half side ``L``.
    """

    n_per_axis: int
    half_length: float

    def __post_init__(self) -> None:
        n, L = self.n_per_axis, self.half_length
        if not isinstance(n, int) or n < 8 or n % 2 != 0:
            raise GridSpecError(f"n_per_axis must be an even integer >= 8, got {n!r}")
        if not (L > 0.0 and np.isfinite(L)):
            raise GridSpecError(f"half_length must be positive and finite, got {L!r}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.n_per_axis

    @property
    def volume_element(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.n_per_axis
        return (n, n, n)

    def axis_coords(self) -> np.ndarray:
        return -self.half_length + self.spacing * np.arange(self.n_per_axis)

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * scipy.fft.fftfreq(self.n_per_axis, d=self.spacing)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


_GRID_ARRAYS: dict[GridSpec, dict[str, np.ndarray]] = {}


def _grid_arrays(grid: GridSpec) -> dict[str, np.ndarray]:
    """Dense derived arrays shared by kernels and reductions (read-only)."""

    cached = _GRID_ARRAYS.get(grid)
    if cached is not None:
        return cached
    x = grid.axis_coords()
    x1, x2, x3 = np.meshgrid(x, x, x, indexing="ij", sparse=True)
    k = grid.wavenumbers()
    k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij", sparse=True)
    harm = x1**2 + x2**2 + np.zeros_like(x3)
    r2 = x1**2 + x2**2 + x3**2
    ksq = k1**2 + k2**2 + k3**2
    cached = {
        "harm": _readonly(harm),
        "r2": _readonly(r2),
        "ksq": _readonly(ksq),
    }
    _GRID_ARRAYS[grid] = cached
    return cached


@dataclass
class Field:
    """Complex scalar field sampled on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        self.values = v

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def _require_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@dataclass
class KernelSet:
    """Precomputed multipliers and potentials for one grid.

    ``laplacian_multiplier`` is ``-|k|^2`` on the grid modes;
    ``coulomb_grid`` is the regularized ``1/|x|`` sample;
    ``harmonic_partial_grid`` is ``x_1^2 + x_2^2``;
    ``hartree_multiplier`` is the truncated-kernel transform sampled on the
    modes of the doubled (zero-padded) box, shape ``(2n, 2n, 2n)``;
    ``radius_sq_grid`` is ``|x|^2`` (cached for virial moments).
    """

    grid: GridSpec
    laplacian_multiplier: np.ndarray
    coulomb_grid: np.ndarray
    harmonic_partial_grid: np.ndarray
    hartree_multiplier: np.ndarray
    radius_sq_grid: np.ndarray


_KERNEL_CACHE: dict[GridSpec, KernelSet] = {}


def _origin_cell_average(h: float) -> float:
    """Cell average of 1/|x| over the cube of side h centered at the origin."""

    t, w = np.polynomial.legendre.leggauss(8)
    x = 0.5 * h * t  # map [-1, 1] -> [-h/2, h/2]
    X1, X2, X3 = np.meshgrid(x, x, x, indexing="ij")
    W = (
        w[:, None, None] * w[None, :, None] * w[None, None, :]
    )  # product rule weights on [-1,1]^3
    r = np.sqrt(X1**2 + X2**2 + X3**2)
    integral = (0.5 * h) ** 3 * float(np.sum(W / r))
    return integral / h**3


def make_kernels(grid: GridSpec) -> KernelSet:
    """Build (and cache) the multiplier/potential set for ``grid``."""

    cached = _KERNEL_CACHE.get(grid)
    if cached is not None:
        return cached

    arrays = _grid_arrays(grid)
    lap = _readonly(-arrays["ksq"])

    n = grid.n_per_axis
    h = grid.spacing
    r = np.sqrt(arrays["r2"])
    origin = (n // 2, n // 2, n // 2)
    with np.errstate(divide="ignore"):
        coul = 1.0 / r
    coul[origin] = _origin_cell_average(h)
    coul = _readonly(coul)

    L = grid.half_length
    l_c = 2.0 * L
    kp = 2.0 * np.pi * scipy.fft.fftfreq(2 * n, d=h)
    kp1, kp2, kp3 = np.meshgrid(kp, kp, kp, indexing="ij", sparse=True)
    ksq_pad = kp1**2 + kp2**2 + kp3**2
    kmag = np.sqrt(ksq_pad)
    with np.errstate(divide="ignore", invalid="ignore"):
        hart = 4.0 * np.pi * (1.0 - np.cos(kmag * l_c)) / ksq_pad
    hart[0, 0, 0] = 2.0 * np.pi * l_c**2
    hart = _readonly(hart)

    kernels = KernelSet(
        grid=grid,
        laplacian_multiplier=lap,
        coulomb_grid=coul,
        harmonic_partial_grid=arrays["harm"],
        hartree_multiplier=hart,
        radius_sq_grid=arrays["r2"],
    )
    _KERNEL_CACHE[grid] = kernels
    return kernels


def hartree_potential(density: np.ndarray, kernels: KernelSet) -> np.ndarray:
    """Free-space ``1/|x|`` convolution of a real density via the padded box."""

    n = kernels.grid.n_per_axis
    pad = np.zeros((2 * n, 2 * n, 2 * n), dtype=np.float64)
    pad[:n, :n, :n] = density
    # real transform halves the last axis; slice the stored multiplier to match
    rho_hat = scipy.fft.rfftn(pad, workers=fft_workers())
    rho_hat *= kernels.hartree_multiplier[:, :, : n + 1]
    out = scipy.fft.irfftn(rho_hat, s=(2 * n, 2 * n, 2 * n), workers=fft_workers())
    return np.ascontiguousarray(out[:n, :n, :n])


def hartree_convolve(f: Field, kernels: KernelSet) -> Field:
    """Potential of ``|f|^2``: real-valued Field ``(1/|x|) * |f|^2``."""

    _require_same_grid(f.grid, kernels.grid)
    density = f.values.real**2 + f.values.imag**2
    v = hartree_potential(density, kernels)
    return Field(f.grid, v.astype(np.complex128))


def coulomb_apply(f: Field, kernels: KernelSet) -> Field:
    """Pointwise multiplication by the regularized ``1/|x|`` grid."""

    _require_same_grid(f.grid, kernels.grid)
    return Field(f.grid, f.values * kernels.coulomb_grid)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def gradient_norm_sq(f: Field) -> float:
    """``h^3 * sum |grad f|^2`` evaluated spectrally (Parseval)."""

    ksq = _grid_arrays(f.grid)["ksq"]
    fh = fftn(f.values)
    power = fh.real**2 + fh.imag**2
    n3 = f.grid.n_per_axis**3
    return float(np.dot(ksq.ravel(), power.ravel())) * f.grid.volume_element / n3


def lp_norm_pow(f: Field, q: float) -> float:
    """``h^3 * sum |f|^q`` for ``q >= 1``."""

    if not q >= 1.0:
        raise ValueError(f"exponent must be >= 1, got {q}")
    a2 = f.values.real**2 + f.values.imag**2
    return float(np.sum(a2 ** (0.5 * q))) * f.grid.volume_element


def mass(f: Field) -> float:
    return lp_norm_pow(f, 2.0)


# ---------------------------------------------------------------------------
# field constructors
# ---------------------------------------------------------------------------


def gaussian_field(
    grid: GridSpec,
    width: float = 1.0,
    amplitude: float = 1.0,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
    momentum: tuple[float, float, float] | None = None,
) -> Field:
    """``amplitude * exp(-|x - c|^2 / (2 width^2))`` with optional phase kick."""

    if width <= 0.0:
        raise ValueError("width must be positive")
    x = grid.axis_coords()
    x1, x2, x3 = np.meshgrid(x, x, x, indexing="ij", sparse=True)
    r2 = (x1 - center[0]) ** 2 + (x2 - center[1]) ** 2 + (x3 - center[2]) ** 2
    values = amplitude * np.exp(-r2 / (2.0 * width**2)).astype(np.complex128)
    if momentum is not None:
        phase = momentum[0] * x1 + momentum[1] * x2 + momentum[2] * x3
        values = values * np.exp(1j * phase)
    return Field(grid, values)


def random_field(
    grid: GridSpec,
    rng: np.random.Generator,
    k_frac: float = 0.25,
    envelope_width: float | None = None,
    amplitude: float = 1.0,
) -> Field:
    """Smooth random field: filtered complex noise under a Gaussian envelope.

    ``k_frac`` sets the spectral rolloff relative to the Nyquist wavenumber, so
    draws stay resolved; the envelope keeps them localized away from the box
    boundary (default width ``L/4``).
    """

    shape = grid.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ksq = _grid_arrays(grid)["ksq"]
    k_cut = k_frac * np.pi / grid.spacing
    smooth = ifftn(fftn(noise) * np.exp(-ksq / (2.0 * k_cut**2)))
    width = envelope_width if envelope_width is not None else grid.half_length / 4.0
    r2 = _grid_arrays(grid)["r2"]
    values = smooth * np.exp(-r2 / (2.0 * width**2))
    peak = float(np.max(np.abs(values)))
    if peak > 0.0:
        values *= amplitude / peak
    return Field(grid, values)


# ---------------------------------------------------------------------------
# binary snapshots
# ---------------------------------------------------------------------------

_MAGIC = b"XFELWAVE0001\x00\x00\x00\x00"
_HEADER = struct.Struct("<16sId")


def write_snapshot(f: Field, path: str | Path) -> None:
    """Little-endian header (magic, n, L) + row-major complex128 payload."""

    path = Path(path)
    if not np.all(np.isfinite(f.values)):
        raise ValueError("refusing to write a snapshot with non-finite entries")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, f.grid.n_per_axis, f.grid.half_length))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_snapshot(path: str | Path) -> Field:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header")
    magic, n, L = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    try:
        grid = GridSpec(int(n), float(L))
    except GridSpecError as exc:
        raise SnapshotFormatError(f"{path}: invalid grid in header: {exc}") from exc
    expected = _HEADER.size + 16 * n**3
    if len(raw) != expected:
        raise SnapshotFormatError(f"{path}: payload size {len(raw)} != expected {expected}")
    values = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(grid.shape)
    return Field(grid, values.copy())
