"""Periodic spectral substrate: grids, fields, transforms, convolution,
heat multiplier, norms and exact dyadic rescaling.

Convention
----------
A spectral field with coefficients ``c_xi`` represents

    f(x) = sum_xi c_xi * exp(i x . xi),

where per axis the frequencies are ``xi = m * 2**-r`` for integers
``m in [-M/2, M/2)``.  With this convention a pointwise product of two
fields corresponds to the plain (constant-free) convolution of their
coefficient arrays, and ``sup |f| <= sum |c_xi|``.

Coefficient arrays use the standard FFT layout (index ``m mod M``) so that
``numpy.fft`` maps directly onto the representation above:
``samples = ifftn(coeffs) * prod(M)`` and ``coeffs = fftn(samples) / prod(M)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

__all__ = [
    "TorusGrid",
    "RealField",
    "SpectralField",
    "transform_forward",
    "transform_inverse",
    "convolve",
    "heat_multiply",
    "lp_norm",
    "l1_spectrum",
    "dyadic_rescale",
    "spectral_power",
    "save_field",
    "load_field",
]


def _as_int_tuple(value, count=None):
    if np.isscalar(value):
        value = (int(value),) if count is None else (int(value),) * count
    out = tuple(int(v) for v in value)
    if count is not None and len(out) != count:
        raise ValidationError(f"expected {count} per-axis entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the torus with period 2*pi*2**r per axis.

    ``modes`` are the per-axis mode counts M_i (even, positive); the
    frequency lattice per axis is {m * 2**-r_i : m = -M_i/2 .. M_i/2 - 1}.
    """

    modes: tuple[int, ...]
    r: tuple[int, ...]

    def __init__(self, modes, r):
        modes = _as_int_tuple(modes)
        r = _as_int_tuple(r, count=len(modes))
        for m in modes:
            if m <= 0 or m % 2 != 0:
                raise ValidationError(f"mode counts must be even positive, got {m}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return len(self.modes)

    def spacing(self, axis: int) -> float:
        return 2.0 ** (-self.r[axis])

    def period(self, axis: int) -> float:
        return 2.0 * math.pi * 2.0 ** self.r[axis]

    def nyquist(self, axis: int) -> float:
        return 0.5 * self.modes[axis] * self.spacing(axis)

    @property
    def nyquists(self) -> tuple[float, ...]:
        return tuple(self.nyquist(a) for a in range(self.n))

    @property
    def max_nyquist(self) -> float:
        return max(self.nyquists)

    @property
    def total_modes(self) -> int:
        return int(np.prod(self.modes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([self.period(a) / self.modes[a] for a in range(self.n)]))

    def freq_axis(self, axis: int) -> np.ndarray:
        m = self.modes[axis]
        return np.fft.fftfreq(m) * m * self.spacing(axis)

    def freq_mesh(self) -> list[np.ndarray]:
        """Per-axis frequency arrays shaped for broadcasting."""
        out = []
        for a in range(self.n):
            shape = [1] * self.n
            shape[a] = self.modes[a]
            out.append(self.freq_axis(a).reshape(shape))
        return out

    def abs2_mesh(self) -> np.ndarray:
        """|xi|^2 on the full grid, FFT layout."""
        total = np.zeros(self.modes)
        for f in self.freq_mesh():
            total = total + f * f
        return total

    def physical_axis(self, axis: int) -> np.ndarray:
        m = self.modes[axis]
        return np.arange(m) * (self.period(axis) / m)

    def resolves(self, band: float) -> bool:
        """Whether the largest per-axis Nyquist frequency exceeds ``band``."""
        return self.max_nyquist > band


@dataclass
class RealField:
    """Real samples at the uniform physical points of a grid."""

    grid: TorusGrid
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != self.grid.modes:
            raise ValidationError(
                f"sample shape {self.samples.shape} does not match grid modes {self.grid.modes}"
            )

    def validate(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("real field contains non-finite samples")
        return self


@dataclass
class SpectralField:
    """Fourier coefficients on a grid, FFT layout, with a declared band box.

    ``band_limit`` is a per-axis support radius in frequency units; the
    Nyquist value per axis doubles as an "unconstrained" sentinel.
    """

    grid: TorusGrid
    coeffs: np.ndarray
    band_limit: tuple[float, ...] = field(default=None)
    real_valued: bool = False
    nonneg_spectrum: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != self.grid.modes:
            raise ValidationError(
                f"coefficient shape {self.coeffs.shape} does not match grid modes {self.grid.modes}"
            )
        if self.band_limit is None:
            self.band_limit = self.grid.nyquists
        else:
            self.band_limit = tuple(float(b) for b in self.band_limit)
            if len(self.band_limit) != self.grid.n:
                raise ValidationError("band_limit must have one entry per axis")
            for a, b in enumerate(self.band_limit):
                if b > self.grid.nyquist(a):
                    raise ValidationError(
                        f"band limit {b} exceeds Nyquist {self.grid.nyquist(a)} on axis {a}"
                    )

    def copy(self) -> "SpectralField":
        return replace(self, coeffs=self.coeffs.copy())

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def hermitian_defect(self) -> float:
        """max |c_{-xi} - conj(c_xi)| relative to max |c|."""
        rev = self.coeffs
        for a in range(self.grid.n):
            rev = np.roll(np.flip(rev, axis=a), 1, axis=a)
        scale = self.max_abs()
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(rev - np.conj(self.coeffs)))) / scale

    def nonneg_defect(self) -> float:
        """max(-min Re c, max |Im c|) relative to max |c|."""
        scale = self.max_abs()
        if scale == 0.0:
            return 0.0
        worst = max(-float(np.min(self.coeffs.real)), float(np.max(np.abs(self.coeffs.imag))))
        return max(worst, 0.0) / scale

    def validate(self, tol: float = 1e-12) -> "SpectralField":
        if not np.all(np.isfinite(self.coeffs)):
            raise ValidationError("spectral field contains non-finite coefficients")
        outside = _outside_band_mask(self.grid, self.band_limit)
        if np.any(np.abs(self.coeffs[outside]) > 0):
            raise ValidationError("coefficients present outside the declared band limit")
        if self.real_valued and self.hermitian_defect() > tol:
            raise ValidationError(
                f"field tagged real-valued but Hermitian defect {self.hermitian_defect():.3e} > {tol:.1e}"
            )
        if self.nonneg_spectrum and self.nonneg_defect() > tol:
            raise ValidationError(
                f"field tagged nonnegative-spectrum but defect {self.nonneg_defect():.3e} > {tol:.1e}"
            )
        return self

    def restrict_band(self, band_limit, tol: float = 1e-12) -> "SpectralField":
        """Declare a tighter band; verifies outside mass is negligible, then zeroes it."""
        band_limit = tuple(float(b) for b in band_limit)
        outside = _outside_band_mask(self.grid, band_limit)
        scale = self.max_abs()
        if scale > 0 and np.any(np.abs(self.coeffs[outside]) > tol * scale):
            worst = float(np.max(np.abs(self.coeffs[outside])))
            raise ValidationError(
                f"cannot restrict band: outside mass {worst:.3e} exceeds {tol:.1e} * max|c|"
            )
        c = self.coeffs.copy()
        c[outside] = 0.0
        return replace(self, coeffs=c, band_limit=band_limit)


def _outside_band_mask(grid: TorusGrid, band_limit) -> np.ndarray:
    mask = np.zeros(grid.modes, dtype=bool)
    for a, f in enumerate(grid.freq_mesh()):
        mask |= np.abs(f) > band_limit[a] + 1e-12 * grid.spacing(a)
    return mask


# ---------------------------------------------------------------------------
# transforms

def transform_forward(f: RealField, band_limit=None) -> SpectralField:
    """Coefficients of the trigonometric interpolant of ``f``.

    The zero-mode coefficient equals the mean of the samples; a constant
    field maps to a single coefficient at xi = 0.
    """
    f.validate()
    c = np.fft.fftn(f.samples) / f.grid.total_modes
    out = SpectralField(f.grid, c, band_limit=None, real_valued=True)
    if band_limit is not None:
        out = out.restrict_band(band_limit)
    return out


def transform_inverse(F: SpectralField, tol: float = 1e-9) -> RealField:
    """Physical samples of ``F``; requires an (approximately) Hermitian spectrum."""
    s = np.fft.ifftn(F.coeffs) * F.grid.total_modes
    scale = float(np.max(np.abs(s.real))) if s.size else 0.0
    imag = float(np.max(np.abs(s.imag))) if s.size else 0.0
    if imag > tol * max(scale, 1e-300):
        raise ValidationError(
            f"spectrum is not Hermitian (imaginary residue {imag:.3e}); inverse is not real"
        )
    return RealField(F.grid, s.real)


# ---------------------------------------------------------------------------
# convolution and powers

def _check_same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise ValidationError("fields live on different grids")


def convolve(a: SpectralField, b: SpectralField) -> SpectralField:
    """Plain coefficient convolution, c_xi = sum_eta a_eta * b_{xi-eta}.

    Computed as a pointwise product in physical space, which is exact
    (no wraparound) because the band-sum precondition keeps the true
    support inside the representable frequency box.
    """
    _check_same_grid(a, b)
    band_out = []
    for ax in range(a.grid.n):
        s = a.band_limit[ax] + b.band_limit[ax]
        if s >= a.grid.nyquist(ax):
            raise ValidationError(
                f"aliasing risk: band sum {s} >= Nyquist {a.grid.nyquist(ax)} on axis {ax}"
            )
        band_out.append(s)
    T = a.grid.total_modes
    sa = np.fft.ifftn(a.coeffs) * T
    sb = np.fft.ifftn(b.coeffs) * T
    c = np.fft.fftn(sa * sb) / T
    # true support is inside the band box; discard transform residue outside
    c[_outside_band_mask(a.grid, tuple(band_out))] = 0.0
    return SpectralField(
        a.grid,
        c,
        band_limit=tuple(band_out),
        real_valued=a.real_valued and b.real_valued,
        nonneg_spectrum=a.nonneg_spectrum and b.nonneg_spectrum,
    )


def spectral_power(F: SpectralField, b: int, *, _check: bool = True) -> SpectralField:
    """b-fold convolution power of the coefficients of ``F`` (exact)."""
    if b < 1 or b != int(b):
        raise ValidationError(f"power must be a positive integer, got {b}")
    b = int(b)
    band_out = []
    for ax in range(F.grid.n):
        s = b * F.band_limit[ax]
        if _check and s >= F.grid.nyquist(ax):
            raise ValidationError(
                f"aliasing risk: power band {s} >= Nyquist {F.grid.nyquist(ax)} on axis {ax}"
            )
        band_out.append(min(s, F.grid.nyquist(ax)))
    T = F.grid.total_modes
    s = np.fft.ifftn(F.coeffs) * T
    c = np.fft.fftn(s ** b) / T
    if _check:
        c[_outside_band_mask(F.grid, tuple(band_out))] = 0.0
    return SpectralField(
        F.grid,
        c,
        band_limit=tuple(band_out),
        real_valued=F.real_valued,
        nonneg_spectrum=F.nonneg_spectrum,
    )


def padded_modes(modes, pad: float, b: int) -> tuple[int, ...]:
    """Per-axis FFT sizes for alias-free degree-b products at pad factor >= (b+1)/2."""
    out = []
    for m in modes:
        p = max(int(math.ceil(m * pad)), (b + 1) * (m // 2) + 2)
        p += p % 2
        out.append(p)
    return tuple(out)


def _embed_spectrum(c: np.ndarray, pshape: tuple[int, ...]) -> np.ndarray:
    cs = np.fft.fftshift(c)
    out = np.zeros(pshape, dtype=complex)
    sl = tuple(
        slice((p - m) // 2, (p - m) // 2 + m) for p, m in zip(pshape, c.shape)
    )
    out[sl] = cs
    return np.fft.ifftshift(out)


def _extract_spectrum(cp: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    cs = np.fft.fftshift(cp)
    sl = tuple(
        slice((p - m) // 2, (p - m) // 2 + m) for p, m in zip(cp.shape, shape)
    )
    return np.fft.ifftshift(cs[sl])


def dealiased_power_array(c: np.ndarray, b: int, pshape: tuple[int, ...]):
    """Grid-truncated coefficients of u**b plus sup|u|, alias-free via zero padding.

    Uses the real part of the padded samples; intended for real-valued
    solution states.  Retained modes are exact convolution values, modes
    beyond the original grid are discarded (Galerkin truncation).
    """
    tp = int(np.prod(pshape))
    sp = np.fft.ifftn(_embed_spectrum(c, pshape)) * tp
    u = sp.real
    sup = float(np.max(np.abs(u)))
    with np.errstate(over="ignore", invalid="ignore"):
        cp = np.fft.fftn(u ** b) / tp
    return _extract_spectrum(cp, c.shape), sup


# ---------------------------------------------------------------------------
# norms, multipliers, rescaling

def heat_multiply(F: SpectralField, t: float) -> SpectralField:
    """Heat semigroup on the Fourier side: c_xi -> exp(-t |xi|^2) c_xi."""
    if t < 0:
        raise ValidationError(f"heat multiplier requires t >= 0, got {t}")
    factor = np.exp(-t * F.grid.abs2_mesh())
    return replace(F, coeffs=F.coeffs * factor)


def lp_norm(f: RealField, p) -> float:
    """Quadrature L^p norm, (sum |f(x_i)|^p dx^n)^(1/p); max for p = inf."""
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(f.samples)))
    p = float(p)
    if p < 1:
        raise ValidationError(f"L^p norm requires p >= 1 or p = inf, got {p}")
    dv = f.grid.cell_volume
    return float(np.sum(np.abs(f.samples) ** p) * dv) ** (1.0 / p)


def l1_spectrum(F: SpectralField) -> float:
    """sum_xi |c_xi|; dominates sup |f| under the series convention."""
    return float(np.sum(np.abs(F.coeffs)))


def dyadic_rescale(f: RealField, j: int, b: int, target_grid: TorusGrid | None = None) -> RealField:
    """Exact rescaling output(x) = 2**(2j/(b-1)) * f(2**j x).

    Realized as coefficient reindexing: every mode xi moves to 2**j xi,
    which on dyadic grids is the identity map onto the grid with period
    exponent r - j.  The samples are therefore reused, only scaled.
    """
    if int(j) != j:
        raise ValidationError("rescaling exponent j must be an integer")
    if b < 2 or int(b) != b:
        raise ValidationError(f"nonlinearity power must be an integer >= 2, got {b}")
    j = int(j)
    new_grid = TorusGrid(f.grid.modes, tuple(r - j for r in f.grid.r))
    if target_grid is not None and target_grid != new_grid:
        raise ValidationError(
            "band overflow: target grid does not match the exact rescaled grid "
            f"{new_grid.modes} with r={new_grid.r}"
        )
    factor = 2.0 ** (2.0 * j / (b - 1))
    return RealField(new_grid, f.samples * factor)


# ---------------------------------------------------------------------------
# serialization

FIELD_FORMAT = "nlheat.field/1"


def _field_payload(f) -> dict:
    if isinstance(f, SpectralField):
        flat = f.coeffs.reshape(-1)
        return {
            "format": FIELD_FORMAT,
            "kind": "spectral",
            "grid": {"modes": list(f.grid.modes), "r": list(f.grid.r)},
            "layout": "row-major",
            "band_limit": [float(b) for b in f.band_limit],
            "real_valued": bool(f.real_valued),
            "nonneg_spectrum": bool(f.nonneg_spectrum),
            "coeffs": [[float(z.real), float(z.imag)] for z in flat],
        }
    if isinstance(f, RealField):
        return {
            "format": FIELD_FORMAT,
            "kind": "real",
            "grid": {"modes": list(f.grid.modes), "r": list(f.grid.r)},
            "layout": "row-major",
            "samples": [float(v) for v in f.samples.reshape(-1)],
        }
    raise ValidationError(f"cannot serialize object of type {type(f)!r}")


def save_field(path, f) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_field_payload(f), fh, sort_keys=True)
        fh.write("\n")


def load_field(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format") != FIELD_FORMAT:
        raise ValidationError(f"unknown field container format {data.get('format')!r}")
    grid = TorusGrid(tuple(data["grid"]["modes"]), tuple(data["grid"]["r"]))
    if data["kind"] == "real":
        samples = np.array(data["samples"], dtype=float).reshape(grid.modes)
        return RealField(grid, samples)
    pairs = np.array(data["coeffs"], dtype=float).reshape(grid.modes + (2,))
    coeffs = pairs[..., 0] + 1j * pairs[..., 1]
    return SpectralField(
        grid,
        coeffs,
        band_limit=tuple(data["band_limit"]),
        real_valued=data["real_valued"],
        nonneg_spectrum=data["nonneg_spectrum"],
    )
