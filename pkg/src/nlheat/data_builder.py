"""Bump profile, amplitude schedules, and the oscillatory initial data family.

The data family stacks cosine-modulated copies of a fixed radial bump,
one per dyadic shell:

    u0_N(x) = eps_N * sum_{k=0..N} 2**(2k/b) * eta_k * cos(3/2 * 2**k * x_1) * w(x),

where the spectrum of ``w`` is a nonnegative, even, compactly supported
C-infinity bump.  Each summand occupies a single dyadic annulus, which is
what makes the block norms of the whole sum computable term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError
from .spectral import RealField, SpectralField, TorusGrid, transform_inverse

__all__ = [
    "BumpSpec",
    "Schedule",
    "fujita_check",
    "build_bump",
    "schedule_values",
    "build_u0n",
    "modulated_term",
]

RHO_CAP = 0.25
MODULATION_BASE = 1.5  # modulation frequencies are 3/2 * 2**k on axis 1


def fujita_check(n: int, b: int) -> None:
    """Reject parameters in the regime where smallness is irrelevant."""
    if b < 2 or int(b) != b:
        raise ValidationError(f"nonlinearity power must be an integer >= 2, got {b}")
    if n * (b - 1) / 2.0 <= 1.0:
        raise ValidationError(
            f"requires n*(b-1)/2 > 1 (got {n * (b - 1) / 2.0} for n={n}, b={b}): "
            "at or below this threshold positive solutions blow up regardless of data size"
        )


@dataclass(frozen=True)
class BumpSpec:
    """Support radius and center value of the spectral bump.

    Radii above 1/4 are capped at 1/4 so every modulated copy stays inside
    a single dyadic annulus.
    """

    rho: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValidationError(f"bump radius must be positive, got {self.rho}")
        if self.amplitude <= 0:
            raise ValidationError(f"bump amplitude must be positive, got {self.amplitude}")
        object.__setattr__(self, "rho", min(float(self.rho), RHO_CAP))

    @classmethod
    def default(cls, b: int, amplitude: float = 1.0) -> "BumpSpec":
        return cls(rho=1.0 / (2.0 * b), amplitude=amplitude)


def bump_profile(xi_abs: np.ndarray, spec: BumpSpec) -> np.ndarray:
    """amplitude * exp(1 - 1/(1 - |xi/rho|^2)) inside |xi| < rho, else 0."""
    u2 = (np.asarray(xi_abs, dtype=float) / spec.rho) ** 2
    out = np.zeros_like(u2)
    inside = u2 < 1.0
    out[inside] = spec.amplitude * np.exp(1.0 - 1.0 / (1.0 - u2[inside]))
    return out


def build_bump(grid: TorusGrid, spec: BumpSpec) -> tuple[RealField, SpectralField]:
    """Radial spectral bump and its physical samples.

    Coefficients carry the lattice cell weight (2**-r / 2pi)**n so that the
    spectral l1 mass and the physical profile are stable under grid
    refinement (they converge to the continuum bump).
    """
    for a in range(grid.n):
        if 2.0 * spec.rho / grid.spacing(a) < 6.0:
            raise ValidationError(
                f"under-resolved bump: axis {a} has {2.0 * spec.rho / grid.spacing(a):.2f} "
                "coefficients across the diameter, need >= 6"
            )
        if spec.rho >= grid.nyquist(a):
            raise ValidationError(
                f"bump radius {spec.rho} is not below Nyquist {grid.nyquist(a)} on axis {a}"
            )
    xi_abs = np.sqrt(grid.abs2_mesh())
    weight = float(np.prod([grid.spacing(a) / (2.0 * math.pi) for a in range(grid.n)]))
    coeffs = bump_profile(xi_abs, spec) * weight
    w_hat = SpectralField(
        grid,
        coeffs,
        band_limit=(spec.rho,) * grid.n,
        real_valued=True,
        nonneg_spectrum=True,
    )
    return transform_inverse(w_hat), w_hat


@dataclass(frozen=True)
class Schedule:
    """Per-shell weights eta_k and overall size eps_N.

    Default rules: eta_k = (1+k)**(-1/b) and eps_N = 1/log(log(3+N)).
    The constant-eps override replaces the eps rule by a fixed value for
    desk-scale runs; eta stays as configured.
    """

    b: int
    eps_mode: str = "paper"  # "paper" | "constant"
    eps_value: float = 1.0
    eta_rule: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.b < 2 or int(self.b) != self.b:
            raise ValidationError(f"schedule needs an integer power b >= 2, got {self.b}")
        if self.eps_mode not in ("paper", "constant"):
            raise ValidationError(f"unknown eps mode {self.eps_mode!r}")
        if self.eps_mode == "constant" and self.eps_value <= 0:
            raise ValidationError("constant eps override must be positive")

    @property
    def eta_is_default(self) -> bool:
        return self.eta_rule is None

    def eta(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k < 0):
            raise ValidationError("shell index k must be >= 0")
        if self.eta_rule is not None:
            return self.eta_rule(k)
        return (1.0 + k) ** (-1.0 / self.b)

    def eps(self, N: int) -> float:
        if N < 0:
            raise ValidationError("family index N must be >= 0")
        if self.eps_mode == "constant":
            return float(self.eps_value)
        return 1.0 / math.log(math.log(3.0 + N))


def schedule_values(s: Schedule, k: int, N: int) -> tuple[float, float]:
    """(eta_k, eps_N) under the schedule's rules."""
    return float(s.eta(k)), s.eps(N)


def modulation_offset(grid: TorusGrid, k: int) -> int:
    """Index offset of the modulation frequency 3/2 * 2**k on axis 1."""
    shift = MODULATION_BASE * 2.0 ** k / grid.spacing(0)
    rounded = round(shift)
    if abs(shift - rounded) > 1e-9:
        raise ValidationError(
            f"modulation frequency {MODULATION_BASE * 2.0 ** k} does not lie on the grid "
            f"(axis-1 spacing {grid.spacing(0)}); need r >= 1"
        )
    return int(rounded)


def _shifted_pair(w_hat: SpectralField, k: int) -> np.ndarray:
    """Coefficients of cos(3/2 * 2**k x_1) * w: half-sum of two axis-1 shifts."""
    off = modulation_offset(w_hat.grid, k)
    return 0.5 * (np.roll(w_hat.coeffs, off, axis=0) + np.roll(w_hat.coeffs, -off, axis=0))


def modulated_term(
    grid: TorusGrid, k: int, N: int, s: Schedule, w_hat: SpectralField
) -> SpectralField:
    """Single summand eps_N * 2**(2k/b) * eta_k * cos(3/2 2**k x_1) w(x), spectral side."""
    rho = max(w_hat.band_limit)
    amp = s.eps(N) * 2.0 ** (2.0 * k / s.b) * float(s.eta(k))
    band = (MODULATION_BASE * 2.0 ** k + rho,) + tuple(w_hat.band_limit[1:])
    return SpectralField(
        grid,
        amp * _shifted_pair(w_hat, k),
        band_limit=band,
        real_valued=True,
        nonneg_spectrum=True,
    )


def build_u0n(
    grid: TorusGrid, N: int, s: Schedule, w_hat: SpectralField
) -> tuple[RealField, SpectralField]:
    """Oscillatory data family member with N+1 shells, physical and spectral."""
    if N < 0 or int(N) != N:
        raise ValidationError(f"family index N must be an integer >= 0, got {N}")
    if w_hat.grid != grid:
        raise ValidationError("bump spectrum lives on a different grid")
    fujita_check(grid.n, s.b)
    rho = max(w_hat.band_limit)
    top = MODULATION_BASE * 2.0 ** N + rho
    if top >= grid.nyquist(0):
        raise ValidationError(
            f"band overflow: top shell extends to {top}, axis-1 Nyquist is {grid.nyquist(0)}"
        )
    coeffs = np.zeros(grid.modes, dtype=complex)
    eps = s.eps(N)
    for k in range(N + 1):
        amp = eps * 2.0 ** (2.0 * k / s.b) * float(s.eta(k))
        coeffs += amp * _shifted_pair(w_hat, k)
    band = (top,) + tuple(w_hat.band_limit[1:])
    u_hat = SpectralField(
        grid, coeffs, band_limit=band, real_valued=True, nonneg_spectrum=True
    )
    return transform_inverse(u_hat), u_hat
