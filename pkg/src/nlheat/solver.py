"""Pseudo-spectral time integration of u_t = lap(u) + u**b on the torus,
fixed-mesh Picard iteration of the integral form, and verification of the
certified spectral lower bounds against computed states.

The stepper is a classical four-stage integrating-factor scheme: the heat
multiplier is applied exactly, the power is evaluated pointwise in physical
space on a zero-padded grid (factor >= (b+1)/2, so degree-b products are
alias-free), and the result is truncated back to the grid.  With data whose
spectrum is nonnegative every stage combines nonnegative quantities with
nonnegative weights, so spectral positivity is preserved up to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .certificate import CertificateParams, lower_bound_field
from .data_builder import fujita_check
from .errors import ValidationError
from .spectral import (
    RealField,
    SpectralField,
    dealiased_power_array,
    l1_spectrum,
    lp_norm,
    padded_modes,
)

__all__ = [
    "SolverConfig",
    "Trajectory",
    "simulate",
    "PicardRun",
    "picard_iterate",
    "LowerBoundReport",
    "verify_lower_bound",
    "theorem1_diagnostics",
    "admissible_window",
]

BLOWUP_CAP_DEFAULT = 1e8


def admissible_window(n: int, b: int) -> tuple[float, float]:
    """Open p-window for the weighted-in-time diagnostics."""
    return n * (b - 1) / 2.0, n * (b - 1) * b / 2.0


@dataclass
class SolverConfig:
    b: int
    dt_max: float = 1e-2
    dt_min: float = 1e-14
    blowup_cap: float = BLOWUP_CAP_DEFAULT
    dealias_pad: float | None = None
    t_end: float = 1.0
    record_every: int = 1
    dt_scale: float = 0.1
    z_exponent: float | None = None
    linear_only: bool = False
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.b < 2 or int(self.b) != self.b:
            raise ValidationError(f"power must be an integer >= 2, got {self.b}")
        if not (0 < self.dt_min < self.dt_max):
            raise ValidationError("need 0 < dt_min < dt_max")
        pad_floor = (self.b + 1) / 2.0
        if self.dealias_pad is None:
            self.dealias_pad = pad_floor
        elif self.dealias_pad < pad_floor:
            raise ValidationError(
                f"dealias pad {self.dealias_pad} below the alias-free floor {pad_floor}"
            )
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if self.t_end <= 0:
            raise ValidationError("t_end must be positive")

    def z_p(self, n: int) -> float:
        if self.z_exponent is not None:
            return float(self.z_exponent)
        lo, hi = admissible_window(n, self.b)
        return math.sqrt(lo * hi)


@dataclass
class Trajectory:
    b: int
    n: int
    z_exponent: float
    sigma: float
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    dt: np.ndarray = field(default_factory=lambda: np.empty(0))
    l1_spectrum: np.ndarray = field(default_factory=lambda: np.empty(0))
    sup_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    lp_crit: np.ndarray = field(default_factory=lambda: np.empty(0))
    positivity_margin: np.ndarray = field(default_factory=lambda: np.empty(0))
    lp_z: np.ndarray = field(default_factory=lambda: np.empty(0))
    z_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    blowup: dict | None = None
    abort: dict | None = None
    snapshots: list = field(default_factory=list)

    def snapshot_source(self, tol: float = 1e-9) -> Callable[[float], SpectralField | None]:
        def source(t_query: float):
            for ts, fld in self.snapshots:
                if abs(ts - t_query) <= tol * max(1.0, abs(t_query)):
                    return fld
            return None
        return source

    def write_csv(self, path, preamble: str | None = None) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            if preamble:
                fh.write(preamble.rstrip("\n") + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["t", "dt", "l1_spectrum", "sup_norm", "lp_crit", "positivity_margin", "z_norm_p"]
            )
            for i in range(len(self.t)):
                writer.writerow(
                    [
                        repr(float(self.t[i])),
                        repr(float(self.dt[i])),
                        repr(float(self.l1_spectrum[i])),
                        repr(float(self.sup_norm[i])),
                        repr(float(self.lp_crit[i])),
                        repr(float(self.positivity_margin[i])),
                        repr(float(self.z_norm[i])),
                    ]
                )

    def blowup_json(self, config: dict | None = None) -> dict:
        out = {
            "T_star_num": None if self.blowup is None else self.blowup["T_star_num"],
            "reason": None if self.blowup is None else self.blowup["reason"],
            "last_t": float(self.t[-1]) if len(self.t) else None,
            "config": config or {},
        }
        if self.abort is not None:
            out["abort"] = self.abort
        return out


def simulate(
    u0: SpectralField, cfg: SolverConfig, snapshot_times: Sequence[float] = ()
) -> Trajectory:
    """Integrate through cfg.t_end or until numerical blowup is declared.

    Blowup is declared when the sup norm passes cfg.blowup_cap or the
    adaptive step dt = min(dt_max, dt_scale/(1 + sup**(b-1))) falls under
    dt_min; both are numerical observations, not certificates.  Snapshot
    times are landed on exactly and the spectral state stored.
    """
    grid = u0.grid
    fujita_check(grid.n, cfg.b)
    b = cfg.b
    q2 = grid.abs2_mesh()
    pshape = padded_modes(grid.modes, cfg.dealias_pad, b)
    T = grid.total_modes
    sigma = 2.0 / (b - 1) - grid.n / cfg.z_p(grid.n)
    traj = Trajectory(b=b, n=grid.n, z_exponent=cfg.z_p(grid.n), sigma=sigma)

    rec: dict[str, list] = {k: [] for k in ("t", "dt", "l1", "sup", "lp", "pos", "lpz", "z")}

    def nonlinear(c):
        return dealiased_power_array(c, b, pshape)

    def record(t, dt_used, c):
        samples = (np.fft.ifftn(c) * T).real
        f = RealField(grid, samples)
        lp_c = lp_norm(f, grid.n * (b - 1) / 2.0)
        lp_zv = lp_norm(f, traj.z_exponent)
        rec["t"].append(t)
        rec["dt"].append(dt_used)
        rec["l1"].append(float(np.sum(np.abs(c))))
        rec["sup"].append(float(np.max(np.abs(samples))))
        rec["lp"].append(lp_c)
        rec["pos"].append(float(np.min(c.real)))
        rec["lpz"].append(lp_zv)
        rec["z"].append(0.0 if t == 0.0 else t ** (sigma / 2.0) * lp_zv)

    def finish():
        traj.t = np.array(rec["t"])
        traj.dt = np.array(rec["dt"])
        traj.l1_spectrum = np.array(rec["l1"])
        traj.sup_norm = np.array(rec["sup"])
        traj.lp_crit = np.array(rec["lp"])
        traj.positivity_margin = np.array(rec["pos"])
        traj.lp_z = np.array(rec["lpz"])
        traj.z_norm = np.array(rec["z"])
        return traj

    c = u0.coeffs.astype(complex).copy()
    t = 0.0
    events = sorted({float(ts) for ts in snapshot_times if 0.0 < ts <= cfg.t_end})
    pending = list(events)
    record(0.0, 0.0, c)
    if any(abs(ts) < 1e-15 for ts in snapshot_times):
        pending_zero = SpectralField(grid, c.copy(), band_limit=u0.band_limit,
                                     real_valued=u0.real_valued, nonneg_spectrum=u0.nonneg_spectrum)
        traj.snapshots.append((0.0, pending_zero))

    steps = 0
    while True:
        if not np.all(np.isfinite(c)):
            traj.abort = {"reason": "non-finite coefficients", "t": t, "steps": steps}
            break
        if cfg.linear_only:
            a_coeffs, sup = np.zeros_like(c), float(np.max(np.abs((np.fft.ifftn(c) * T).real)))
        else:
            a_coeffs, sup = nonlinear(c)
        if not np.all(np.isfinite(a_coeffs)):
            traj.abort = {"reason": "non-finite nonlinear term", "t": t, "steps": steps}
            break
        if sup > cfg.blowup_cap:
            traj.blowup = {"T_star_num": t, "reason": "cap", "last_t": t}
            break
        if t >= cfg.t_end - 1e-15 * max(1.0, cfg.t_end):
            break
        dt_nominal = cfg.dt_max if cfg.linear_only else min(
            cfg.dt_max, cfg.dt_scale / (1.0 + sup ** (b - 1))
        )
        if dt_nominal < cfg.dt_min:
            traj.blowup = {"T_star_num": t, "reason": "dt_floor", "last_t": t}
            break
        t_next = pending[0] if pending else cfg.t_end
        dt = min(dt_nominal, t_next - t)

        E = np.exp(-0.5 * dt * q2)
        E2 = E * E
        if cfg.linear_only:
            c = E2 * c
        else:
            b1, _ = nonlinear(E * (c + (0.5 * dt) * a_coeffs))
            c1, _ = nonlinear(E * c + (0.5 * dt) * b1)
            d1, _ = nonlinear(E2 * c + dt * E * c1)
            c = E2 * c + (dt / 6.0) * (E2 * a_coeffs + 2.0 * E * (b1 + c1) + d1)
        t += dt
        steps += 1

        snapped = False
        if pending and t >= pending[0] - 1e-13 * max(1.0, pending[0]):
            ts = pending.pop(0)
            traj.snapshots.append(
                (ts, SpectralField(grid, c.copy(), real_valued=u0.real_valued,
                                   nonneg_spectrum=u0.nonneg_spectrum))
            )
            snapped = True
        if steps % cfg.record_every == 0 or snapped:
            record(t, dt, c)
        if steps >= cfg.max_steps:
            traj.abort = {"reason": "max_steps", "t": t, "steps": steps}
            break
    if rec["t"] and rec["t"][-1] != t:
        record(t, rec["dt"][-1] if rec["dt"] else 0.0, c)
    return finish()


# ---------------------------------------------------------------------------
# Picard iteration of the integral form on a fixed time mesh

@dataclass
class PicardRun:
    grid: object
    times: np.ndarray
    iterates: list[np.ndarray]   # iterates[l-1][j] = coefficients of u_l at times[j]
    nonneg: bool
    real_valued: bool

    @property
    def l_max(self) -> int:
        return len(self.iterates)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise ValidationError(f"time {t} is not on the iteration mesh")
        return i

    def coeffs(self, l: int, t: float) -> np.ndarray:
        if not (1 <= l <= self.l_max):
            raise ValidationError(f"iterate index l={l} outside [1, {self.l_max}]")
        return self.iterates[l - 1][self.index_of(t)]

    def field(self, l: int, t: float) -> SpectralField:
        return SpectralField(
            self.grid,
            self.coeffs(l, t).copy(),
            real_valued=self.real_valued,
            nonneg_spectrum=self.nonneg,
        )

    def source(self, l: int | None = None) -> Callable[[float], SpectralField]:
        l = self.l_max if l is None else l
        return lambda t: self.field(l, t)


def _pw_weights(q2: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Product-integration weights for one mesh cell, endpoint-referenced.

    Exact for exp(mu (s - t)) times a linear interpolant; both weights are
    nonnegative so nonnegative node values keep the increment nonnegative.
    """
    z = q2 * h
    small = z < 1e-5
    zs = np.where(small, 1.0, z)
    ez = np.exp(-z)
    phi = np.where(small, 1.0 - z / 2.0 + z * z / 6.0, (1.0 - ez) / zs)
    psi = np.where(small, 0.5 - z / 6.0 + z * z / 24.0, (z - 1.0 + ez) / (zs * zs))
    return h * (phi - psi), h * psi


def picard_iterate(
    u0: SpectralField,
    b: int,
    T: float | None,
    l_max: int,
    steps: int = 64,
    mesh: Sequence[float] | None = None,
    pad: float | None = None,
) -> PicardRun:
    """Iterates u_1 = heat flow of u0 and u_{l+1} = heat flow + Duhamel(u_l**b).

    The Duhamel integral uses the product-integration rule that is exact for
    the heat kernel times a piecewise-linear integrand, so positivity of the
    integrand survives discretization.  Divergence of the iterates inside
    the requested horizon is data, not an error.
    """
    fujita_check(u0.grid.n, b)
    if l_max < 1:
        raise ValidationError("need at least one iterate")
    if mesh is None:
        if T is None or T <= 0:
            raise ValidationError("need a positive horizon T or an explicit mesh")
        mesh = np.linspace(0.0, T, steps + 1)
    mesh = np.asarray(mesh, dtype=float)
    if mesh[0] != 0.0 or np.any(np.diff(mesh) <= 0):
        raise ValidationError("iteration mesh must start at 0 and increase strictly")
    grid = u0.grid
    q2 = grid.abs2_mesh()
    pshape = padded_modes(grid.modes, pad if pad is not None else (b + 1) / 2.0, b)
    J = len(mesh) - 1

    heat = [np.exp(-q2 * ts) for ts in mesh]
    c0 = u0.coeffs.astype(complex)
    current = [heat[j] * c0 for j in range(J + 1)]
    iterates = [current]
    for _ in range(1, l_max):
        g = [dealiased_power_array(current[j], b, pshape)[0] for j in range(J + 1)]
        nxt = [c0.copy()]
        acc = np.zeros_like(c0)
        for j in range(J):
            h = mesh[j + 1] - mesh[j]
            wl, wr = _pw_weights(q2, h)
            acc = np.exp(-q2 * h) * acc + wl * g[j] + wr * g[j + 1]
            nxt.append(heat[j + 1] * c0 + acc)
        iterates.append(nxt)
        current = nxt
    return PicardRun(
        grid=grid,
        times=mesh,
        iterates=[np.stack(it) for it in iterates],
        nonneg=u0.nonneg_spectrum,
        real_valued=u0.real_valued,
    )


# ---------------------------------------------------------------------------
# lower-bound verification and weighted-norm diagnostics

@dataclass
class LowerBoundReport:
    entries: list[dict]
    overall: str  # "PASS" | "FAIL" | "PARTIAL"

    def as_json(self) -> dict:
        return {"overall": self.overall, "entries": self.entries}


def verify_lower_bound(
    source: Callable[[float], SpectralField | None],
    w_hat: SpectralField,
    params: CertificateParams,
    k_max: int = 2,
    eps_t: float | None = None,
    A: float | None = None,
) -> LowerBoundReport:
    """Compare a computed spectral state against the certified lower bounds.

    For each level k <= k_max the state at t_k + eps_t is probed on the
    support of the level-k bound; the margin is the worst pointwise excess.
    A probe passes when the margin is above -1e-8 times the state's l1 mass.
    A source returning None marks the entry unavailable (partial report).
    """
    if eps_t is None:
        eps_t = 0.01 * params.delta
    if eps_t <= 0:
        raise ValidationError("probe offset must be positive")
    amp = params.A if A is None else A
    entries = []
    any_missing = False
    all_pass = True
    for k in range(k_max + 1):
        t_probe = params.t_k(k) + eps_t
        state = source(t_probe)
        if state is None:
            entries.append({"k": k, "t_probe": t_probe, "status": "unavailable"})
            any_missing = True
            continue
        lb = lower_bound_field(k, t_probe, amp, w_hat, params)
        mask = np.abs(lb.coeffs) > 0.0
        if np.any(mask):
            margin = float(np.min(state.coeffs.real[mask] - lb.coeffs.real[mask]))
        else:
            margin = 0.0
        tol = 1e-8 * l1_spectrum(state)
        ok = margin >= -tol
        all_pass &= ok
        entries.append(
            {
                "k": k,
                "t_probe": t_probe,
                "margin": margin,
                "tolerance": tol,
                "status": "pass" if ok else "fail",
            }
        )
    overall = "PARTIAL" if any_missing else ("PASS" if all_pass else "FAIL")
    return LowerBoundReport(entries, overall)


def theorem1_diagnostics(traj: Trajectory, p: float) -> tuple[float, float]:
    """(sup_t z(t), z at the earliest positive sample) for z = t**(sigma/2) ||u||_p.

    p must lie strictly inside the admissible window; the trajectory must
    have recorded its weighted norm with the same exponent.
    """
    lo, hi = admissible_window(traj.n, traj.b)
    if not (lo < p < hi):
        raise ValidationError(
            f"exponent p={p} outside the admissible window ({lo}, {hi})"
        )
    if abs(p - traj.z_exponent) > 1e-12 * max(1.0, p):
        raise ValidationError(
            f"trajectory recorded weighted norms for p={traj.z_exponent}, not p={p}; rerun"
        )
    if len(traj.t) == 0:
        raise ValidationError("empty trajectory")
    z_sup = float(np.max(traj.z_norm))
    positive = np.nonzero(traj.t > 0)[0]
    z_first = float(traj.z_norm[positive[0]]) if positive.size else 0.0
    return z_sup, z_first
