"""Command line front end: builders, norms, certificates, simulations, sweeps.

Outputs are machine readable (JSON objects, long-format CSV) and byte
identical across reruns of the same configuration; every file embeds the
run configuration and the package version.  Exit codes: 0 success,
2 validation error, 3 numerical abort, 4 threshold search NOT_FOUND.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .certificate import (
    CertificateParams,
    certified_blowup_n,
    divergence_report,
    growth_sum,
    lemma2_threshold,
    theorem_constant,
)
from .data_builder import BumpSpec, Schedule, build_bump, build_u0n, fujita_check
from .errors import ValidationError
from .littlewood_paley import build_filter_bank, besov_norm
from .solver import (
    BLOWUP_CAP_DEFAULT,
    SolverConfig,
    picard_iterate,
    simulate,
    verify_lower_bound,
)
from .spectral import TorusGrid, l1_spectrum, lp_norm, save_field

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_NOT_FOUND = 4


def _next_pow2(x: float) -> int:
    m = 2
    while m < x:
        m *= 2
    return m


def _split_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(","))


def _split_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(","))


def _grid_from_args(args, n: int, band_needed: float) -> TorusGrid:
    if args.modes is not None:
        modes = _split_ints(args.modes)
        if len(modes) == 1:
            modes = modes * n
        r = _split_ints(args.r) if args.r is not None else (6,) * n
        if len(r) == 1:
            r = r * n
        return TorusGrid(modes, r)
    if args.r is not None:
        r = _split_ints(args.r)
        if len(r) == 1:
            r = r * n
    else:
        r = (6,) + (5,) * (n - 1)
    m1 = _next_pow2(2.0 * band_needed * 2.0 ** r[0] * 1.02)
    modes = (m1,) + tuple(64 for _ in range(n - 1))
    return TorusGrid(modes, r)


def _config_dict(args, parser_keys) -> dict:
    return {k: getattr(args, k) for k in sorted(parser_keys) if k not in ("func", "config")}


def _preamble(config: dict) -> str:
    return f"# nlheat {__version__} config={json.dumps(config, sort_keys=True)}"


def _write_json(path, config: dict, payload: dict) -> None:
    doc = {"tool": "nlheat", "version": __version__, "config": config}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_rows_csv(path, config: dict, header, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(_preamble(config) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _resolve_amplitude(text: str, delta: float, b: int, w_l1: float) -> float:
    text = str(text)
    if text.endswith("x"):
        return float(text[:-1]) * lemma2_threshold(delta, b, w_l1)
    return float(text)


def _bump_for(args, n: int) -> tuple:
    rho = args.rho if args.rho is not None else 1.0 / (2.0 * args.b)
    spec = BumpSpec(rho=rho, amplitude=args.amplitude)
    band = max(getattr(args, "N", 0) or 0, 0)
    band_needed = 1.5 * 2.0 ** band * (8.0 / 3.0) + spec.rho
    grid = _grid_from_args(args, n, band_needed)
    w, w_hat = build_bump(grid, spec)
    return spec, grid, w, w_hat


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_bump(args, keys) -> int:
    spec, grid, w, w_hat = _bump_for(args, args.n)
    config = _config_dict(args, keys)
    if args.out:
        save_field(args.out, w_hat)
    if args.out_json:
        _write_json(
            args.out_json,
            config,
            {
                "rho": spec.rho,
                "amplitude": spec.amplitude,
                "l1_spectrum": l1_spectrum(w_hat),
                "sup": float(np.max(np.abs(w.samples))),
                "grid": {"modes": list(grid.modes), "r": list(grid.r)},
            },
        )
    print(
        f"bump: rho={spec.rho} amplitude={spec.amplitude} "
        f"l1_spectrum={l1_spectrum(w_hat):.12g} grid={grid.modes}"
    )
    return EXIT_OK


def _cmd_data(args, keys) -> int:
    fujita_check(args.n, args.b)
    spec, grid, w, w_hat = _bump_for(args, args.n)
    schedule = Schedule(args.b, eps_mode=args.schedule, eps_value=args.eps_const)
    u, u_hat = build_u0n(grid, args.N, schedule, w_hat)
    config = _config_dict(args, keys)
    if args.out:
        save_field(args.out, u_hat)
    if args.out_json:
        _write_json(
            args.out_json,
            config,
            {
                "N": args.N,
                "b": args.b,
                "n": args.n,
                "rho": spec.rho,
                "schedule": args.schedule,
                "eps": schedule.eps(args.N),
                "l1_spectrum": l1_spectrum(u_hat),
                "sup": float(np.max(np.abs(u.samples))),
                "nonneg_defect": u_hat.nonneg_defect(),
                "grid": {"modes": list(grid.modes), "r": list(grid.r)},
            },
        )
    print(
        f"data: N={args.N} b={args.b} n={args.n} l1_spectrum={l1_spectrum(u_hat):.12g} "
        f"sup={float(np.max(np.abs(u.samples))):.12g}"
    )
    return EXIT_OK


def _cmd_besov(args, keys) -> int:
    fujita_check(args.n, args.b)
    spec, grid, w, w_hat = _bump_for(args, args.n)
    schedule = Schedule(args.b, eps_mode=args.schedule, eps_value=args.eps_const)
    u, _ = build_u0n(grid, args.N, schedule, w_hat)
    s = args.s if args.s is not None else -2.0 / args.b
    p = args.p if args.p is not None else args.n * args.b * (args.b - 1) / 2.0
    q = math.inf if args.q == "inf" else float(args.q)
    bank = build_filter_bank(grid, args.j_min, max(args.N, args.j_min + 1))
    report = besov_norm(u, s, p, q, bank, return_report=True)
    config = _config_dict(args, keys)
    if args.out:
        report.write_csv(args.out, preamble=_preamble(config))
    print(f"besov: s={s} p={p} q={args.q} N={args.N} total={report.total:.12g}")
    return EXIT_OK


def _certificate_inputs(args):
    if args.w_l1 is not None:
        return float(args.w_l1)
    spec, grid, w, w_hat = _bump_for(args, args.n)
    return l1_spectrum(w_hat)


def _cmd_certificate(args, keys) -> int:
    w_l1 = _certificate_inputs(args)
    A = _resolve_amplitude(args.A, args.delta, args.b, w_l1)
    params = CertificateParams(b=args.b, delta=args.delta, A=A, w_l1=w_l1, n=args.n)
    seq = divergence_report(params, args.k_max)
    config = _config_dict(args, keys)
    if args.out_json:
        _write_json(args.out_json, config, {"w_l1": w_l1, **seq.verdict_json()})
    if args.out_csv:
        seq.write_csv(args.out_csv, preamble=_preamble(config))
    print(
        f"certificate: verdict={seq.verdict} marginal={seq.marginal} "
        f"k_star={seq.k_star} A={A:.6g} A_min={seq.A_min:.6g}"
    )
    return EXIT_OK


def _cmd_threshold(args, keys) -> int:
    w_l1 = _certificate_inputs(args)
    schedule = Schedule(args.b, eps_mode=args.schedule, eps_value=args.eps_const)
    result = certified_blowup_n(args.delta, schedule, w_l1, cap=args.cap)
    config = _config_dict(args, keys)
    if args.out_json:
        _write_json(args.out_json, config, result.as_json())
    print(
        f"threshold: status={result.status} N_min={result.N_min} "
        f"extrapolated_log10_N={result.extrapolated_log10_N}"
    )
    return EXIT_OK if result.status == "FOUND" else EXIT_NOT_FOUND


def _simulation(args, w_hat, A):
    cfg = SolverConfig(
        b=args.b,
        dt_max=args.dt_max,
        dt_min=args.dt_min,
        blowup_cap=args.cap,
        t_end=args.t_end,
        record_every=args.record_every,
        linear_only=getattr(args, "linear", False),
    )
    u0 = w_hat.copy()
    u0.coeffs *= A
    return simulate(u0, cfg), cfg


def _cmd_simulate(args, keys) -> int:
    fujita_check(args.n, args.b)
    spec, grid, w, w_hat = _bump_for(args, args.n)
    A = _resolve_amplitude(args.A, args.delta, args.b, l1_spectrum(w_hat))
    traj, cfg = _simulation(args, w_hat, A)
    config = _config_dict(args, keys)
    if args.out_traj:
        traj.write_csv(args.out_traj, preamble=_preamble(config))
    if args.out_json:
        _write_json(args.out_json, config, traj.blowup_json(config))
    if traj.abort is not None:
        print(f"simulate: abort reason={traj.abort['reason']} t={traj.abort['t']:.6g}")
        return EXIT_NUMERIC
    if traj.blowup:
        print(
            f"simulate: blowup T_star_num={traj.blowup['T_star_num']:.6g} "
            f"reason={traj.blowup['reason']}"
        )
    else:
        print(f"simulate: reached t_end={args.t_end} sup={traj.sup_norm[-1]:.6g}")
    return EXIT_OK


def _cmd_verify(args, keys) -> int:
    fujita_check(args.n, args.b)
    spec, grid, w, w_hat = _bump_for(args, args.n)
    w_l1 = l1_spectrum(w_hat)
    A = _resolve_amplitude(args.A, args.delta, args.b, w_l1)
    params = CertificateParams(b=args.b, delta=args.delta, A=A, w_l1=w_l1, n=args.n)
    horizon = params.t_k(args.k_max) + 2.0 * args.eps_t
    probes = [params.t_k(k) + args.eps_t for k in range(args.k_max + 1)]
    mesh = np.union1d(np.linspace(0.0, horizon, args.mesh_steps + 1), probes)
    u0 = w_hat.copy()
    u0.coeffs *= A
    run = picard_iterate(u0, args.b, None, args.l_max, mesh=mesh)
    report = verify_lower_bound(run.source(), w_hat, params, k_max=args.k_max, eps_t=args.eps_t)
    config = _config_dict(args, keys)
    if args.out_json:
        _write_json(args.out_json, config, {"A": A, "w_l1": w_l1, **report.as_json()})
    print(f"verify: overall={report.overall} entries={len(report.entries)}")
    return EXIT_OK


def _cmd_sweep(args, keys) -> int:
    config = _config_dict(args, keys)
    rows = []
    header = ["kind", "b", "delta", "q", "N", "A_mult", "metric", "value", "status"]
    if args.kind == "besov-series":
        qs = _split_floats(args.q)
        Ns = _split_ints(args.N_grid)
        sched = Schedule(args.b, eps_mode=args.schedule, eps_value=args.eps_const)
        for q in qs:
            for N in Ns:
                try:
                    k = np.arange(N + 1, dtype=float)
                    series = float(np.sum(sched.eta(k) ** q) ** (1.0 / q))
                    eps = sched.eps(N)
                    rows.append(["besov-series", args.b, "", q, N, "", "eta_series", series, "ok"])
                    rows.append(["besov-series", args.b, "", q, N, "", "bound_unit_w", eps * series, "ok"])
                except Exception as exc:  # pragma: no cover - recorded, not raised
                    rows.append(["besov-series", args.b, "", q, N, "", "eta_series", "", f"error:{exc}"])
    elif args.kind == "threshold-series":
        Ns = _split_ints(args.N_grid)
        for b in _split_ints(args.b_grid):
            sched = Schedule(b, eps_mode=args.schedule, eps_value=args.eps_const)
            for N in Ns:
                try:
                    tc = theorem_constant(N, args.delta, sched)
                    rows.append(["threshold-series", b, args.delta, "", N, "", "growth_sum", tc.series_sum, "ok"])
                    rows.append(["threshold-series", b, args.delta, "", N, "", "c_value", tc.value, "ok"])
                    rows.append(
                        ["threshold-series", b, args.delta, "", N, "", "c_free",
                         tc.series_sum * tc.prefactor * tc.delta_factor, "ok"]
                    )
                except Exception as exc:  # pragma: no cover
                    rows.append(["threshold-series", b, args.delta, "", N, "", "c_value", "", f"error:{exc}"])
    elif args.kind == "amplitude-ladder":
        fujita_check(args.n, args.b)
        spec, grid, w, w_hat = _bump_for(args, args.n)
        w_l1 = l1_spectrum(w_hat)
        for mult in _split_floats(args.A_grid):
            try:
                A = mult * lemma2_threshold(args.delta, args.b, w_l1)
                traj, cfg = _simulation(args, w_hat, A)
                if traj.blowup:
                    rows.append(["amplitude-ladder", args.b, args.delta, "", "", mult,
                                 "T_star_num", traj.blowup["T_star_num"], "ok"])
                else:
                    rows.append(["amplitude-ladder", args.b, args.delta, "", "", mult,
                                 "T_star_num", "", "no-blowup"])
            except Exception as exc:
                rows.append(["amplitude-ladder", args.b, args.delta, "", "", mult,
                             "T_star_num", "", f"error:{exc}"])
    else:
        raise ValidationError(f"unknown sweep kind {args.kind!r}")
    if args.out:
        _write_rows_csv(args.out, config, header, rows)
    print(f"sweep: kind={args.kind} rows={len(rows)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly

def _add_grid_args(sp):
    sp.add_argument("--modes", default=None, help="per-axis mode counts, comma separated")
    sp.add_argument("--r", default=None, help="per-axis period exponents, comma separated")


def _add_bump_args(sp):
    sp.add_argument("--rho", type=float, default=None, help="bump support radius (default 1/(2b))")
    sp.add_argument("--amplitude", type=float, default=1.0)
    _add_grid_args(sp)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlheat", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nlheat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bump", help="build the spectral bump")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, default=4)
    _add_bump_args(sp)
    sp.add_argument("--out", default=None)
    sp.add_argument("--out-json", dest="out_json", default=None)
    sp.set_defaults(func=_cmd_bump)

    sp = sub.add_parser("data", help="build the oscillatory data family member")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--N", type=int, default=0)
    sp.add_argument("--schedule", choices=("paper", "constant"), default="paper")
    sp.add_argument("--eps-const", dest="eps_const", type=float, default=1.0)
    _add_bump_args(sp)
    sp.add_argument("--out", default=None)
    sp.add_argument("--out-json", dest="out_json", default=None)
    sp.set_defaults(func=_cmd_data)

    sp = sub.add_parser("besov", help="dyadic-block norm of a data family member")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--q", default="inf")
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--j-min", dest="j_min", type=int, default=0)
    sp.add_argument("--schedule", choices=("paper", "constant"), default="paper")
    sp.add_argument("--eps-const", dest="eps_const", type=float, default=1.0)
    _add_bump_args(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_besov)

    sp = sub.add_parser("certificate", help="divergence verdict for amplitude A")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--A", required=True, help="amplitude, or multiple of A_min like '2x'")
    sp.add_argument("--w-l1", dest="w_l1", type=float, default=None)
    sp.add_argument("--k-max", dest="k_max", type=int, default=64)
    _add_bump_args(sp)
    sp.add_argument("--out-json", dest="out_json", default=None)
    sp.add_argument("--out-csv", dest="out_csv", default=None)
    sp.set_defaults(func=_cmd_certificate)

    sp = sub.add_parser("threshold", help="smallest certified family index N")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--schedule", choices=("paper", "constant"), default="paper")
    sp.add_argument("--eps-const", dest="eps_const", type=float, default=1.0)
    sp.add_argument("--w-l1", dest="w_l1", type=float, default=None)
    sp.add_argument("--cap", type=int, default=10 ** 9)
    _add_bump_args(sp)
    sp.add_argument("--out-json", dest="out_json", default=None)
    sp.set_defaults(func=_cmd_threshold)

    sp = sub.add_parser("simulate", help="time-integrate from amplitude A times the bump")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--A", default="2x")
    sp.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    sp.add_argument("--dt-max", dest="dt_max", type=float, default=1e-2)
    sp.add_argument("--dt-min", dest="dt_min", type=float, default=1e-14)
    sp.add_argument("--cap", type=float, default=BLOWUP_CAP_DEFAULT)
    sp.add_argument("--record-every", dest="record_every", type=int, default=1)
    sp.add_argument("--linear", action="store_true")
    _add_bump_args(sp)
    sp.add_argument("--out-traj", dest="out_traj", default=None)
    sp.add_argument("--out-json", dest="out_json", default=None)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("verify", help="check certified lower bounds against iterates")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--A", default="2x")
    sp.add_argument("--k-max", dest="k_max", type=int, default=2)
    sp.add_argument("--eps-t", dest="eps_t", type=float, default=0.01)
    sp.add_argument("--l-max", dest="l_max", type=int, default=3)
    sp.add_argument("--mesh-steps", dest="mesh_steps", type=int, default=96)
    _add_bump_args(sp)
    sp.add_argument("--out-json", dest="out_json", default=None)
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("sweep", help="deterministic parameter sweeps, long-format CSV")
    sp.add_argument("--kind", choices=("besov-series", "threshold-series", "amplitude-ladder"),
                    required=True)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--b", type=int, default=4)
    sp.add_argument("--b-grid", dest="b_grid", default="4,5")
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--q", default="4,8")
    sp.add_argument("--N-grid", dest="N_grid", default="10,100,1000,10000")
    sp.add_argument("--A-grid", dest="A_grid", default="1.5,2,3")
    sp.add_argument("--schedule", choices=("paper", "constant"), default="paper")
    sp.add_argument("--eps-const", dest="eps_const", type=float, default=1.0)
    sp.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    sp.add_argument("--dt-max", dest="dt_max", type=float, default=1e-2)
    sp.add_argument("--dt-min", dest="dt_min", type=float, default=1e-14)
    sp.add_argument("--cap", type=float, default=BLOWUP_CAP_DEFAULT)
    sp.add_argument("--record-every", dest="record_every", type=int, default=8)
    _add_bump_args(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_sweep)

    for name, p in sub.choices.items():
        p.add_argument("--config", default=None, help="JSON file with option defaults")
    return parser




def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub_parser = None
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            sub_parser = action.choices[args.command]
            break
    keys = {a.dest for a in sub_parser._actions if a.dest not in ("help",)}
    keys.add("command")
    try:
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                overrides = json.load(fh)
            unknown = set(overrides) - keys
            if unknown:
                raise ValidationError(f"unknown configuration keys: {sorted(unknown)}")
            sub_parser.set_defaults(**overrides)
            args = parser.parse_args(argv)
        return args.func(args, keys)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
