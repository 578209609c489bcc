"""Command line interface: ``monitored-chain <subcommand>``.

Every subcommand writes its outputs under ``--out`` together with a
``manifest.json`` (config hash, code version, timestamps, subcommand, input
and output files with SHA-256, tolerances).  JSON reports additionally embed
the timestamp-free part of the manifest.

Exit status: 0 on success, 1 on a numerical or runtime failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ChainError, ConfigError

logger = logging.getLogger("monitored_chain")

#: numerical settings selected by ``--tolerance-profile``
TOLERANCE_PROFILES = {
    "strict": {
        "riccati_verify": True,
        "riccati_drift_tol": 1e-8,
        "physical_tol": 1e-8,
        "assembly_tol": 1e-8,
        "qp_grid_points": 1024,
        "oracle_tol": 1e-5,
        "oracle_n_max": 10,
        "oracle_dt_sde": 1e-3,
        "qp_relative_bound": 0.10,
    },
    "fast": {
        "riccati_verify": False,
        "riccati_drift_tol": 1e-6,
        "physical_tol": 1e-6,
        "assembly_tol": 1e-6,
        "qp_grid_points": 512,
        "oracle_tol": 1e-5,
        "oracle_n_max": 8,
        "oracle_dt_sde": 2e-3,
        "qp_relative_bound": 0.10,
    },
}

PIPELINES = ("fig2", "area-law")


class StageError(ChainError):
    """A pipeline stage failed; the message names the stage."""


# ---------------------------------------------------------------------------
# helpers


def _config(args, required=True):
    from .model import CONFIG_KEYS, config_from_mapping, load_config

    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", key or None)
        overrides[key.strip()] = value.strip()
    if args.config is None:
        if not overrides:
            if required:
                raise ConfigError("this subcommand needs --config", "config")
            return None
        return config_from_mapping(overrides)
    if not Path(args.config).is_file():
        raise ConfigError(f"config file {args.config} not found", "config")
    cfg = load_config(args.config)
    if overrides:
        raw = {k: v for k, v in cfg.to_dict().items() if k in CONFIG_KEYS}
        raw = {k: v for k, v in raw.items() if v is not None}
        if "m" in overrides and "omega0" not in overrides:
            raw.pop("omega0", None)
        raw.update(overrides)
        cfg = config_from_mapping(raw)
    return cfg


def _profile(args) -> dict:
    return dict(TOLERANCE_PROFILES[args.tolerance_profile])


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, subcommand, cfg, prof):
    m = io.RunManifest.start(subcommand, cfg, prof, root=args.out)
    m.notes["threads"] = args.threads
    m.notes["tolerance_profile"] = args.tolerance_profile
    return m


def _stamp(manifest: io.RunManifest) -> dict:
    """Timestamp-free manifest summary embedded in JSON reports."""
    return {
        "subcommand": manifest.subcommand,
        "config_hash": manifest.config_hash,
        "code_version": manifest.code_version,
        "tolerances": manifest.tolerances,
    }


def _times(cfg, t_max=None, dt_out=None):
    t_max = cfg.t_max if t_max is None else t_max
    dt_out = cfg.dt_out if dt_out is None else dt_out
    if not (t_max >= 0 and dt_out > 0):
        raise ConfigError("need t_max >= 0 and dt_out > 0", "dt_out")
    return dt_out * np.arange(int(math.floor(t_max / dt_out + 1e-9)) + 1)


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except ConfigError:
        raise
    except (ChainError, np.linalg.LinAlgError) as exc:
        raise StageError(f"stage {name!r} failed: {exc}") from exc


def diffusive_window(cfg) -> tuple[float, float]:
    """``[5/gamma, L/(4 v_max)]``: after the gapped transient, before finite-size effects."""
    from .dynamics import transient_time
    from .entropy import max_velocity

    return (transient_time(cfg.gamma), cfg.L / (4 * max_velocity(cfg)))


# ---------------------------------------------------------------------------
# stages shared by subcommands and pipelines


def stage_bands(cfg, out: Path, manifest, k_points=None):
    from .bloch import band_expansion, bandstructure, closed_form_k0
    from .entropy import max_velocity

    if k_points:
        k = -np.pi + 2 * np.pi * (np.arange(k_points) + 1) / k_points
    else:
        k = np.sort(cfg.k_mesh)
    bs = bandstructure(cfg, k)
    rows = [
        (float(ki), j, float(bs.E[i, j].real), float(bs.E[i, j].imag))
        for i, ki in enumerate(bs.k)
        for j in range(cfg.R)
    ]
    manifest.add_output(io.write_csv(out / "bands.csv", ["k", "band_index", "re_E", "im_E"], rows))
    exp = band_expansion(cfg)
    closed = closed_form_k0(cfg.R, cfg.mass, cfg.gamma)
    report = {
        "expansion": exp.to_dict(),
        "site_velocity": exp.site_velocity,
        "closed_form_k0": [[float(e.real), float(e.imag)] for e in closed],
        "max_velocity": max_velocity(cfg),
        "manifest": _stamp(manifest),
    }
    manifest.add_output(io.write_json(out / "bands_expansion.json", report))
    return bs, exp


def stage_evolve(cfg, prof, times, method="riccati", dt=None):
    from .dynamics import generator_stack, initial_field, integrate_riccati, slow_mode_trajectory
    from .bloch import canonical_forms

    forms = canonical_forms(cfg)
    if method == "slow-exact":
        return slow_mode_trajectory(cfg, times, forms), forms
    X, Y = generator_stack(forms)
    traj = integrate_riccati(
        initial_field(cfg, forms),
        X,
        Y,
        times,
        dt=dt,
        verify=prof["riccati_verify"],
        drift_tol=prof["riccati_drift_tol"],
        physical_tol=prof["physical_tol"],
    )
    traj.meta["method"] = "riccati"
    return traj, forms


def sigma_psi(traj, forms, i):
    W = np.stack([f.W for f in forms])
    return W @ traj.sigma[i] @ np.swapaxes(W.conj(), -1, -2)


def stage_entropy(cfg, prof, traj, forms, n_cells_A):
    from .entropy import EntropyTrace, assemble_from_psi, gaussian_entropy

    S = np.array(
        [
            gaussian_entropy(assemble_from_psi(sigma_psi(traj, forms, i), n_cells_A, prof["assembly_tol"]))
            for i in range(len(traj))
        ]
    )
    return EntropyTrace(np.asarray(traj.times), S, "riccati", {"n_cells_A": n_cells_A})


def stage_qp(cfg, prof, times, decay="exact"):
    from .entropy import EntropyTrace, asymptotic_coefficient, qp_entropy, qp_grid, qp_inputs

    inputs = qp_inputs(cfg, qp_grid(prof["qp_grid_points"]), decay=decay)
    traces = [
        EntropyTrace(times, qp_entropy(inputs, times), "qp"),
        EntropyTrace(times, qp_entropy(inputs, times, L=cfg.L), "qp-finite"),
    ]
    b, b_j, g_j = asymptotic_coefficient(inputs)
    traces.append(EntropyTrace(times, b * np.sqrt(times), "asymptotic"))
    info = {
        "nu": inputs.nu,
        "Gamma": inputs.Gamma,
        "site_velocity": inputs.v0,
        "b": b,
        "b_per_band": b_j,
        "g_per_band": np.where(np.isfinite(g_j), g_j, 0.0) if len(g_j) else g_j,
        "decay": decay,
    }
    return traces, info


def _entropy_rows(traces):
    for tr in traces:
        yield from tr.rows()


def qp_comparison(times, S_ric, S_qp, S_ss, window) -> dict:
    """Relative deviation of ``S_qp + S_ss`` (and of bare ``S_qp``) from ``S_ric`` in ``window``."""
    times = np.asarray(times)
    sel = (times >= window[0]) & (times <= window[1])
    if not sel.any():
        return {"window": list(window), "samples": 0}
    ref = S_ric[sel]
    with_ss = np.abs(S_qp[sel] + S_ss - ref) / np.abs(ref)
    bare = np.abs(S_qp[sel] - ref) / np.abs(ref)
    return {
        "window": list(window),
        "samples": int(sel.sum()),
        "steady_state_entropy": S_ss,
        "max_relative_error": float(with_ss.max()),
        "max_relative_error_without_steady_state": float(bare.max()),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_bands(args):
    cfg = _config(args)
    out = _out(args)
    m = _manifest(args, "bands", cfg, _profile(args))
    stage_bands(cfg, out, m, args.k_points)
    m.finish()
    return 0


def cmd_evolve(args):
    cfg = _config(args)
    prof = _profile(args)
    out = _out(args)
    m = _manifest(args, "evolve", cfg, prof)
    times = _times(cfg, args.t_max, args.dt_out)
    traj, forms = stage_evolve(cfg, prof, times, args.method, args.dt)
    rows = []
    R2 = 2 * cfg.R
    for i, t in enumerate(traj.times):
        d = np.diagonal(traj.sigma[i], axis1=-2, axis2=-1)
        for n, k in enumerate(traj.k):
            for c in range(R2):
                rows.append((float(t), float(k), c, float(d[n, c].real), float(d[n, c].imag)))
    m.add_output(io.write_csv(out / "sigma.csv", ["t", "k", "component", "re_sigma", "im_sigma"], rows))
    if args.dump_every:
        snap_dir = out / "snapshots"
        for i in range(0, len(traj), args.dump_every):
            path = io.write_snapshot(snap_dir / f"snap_{i:06d}.bin", sigma_psi(traj, forms, i), cfg.L, cfg.R, traj.times[i])
            m.add_output(path)
    summary = {
        "method": args.method,
        "n_times": len(traj),
        "dt": traj.dt,
        "error_estimate": traj.error_estimate,
        "hermiticity_drift": traj.hermiticity_drift,
        "physicality_margin": traj.meta.get("physicality_margin"),
        "manifest": _stamp(m),
    }
    m.add_output(io.write_json(out / "evolve.json", summary))
    m.finish()
    return 0


def _snapshot_entropy(paths, n_cells_A, tol):
    from .entropy import EntropyTrace, assemble_from_psi, gaussian_entropy
    from .errors import AssemblyError

    times, S, shape = [], [], None
    for p in paths:
        L, R, t, sig = io.read_snapshot(p)
        if shape is None:
            shape = (L, R)
            n_cells_A = (L // 2) // R if n_cells_A is None else n_cells_A
        elif shape != (L, R):
            raise ChainError(f"{p}: snapshot L, R = {(L, R)} differ from {shape}")
        times.append(t)
        try:
            cov = assemble_from_psi(sig, n_cells_A, tol)
        except AssemblyError as exc:
            raise AssemblyError(
                f"{p}: {exc}; fields from --method slow-exact are per-band approximations "
                "and do not define a real-space state"
            ) from exc
        S.append(gaussian_entropy(cov))
    order = np.argsort(times, kind="stable")
    return EntropyTrace(np.asarray(times)[order], np.asarray(S)[order], "riccati", {"n_cells_A": n_cells_A}), shape


def cmd_entropy(args):
    from .entropy import default_region

    prof = _profile(args)
    out = _out(args)
    if args.snapshots:
        paths = sorted(Path(args.snapshots).glob("*.bin"))
        if not paths:
            raise ChainError(f"no snapshot files in {args.snapshots}")
        cfg = _config(args, required=False)
        m = _manifest(args, "entropy", cfg, prof)
        for p in paths:
            m.add_input(p)
        trace, shape = _snapshot_entropy(paths, args.region_cells, prof["assembly_tol"])
        if cfg is not None and shape != (cfg.L, cfg.R):
            raise ConfigError(f"snapshots have L, R = {shape}, config has {(cfg.L, cfg.R)}", "L")
    else:
        cfg = _config(args)
        m = _manifest(args, "entropy", cfg, prof)
        traj, forms = stage_evolve(cfg, prof, _times(cfg))
        n_cells_A = default_region(cfg) if args.region_cells is None else args.region_cells
        trace = stage_entropy(cfg, prof, traj, forms, n_cells_A)
    m.add_output(io.write_csv(out / "entropy.csv", ["t", "S_A", "method"], trace.rows()))
    m.finish()
    return 0


def cmd_qp(args):
    from .entropy import steady_state_entropy

    cfg = _config(args)
    prof = _profile(args)
    out = _out(args)
    m = _manifest(args, "qp-predict", cfg, prof)
    times = _times(cfg, args.t_max, args.dt_out)
    traces, info = stage_qp(cfg, prof, times, args.decay)
    info["steady_state_entropy"] = steady_state_entropy(cfg)
    info["note"] = "qp rows count pair entanglement only; add steady_state_entropy to compare with riccati"
    info["manifest"] = _stamp(m)
    m.add_output(io.write_csv(out / "qp.csv", ["t", "S_A", "method"], _entropy_rows(traces)))
    m.add_output(io.write_json(out / "qp.json", info))
    m.finish()
    return 0


def _fit_report(times, S, window, manifest):
    from .entropy import fit_sqrt, loglog_slope

    fit = fit_sqrt(times, S, window)
    report = fit.to_dict()
    report["loglog_slope"] = loglog_slope(times, S, fit.a, window)
    report["manifest"] = _stamp(manifest)
    return fit, report


def cmd_fit(args):
    prof = _profile(args)
    out = _out(args)
    source = Path(args.input) if args.input else Path(args.out) / "entropy.csv"
    cfg = _config(args, required=args.window is None)
    m = _manifest(args, "fit", cfg, prof)
    m.add_input(source)
    t, S = io.read_curve(source, args.method)
    window = tuple(args.window) if args.window else diffusive_window(cfg)
    _, report = _fit_report(t, S, window, m)
    m.add_output(io.write_json(out / "fit.json", report))
    m.finish()
    return 0


def _write_collapse(out, col, manifest):
    rows = [
        (label, float(x), float(y))
        for label, curve in zip(col.labels, col.curves)
        for x, y in zip(col.grid, curve)
    ]
    manifest.add_output(io.write_csv(out / "collapse.csv", ["label", "t", "rescaled_S"], rows))
    return {
        "metric": col.metric,
        "relative_metric": col.relative_metric,
        "fits": {label: f.to_dict() for label, f in zip(col.labels, col.fits)},
    }


def cmd_collapse(args):
    from .entropy import scaling_collapse

    prof = _profile(args)
    out = _out(args)
    cfg = _config(args, required=False)
    m = _manifest(args, "collapse", cfg, prof)
    traces = []
    for path in args.inputs:
        m.add_input(path)
        traces.append(io.read_curve(path, args.method))
    labels = args.labels or [Path(p).parent.name or Path(p).stem for p in args.inputs]
    if len(labels) != len(traces):
        raise ConfigError("--labels must match --inputs", "labels")
    window = tuple(args.window) if args.window else None
    report = _write_collapse(out, scaling_collapse(traces, window, labels), m)
    report["manifest"] = _stamp(m)
    m.add_output(io.write_json(out / "collapse.json", report))
    m.finish()
    return 0


def cmd_oracle(args):
    from .oracle import FockConfig, three_way_check

    cfg = _config(args)
    prof = _profile(args)
    out = _out(args)
    n_max = prof["oracle_n_max"] if args.n_max is None else args.n_max
    dt_sde = prof["oracle_dt_sde"] if args.dt_sde is None else args.dt_sde
    fc = FockConfig(cfg, n_max=n_max, dt_sde=dt_sde, seed=cfg.seed)
    prof.update(oracle_n_max=n_max, oracle_dt_sde=dt_sde)
    m = _manifest(args, "oracle-check", cfg, prof)
    times = np.linspace(0.0, args.t_max, args.samples)
    report = three_way_check(fc, times, prof["oracle_tol"]).to_dict()
    report["n_max"] = n_max
    report["dt_sde"] = dt_sde
    report["manifest"] = _stamp(m)
    m.add_output(io.write_json(out / "oracle.json", report))
    m.finish()
    if not report["passed"]:
        print(f"oracle check failed: {report['deviations']}", file=sys.stderr)
        return 1
    return 0


def pipeline_fig2(cfg, prof, out: Path, m):
    from .entropy import EntropyTrace, default_region, peak_time, scaling_collapse, steady_state_entropy

    _stage("bands", stage_bands, cfg, out, m)
    times = _times(cfg)
    traj, forms = _stage("evolve", stage_evolve, cfg, prof, times)
    n_cells_A = default_region(cfg)
    ric = _stage("entropy", stage_entropy, cfg, prof, traj, forms, n_cells_A)
    qp_traces, qp_info = _stage("qp-predict", stage_qp, cfg, prof, times)
    S_ss = _stage("steady-state", steady_state_entropy, cfg, n_cells_A, forms)
    m.add_output(io.write_csv(out / "entropy.csv", ["t", "S_A", "method"], _entropy_rows([ric] + qp_traces)))

    lo, hi = _stage("window", diffusive_window, cfg)
    window = (lo, min(hi, float(times[-1])))
    _, report = _stage("fit", _fit_report, times, ric.S, window, m)
    qp, qpf = qp_traces[0].S, qp_traces[1].S
    report["qp_comparison"] = qp_comparison(times, ric.S, qp, S_ss, window)
    bound = prof["qp_relative_bound"]
    report["qp_comparison"]["bound"] = bound
    report["qp_comparison"]["within_bound"] = report["qp_comparison"].get("max_relative_error", math.inf) <= bound
    report["qp"] = {k: v for k, v in qp_info.items()}
    report["n_cells_A"] = n_cells_A
    i_peak = int(np.argmax(ric.S))
    if 0 < i_peak < len(times) - 1:
        report["peak"] = {"riccati": peak_time(times, ric.S), "qp_finite": peak_time(times, qpf + S_ss)}
    m.add_output(io.write_json(out / "fit.json", report))

    qp_total = EntropyTrace(times, qpf + S_ss, "qp-finite")
    col = _stage(
        "collapse", scaling_collapse, [(times, ric.S), (times, qp_total.S)], window, ["riccati", "qp-finite"]
    )
    summary = _write_collapse(out, col, m)
    m.notes["collapse_metric"] = summary["metric"]
    m.notes["qp_relative_bound"] = bound
    m.notes["qp_max_relative_error"] = report["qp_comparison"].get("max_relative_error")


def pipeline_area_law(cfg, prof, out: Path, m):
    from .entropy import default_region, steady_state_entropy

    times = _times(cfg)
    traj, forms = _stage("evolve", stage_evolve, cfg, prof, times)
    n_cells_A = default_region(cfg)
    ric = _stage("entropy", stage_entropy, cfg, prof, traj, forms, n_cells_A)
    m.add_output(io.write_csv(out / "entropy.csv", ["t", "S_A", "method"], ric.rows()))
    S_ss = _stage("steady-state", steady_state_entropy, cfg, n_cells_A, forms)
    S_final = float(ric.S[-1])
    tail = ric.S[times >= times[-1] / 2]
    variation = float(np.ptp(tail) / max(abs(S_final), 1e-300))
    tol = 0.05 * max(abs(S_final), 1e-12)
    outside = np.nonzero(np.abs(ric.S - S_final) > tol)[0]
    t_sat = float(times[outside[-1] + 1]) if len(outside) and outside[-1] + 1 < len(times) else float(times[0])
    report = {
        "S_final": S_final,
        "S_max": float(ric.S.max()),
        "steady_state_entropy": S_ss,
        "late_relative_variation": variation,
        "saturation_time": t_sat,
        "saturated": variation < 0.05,
        "n_cells_A": n_cells_A,
        "manifest": _stamp(m),
    }
    m.add_output(io.write_json(out / "area_law.json", report))


def cmd_pipeline(args):
    cfg = _config(args)
    prof = _profile(args)
    out = _out(args)
    m = _manifest(args, f"pipeline {args.name}", cfg, prof)
    if args.config:
        m.add_input(args.config)
    {"fig2": pipeline_fig2, "area-law": pipeline_area_law}[args.name](cfg, prof, out, m)
    m.finish()
    return 0


# ---------------------------------------------------------------------------
# parser


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    sup = argparse.SUPPRESS
    common.add_argument("--config", default=sup, help="key = value config file")
    common.add_argument("--out", default=sup, help="output directory (default: results)")
    common.add_argument("--threads", type=_positive_int, default=sup, help="worker threads (recorded; see README)")
    common.add_argument("--tolerance-profile", choices=sorted(TOLERANCE_PROFILES), default=sup)
    common.add_argument("--set", action="append", default=sup, metavar="KEY=VALUE", help="override a config key")
    common.add_argument("-v", "--verbose", action="store_true", default=sup)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="monitored-chain",
        description="Entanglement dynamics of a harmonic chain under continuous block-position monitoring.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("bands", parents=[common], help="complex bandstructure and small-k expansion")
    p.add_argument("--k-points", type=_positive_int, default=None, help="uniform k grid (default: the block mesh)")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("evolve", parents=[common], help="evolve the correlation field")
    p.add_argument("--method", choices=["riccati", "slow-exact"], default="riccati")
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--dt-out", type=float, default=None, help="output spacing (default: config dt_out)")
    p.add_argument("--dt", type=float, default=None, help="integrator step (default: stability bound)")
    p.add_argument("--dump-every", type=int, default=0, help="write a snapshot every N output times (0: none)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("entropy", parents=[common], help="region entropy from snapshots or a fresh evolution")
    p.add_argument("--snapshots", default=None, help="directory of snapshot files")
    p.add_argument("--region-cells", type=_positive_int, default=None, help="region size in cells (default: half chain)")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("qp-predict", parents=[common], help="quasiparticle prediction")
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--dt-out", type=float, default=None)
    p.add_argument("--decay", choices=["exact", "expansion"], default="exact")
    p.set_defaults(func=cmd_qp)

    p = sub.add_parser("fit", parents=[common], help="fit S = a + b sqrt(t)")
    p.add_argument("--input", default=None, help="entropy CSV (default: OUT/entropy.csv)")
    p.add_argument("--method", default="riccati", help="method rows to fit")
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("T0", "T1"))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("collapse", parents=[common], help="scaling collapse of several entropy curves")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--labels", nargs="+", default=None)
    p.add_argument("--method", default="riccati")
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("T0", "T1"))
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("oracle-check", parents=[common], help="Fock-space cross-check for L <= 3")
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--dt-sde", type=float, default=None)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--samples", type=_positive_int, default=11)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("pipeline", parents=[common], help="run a named experiment pipeline")
    p.add_argument("name", choices=PIPELINES)
    p.set_defaults(func=cmd_pipeline)
    return parser


DEFAULTS = {
    "config": None,
    "out": "results",
    "threads": 1,
    "tolerance_profile": "strict",
    "set": None,
    "verbose": False,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return 2
    except (ChainError, np.linalg.LinAlgError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
