"""Batch command-line front end.

Every run writes CSV/JSON artifacts plus ``manifest.json`` into the output
directory. Exit codes: 0 success, 1 computation failure, 2 bad config.
"""

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, chirality, circuit, measurement, spectra, topology
from . import io as tio
from ._backend import BACKEND
from ._parallel import THREADS_ENV, resolve_threads
from .lattice import OPEN, build_real_space

COMMANDS = (
    "params", "bands", "butterfly", "currents", "vortex-map", "chern",
    "measure-bands", "measure-feature", "measure-butterfly",
)


def _over_gx(spec, w):
    return np.asarray(w) / spec.g_x


# commands --------------------------------------------------------------------

def cmd_params(cfg, ctx):
    """Derived circuit parameters, plus the row flux for a target g_x."""
    raw = tio.parse_circuit(cfg.get("circuit") if "circuit" in cfg else _missing("config.circuit"))
    rows = circuit.table_rows(raw)
    out = {"derived": circuit.derive_params(raw).as_display(), "table": [
        {"symbol": s, "expression": e, "value": v, "unit": u} for s, e, v, u in rows
    ]}
    target = cfg.get("target")
    if target is not None:
        g_x = tio.parse_quantity(target.get("g_x") if isinstance(target, dict) else None,
                                 "frequency", "config.target.g_x")
        phi_o, phi_e = circuit.solve_row_flux(g_x, raw)
        back_o = circuit._row_g(phi_o, raw, "odd")
        back_e = circuit._row_g(phi_e, raw, "even")
        out["solved_flux"] = {
            "g_x/2pi [MHz]": circuit.to_mhz(g_x),
            "phi_odd [Phi0]": phi_o / circuit.PHI0,
            "phi_even [Phi0]": phi_e / circuit.PHI0,
            "round_trip_error [rad/s]": max(abs(back_o + g_x), abs(back_e + g_x)),
        }
    ctx.json("params.json", out)
    table = []
    for s, e, v, u in rows:
        lo, hi = (v if isinstance(v, tuple) else (v, v))
        table.append((s, e, lo, hi, u))
    ctx.csv("table.csv", ["symbol", "expression", "low", "high", "unit"], table)
    ctx.text("table.txt", circuit.format_table(rows) + "\n")
    return {"rows": len(rows)}


def _missing(path):
    raise tio.ConfigError(path, "required field is missing")


def _k_grid(cfg):
    sweep = cfg.get("sweep", {})
    n = tio.get_int(sweep, "k_points", 401, "config.sweep")
    return spectra.default_k_grid(n)


def cmd_bands(cfg, ctx):
    """Strip bands over k_x with open columns."""
    specs = tio.parse_cases(cfg)
    k = _k_grid(cfg)
    rows, summary = [], []
    for c, s in enumerate(specs):
        if s.col_boundary != OPEN:
            raise tio.ConfigError(f"config.cases[{c}].col_boundary", "strip bands need open columns")
        b = spectra.bands_open_column(s, k, ctx.threads)
        for i, kk in enumerate(k):
            for j in range(b.n_bands):
                rows.append((c, i, kk, j, b.bands[i, j] / s.g_x, b.edge_weight[i, j]))
        summary.append(_case_meta(s))
        if cfg.get("export_matrix", False):
            ctx.matrix(f"hamiltonian_case{c}.csv", build_real_space(s))
    ctx.csv("bands.csv", ["case", "k_index", "k_x", "band", "omega_over_gx", "mean_m"], rows)
    ctx.json("cases.json", summary)
    return {"cases": len(specs)}


def _case_meta(s):
    return {"lattice": tio.lattice_block(s), "L": s.L, "W": s.W, "g_x_rad_s": s.g_x, "g_y_rad_s": s.g_y, "gamma": s.gamma,
            "gamma_over_pi": s.gamma / math.pi, "row_boundary": s.row_boundary, "col_boundary": s.col_boundary}


def _gamma_grid(cfg, default_n=401):
    sweep = cfg.get("sweep", {})
    if "gamma" in sweep:
        return tio.parse_grid(sweep["gamma"], "config.sweep.gamma")
    return spectra.default_gamma_grid(default_n)


def cmd_butterfly(cfg, ctx):
    """Real-space spectrum against flux."""
    specs = tio.parse_cases(cfg)
    gammas = _gamma_grid(cfg)
    rows = []
    for c, s in enumerate(specs):
        bf = spectra.butterfly(s, gammas, ctx.threads)
        for i, g in enumerate(gammas):
            for j, w in enumerate(bf.levels[i]):
                rows.append((c, i, g, j, w / s.g_x))
    ctx.csv("butterfly.csv", ["case", "gamma_index", "gamma", "level", "omega_over_gx"], rows)
    ctx.json("cases.json", [_case_meta(s) for s in specs])
    return {"cases": len(specs), "gamma_points": gammas.size}


def cmd_currents(cfg, ctx):
    """Ground-state bond currents and vortex counts."""
    specs = tio.parse_cases(cfg)
    tol = tio.get_number(cfg.get("vortex", {}), "tol_rel", chirality.DEFAULT_TOL_REL, "config.vortex")
    rows, summary = [], []
    for c, s in enumerate(specs):
        gs = chirality.ground_state(s)
        pat = chirality.bond_currents(gs, s)
        prob = np.abs(gs.grid(s)) ** 2
        for x, y, dx, dy, mag, tag in chirality.quiver_rows(pat, s):
            rows.append((c, x, y, dx / s.g_x, dy / s.g_x, mag / s.g_x, tag))
        entry = _case_meta(s)
        entry.update(
            omega1_over_gx=gs.omega1 / s.g_x,
            degenerate=gs.degenerate,
            vortex_count=chirality.count_vortices(pat, tol),
            max_current_over_gx=pat.max_abs() / s.g_x,
            occupation=prob,
        )
        if s.W == 3:
            entry["chiral_current_over_gx"] = chirality.chiral_current(pat) / s.g_x
        summary.append(entry)
    ctx.csv("currents.csv", ["case", "x", "y", "dx_over_gx", "dy_over_gx", "magnitude_over_gx", "tag"], rows)
    ctx.json("summary.json", {"tol_rel": tol, "cases": summary})
    diag = cfg.get("diagnostic")
    if diag is not None:
        _currents_diagnostic(specs[0], diag, ctx)
    return {"vortex_counts": [e["vortex_count"] for e in summary]}


def _currents_diagnostic(spec, diag, ctx):
    """Ground-energy derivatives over K and quasimomentum profiles at fixed K."""
    K = tio.parse_grid(diag.get("K", {"start": 0.05, "stop": 2.0, "num": 196}), "config.diagnostic.K", "number")
    gammas = tio.parse_grid(diag.get("gammas", ["0.4pi", "0.6pi"]), "config.diagnostic.gammas")
    K_psi = tio.get_number(diag, "psi_prime_K", 0.3, "config.diagnostic")
    d_rows, p_rows, info = [], [], []
    k_nat = 2 * np.pi * (np.arange(spec.L) - spec.L // 2) / spec.L
    for gi, g in enumerate(gammas):
        d1, d2 = chirality.ground_energy_derivatives(spec, K, g)
        for i, kk in enumerate(K):
            d_rows.append((gi, g, kk, d1[i] / spec.g_x, d2[i] / spec.g_x))
        s = spec.with_(gamma=g, g_y=K_psi * spec.g_x)
        gs = chirality.ground_state(s)
        k, amp = chirality.quasimomentum_distribution(gs, s, k_nat)
        for i, kk in enumerate(k):
            for r, m in enumerate(s.m_values):
                p_rows.append((gi, g, kk, int(m), abs(amp[i, r])))
        info.append({"gamma": g, "jump_ratio_d1": chirality.jump_ratio(d1), "jump_ratio_d2": chirality.jump_ratio(d2),
                     "vortex_count_at_psi_prime_K": chirality.count_vortices(chirality.bond_currents(gs, s)),
                     "peak_k_per_row": [float(k[np.argmax(np.abs(amp[:, r]))]) for r in range(s.W)]})
    ctx.csv("derivatives.csv", ["gamma_index", "gamma", "K", "d1_over_gx", "d2_over_gx"], d_rows)
    ctx.csv("psi_prime.csv", ["gamma_index", "gamma", "k_x", "m", "abs_psi_prime"], p_rows)
    ctx.json("diagnostic.json", {"psi_prime_K": K_psi, "cases": info})


def cmd_vortexmap(cfg, ctx):
    """Vortex count and chiral current over a (gamma, K) grid."""
    spec, _ = tio.parse_lattice(cfg.get("lattice") if "lattice" in cfg else _missing("config.lattice"))
    sweep = cfg.get("sweep", {})
    dg, dk = chirality.default_vortex_grids()
    gammas = tio.parse_grid(sweep["gamma"], "config.sweep.gamma") if "gamma" in sweep else dg
    Ks = tio.parse_grid(sweep["K"], "config.sweep.K", "number") if "K" in sweep else dk
    tol = tio.get_number(cfg.get("vortex", {}), "tol_rel", chirality.DEFAULT_TOL_REL, "config.vortex")
    pm = chirality.vortex_map(spec, gammas, Ks, tol, ctx.threads)
    rows = []
    for i, g in enumerate(gammas):
        for j, K in enumerate(Ks):
            rows.append((i, j, g, K, int(pm.vortex_count[i, j]), pm.chiral_current[i, j] / spec.g_x))
    ctx.csv("vortex_map.csv", ["gamma_index", "K_index", "gamma", "K", "vortex_count", "chiral_current_over_gx"], rows)
    summary = {"K_c": pm.K_c, "gamma_c": pm.gamma_c,
               "gamma_c_over_pi": None if pm.gamma_c is None else pm.gamma_c / math.pi,
               "tol_rel": tol, "grid": [gammas.size, Ks.size], "lattice": _case_meta(spec)}
    ctx.json("summary.json", summary)
    return {"K_c": pm.K_c, "gamma_c_over_pi": summary["gamma_c_over_pi"]}


def cmd_chern(cfg, ctx):
    """Berry curvature, Chern numbers and edge-branch counts."""
    spec, _ = tio.parse_lattice(cfg.get("lattice") if "lattice" in cfg else _missing("config.lattice"))
    block = cfg.get("chern")
    if not isinstance(block, dict):
        _missing("config.chern")
    P = tio.get_int(block, "P", None, "config.chern", minimum=-10**6)
    Q = tio.get_int(block, "Q", None, "config.chern")
    grid = tio.get_int(block, "grid", topology.DEFAULT_GRID, "config.chern", minimum=20)
    res = topology.chern_numbers(spec, P, Q, grid)
    out = {"P": P, "Q": Q, "grid": res.grid, "chern": res.chern, "winding": res.winding,
           "max_residue": res.max_residue,
           "gaps_over_gx": [[a / spec.g_x, b / spec.g_x] for a, b in topology.bulk_gaps(spec, P, Q, grid)]}
    edge = block.get("edge_W")
    if edge is not None:
        strip = spec.with_(W=tio.get_int(block, "edge_W", 50, "config.chern"), col_boundary=OPEN,
                           row_boundary=OPEN)
        bands = spectra.bands_open_column(strip, spectra.default_k_grid(801), ctx.threads)
        counts = []
        for a, b in topology.bulk_gaps(spec, P, Q, grid):
            mid = 0.5 * (a + b)
            counts.append({"omega_over_gx": mid / spec.g_x,
                           "top_edge": topology.edge_branch_counts(bands, mid, +1),
                           "bottom_edge": topology.edge_branch_counts(bands, mid, -1)})
        out["edge_branches"] = counts
    field, _ = topology.berry_field(spec, P, Q, grid)
    rows = []
    dens = field.density().imag
    for i, kx in enumerate(field.kx_grid):
        for j, ky in enumerate(field.ky_grid):
            for b in range(Q):
                rows.append((i, j, kx, ky, b, dens[i, j, b]))
    ctx.csv("berry_curvature.csv", ["kx_index", "ky_index", "k_x", "k_y", "band", "F_xy_imag"], rows)
    ctx.json("chern.json", out)
    return {"chern": res.chern, "winding": res.winding}


def cmd_measure_bands(cfg, ctx):
    """Band points from simulated special reconstruction."""
    specs = tio.parse_cases(cfg)
    block = cfg.get("measure", {})
    thr = tio.get_number(block, "threshold_rel", 0.5, "config.measure")
    rows, reports = [], []
    for c, s in enumerate(specs):
        if not s.is_open:
            raise tio.ConfigError(f"config.cases[{c}]", "special reconstruction needs open boundaries")
        pts, rep = measurement.measure_bands_special(s, thr)
        for j, k, w in pts:
            rows.append((c, j, k, w / s.g_x))
        entry = _case_meta(s)
        entry.update(points=len(pts), min_fidelity=min(rep["fidelities"]), in_gap_states=rep["in_gap"],
                     paths=rep["paths"])
        reports.append(entry)
    ctx.csv("band_points.csv", ["case", "state", "k_x", "omega_over_gx"], rows)
    ctx.json("report.json", {"threshold_rel": thr, "cases": reports})
    return {"points": len(rows)}


def cmd_measure_feature(cfg, ctx):
    """Feature-function spectroscopy."""
    spec, _ = tio.parse_lattice(cfg.get("lattice") if "lattice" in cfg else _missing("config.lattice"))
    block = cfg.get("measure", {})
    T = tio.get_number(block, "T", 200.0, "config.measure") / abs(spec.g_x)
    fs = measurement.feature_spectrum(spec, T, reconstruct=bool(block.get("reconstruct", False)))
    ctx.csv("feature.csv", ["omega_over_gx", "F"], zip(fs.omega_grid / spec.g_x, fs.F_values))
    freqs = np.linalg.eigvalsh(build_real_space(spec))
    covered, genuine = measurement.match_peaks(fs.peaks[fs.peaks != 0], freqs, 2 * np.pi / T)
    out = {"T_times_gx": T * spec.g_x, "peaks_over_gx": fs.peaks / spec.g_x, "amplitudes": fs.amplitudes,
           "eigenfrequencies_over_gx": freqs / spec.g_x, "all_recovered": covered, "all_genuine": genuine,
           "warnings": fs.warnings}
    if fs.fidelities is not None:
        out["fidelities"] = fs.fidelities
    ctx.json("feature.json", out)
    return {"peaks": int(fs.peaks.size), "all_recovered": covered}


def cmd_measure_butterfly(cfg, ctx):
    """Site-averaged signal and its spectrum."""
    spec, _ = tio.parse_lattice(cfg.get("lattice") if "lattice" in cfg else _missing("config.lattice"))
    block = cfg.get("measure", {})
    T = tio.get_number(block, "window", 400.0, "config.measure") / abs(spec.g_x)
    bs = measurement.butterfly_signal(spec, T=T)
    ctx.csv("signal.csv", ["t_times_gx", "re_chi", "im_chi"],
            zip(bs.times * spec.g_x, bs.chi.real, bs.chi.imag))
    ctx.csv("spectrum.csv", ["omega_over_gx", "amplitude"], zip(bs.omega_grid / spec.g_x, bs.spectrum))
    freqs = np.linalg.eigvalsh(build_real_space(spec))
    covered, genuine = measurement.match_peaks(bs.peaks, freqs, 2 * np.pi / T)
    ctx.json("peaks.json", {"peaks_over_gx": bs.peaks / spec.g_x, "amplitude_times_LW": bs.amplitudes * spec.dim,
                            "all_recovered": covered, "all_genuine": genuine})
    return {"peaks": int(bs.peaks.size)}


HANDLERS = {
    "params": cmd_params,
    "bands": cmd_bands,
    "butterfly": cmd_butterfly,
    "currents": cmd_currents,
    "vortex-map": cmd_vortexmap,
    "chern": cmd_chern,
    "measure-bands": cmd_measure_bands,
    "measure-feature": cmd_measure_feature,
    "measure-butterfly": cmd_measure_butterfly,
}


# plumbing --------------------------------------------------------------------

class RunContext:
    def __init__(self, out, threads):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.threads = threads
        self.outputs = {}

    def csv(self, name, header, rows):
        p = tio.write_csv(self.out / name, header, rows)
        self.outputs[name] = tio.sha256_file(p)

    def json(self, name, obj):
        p = tio.write_json(self.out / name, obj)
        self.outputs[name] = tio.sha256_file(p)

    def text(self, name, body):
        p = self.out / name
        p.write_text(body)
        self.outputs[name] = tio.sha256_file(p)

    def matrix(self, name, H):
        p = tio.matrix_csv(self.out / name, H)
        self.outputs[name] = tio.sha256_file(p)


def build_parser():
    ap = argparse.ArgumentParser(prog="transmon-harper", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--preset", help="name of a shipped config")
    common.add_argument("--out", help="output directory (default out/<command>)")
    common.add_argument("--seed", type=int, default=None, help="random seed recorded in the manifest")
    common.add_argument("--threads", type=int, default=None, help=f"thread hint; {THREADS_ENV} overrides it")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__.splitlines()[0])
    sub.add_parser("presets", help="list shipped presets")
    return ap


def resolve_config(args):
    cfg = {}
    if args.preset:
        cfg.update(tio.load_preset(args.preset))
    if args.config:
        cfg.update(tio.load_config(args.config))
    if not cfg:
        raise tio.ConfigError("config", "give --config or --preset")
    cfg.pop("command", None)
    cfg.pop("description", None)
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    if args.command == "presets":
        print("\n".join(tio.preset_names()))
        return 0
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        hint = args.threads if args.threads is not None else cfg.get("threads")
        threads = resolve_threads(hint)
        out = args.out or cfg.get("out") or os.path.join("out", args.command)
        ctx = RunContext(out, threads)
        result = HANDLERS[args.command](cfg, ctx)
    except tio.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # numerical failures propagate with their module name
        print(f"{type(e).__module__}.{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    manifest = {
        "tool": "transmon-harper",
        "version": __version__,
        "command": args.command,
        "preset": args.preset,
        "config_hash": tio.config_hash(cfg),
        "config": cfg,
        "seed": seed,
        "threads": threads,
        "threads_env": os.environ.get(THREADS_ENV),
        "backend": BACKEND,
        "wall_clock_s": time.perf_counter() - t0,
        "outputs": dict(sorted(ctx.outputs.items())),
        "result": result,
    }
    tio.write_json(ctx.out / "manifest.json", manifest)
    print(tio.json.dumps(tio._jsonable(result), sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
