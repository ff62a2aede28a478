"""Command line entry point.

    opentunnel relax|propagate|model|analyze --config FILE --out DIR
    opentunnel sweep --config FILE --param T --values 0.1,0.6,0.9 --workers 2 --out DIR

Every run validates its configuration before touching the disk, writes
into a scratch directory and renames it into place only on success, so a
failed run leaves no partial output.  Exit codes: 0 success, 2 bad
configuration, 3 numerical instability or corrupted data, 4 non-convergence.
"""
import argparse
import csv
import hashlib
import json
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import (
    RunConfig,
    SUBCOMMANDS,
    format_config,
    load_config,
    parse_config,
    validate,
    with_override,
)
from .errors import ConfigurationError, OpenTunnelError
from .lattice import make_grid
from .potential import PotentialSpec, write_potential_csv

__all__ = ["main", "run", "sweep", "run_hash"]

FIDELITY_NOTE = (
    "reduced domain with absorbing boundary; agreement with full-domain "
    "reference dynamics is checked at trend level only"
)
UNITS = "# units: dimensionless (hbar = m = 1)\n"


def run_hash(cfg, subcommand):
    text = f"{subcommand}\n{format_config(cfg)}{__version__}\n"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class _Writer:
    """Collects output files for one run inside a scratch directory."""

    def __init__(self, root, tag):
        self.root = root
        self.tag = tag
        self.files = []

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.root, name)

    def comment(self):
        return f"run {self.tag} (see manifest.json)"

    def table(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# {self.comment()}\n")
            fh.write(UNITS)
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])

    def matrix(self, name, axis, values):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# {self.comment()}\n")
            fh.write(UNITS)
            w = csv.writer(fh)
            w.writerow(["k_row"] + [_fmt(a) for a in axis])
            for a, row in zip(axis, values):
                w.writerow([_fmt(a)] + [_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _check(name, ok, detail=""):
    return {"name": name, "passed": bool(ok), "detail": detail}


# -- subcommands -------------------------------------------------------------


def _relax(cfg, out):
    from .observables import density_of_state
    from .solver.ground import relax_ground_state
    from .solver.pair import exact_pair_energy

    grid = make_grid(cfg.x_min, cfg.x_max, cfg.n_points)
    state, e = relax_ground_state(cfg.N, cfg.lambda0, grid, cfg.interaction_width, kind=cfg.solver_kind)
    rho = density_of_state(state)
    out.table("density.csv", ["x", "rho"], zip(grid.x, rho))
    write_potential_csv(out.path("potential.csv"), PotentialSpec(cfg.T), grid.x, comment=out.comment())
    norm = state.norm()
    checks = [
        _check("normalised", abs(norm - 1) < 1e-10, f"norm={norm!r}"),
        _check("exchange_symmetric", state.symmetry_error() < 1e-10, f"max={state.symmetry_error():.3e}"),
    ]
    results = {"energy": e, "norm": norm}
    if cfg.N == 2 and cfg.solver_kind == "exact":
        ref = exact_pair_energy(cfg.lambda0)
        results["pair_oracle_energy"] = ref
        checks.append(_check("matches_pair_oracle", abs(e - ref) < 1e-4, f"diff={e - ref:.3e}"))
    return results, checks, (state, e)


def _model_lines(cfg):
    from .model import emission_spectrum, energy_table, predict_final_state

    table = energy_table(cfg.N, cfg.lambda0, cfg.energy_source)
    spectrum = emission_spectrum(cfg.N, cfg.T, table)
    final = predict_final_state(cfg.N, cfg.T, table)
    return table, spectrum, final


def _propagate(cfg, out, keep_analysis=False):
    from .observables import detect_peaks
    from .solver.dynamics import Absorber, propagate

    results, checks, (state, e0) = _relax(cfg, out)
    grid = state.grid
    spec = PotentialSpec(cfg.T)
    absorber = Absorber(cfg.onset, cfg.absorber_strength, cfg.absorber_order)
    keep = [cfg.t_analysis] if keep_analysis else []
    traj = propagate(
        state, spec, cfg.dt, cfg.t_final, absorber, cfg.snapshot_stride,
        precision=cfg.precision, inject_interval=cfg.inject_interval,
        sector_rank=cfg.sector_rank, keep_times=keep,
    )
    table, spectrum, final = _model_lines(cfg)
    open_k = [ln.k for ln in spectrum if not ln.closed]

    snaps = traj.snapshots
    out.table("pnot.csv", ["t", "pnot"], [(s.t, s.pnot) for s in snaps])
    out.table("norm.csv", ["t", "norm", "particle_fraction"], [(s.t, s.norm, s.particle_fraction) for s in snaps])
    out.table(
        "rho_k.csv", ["t", "k", "value"],
        [(s.t, k, v) for s in snaps for k, v in zip(grid.k, s.momentum_density)],
    )
    out.table("rho_x.csv", ["t", "x", "value"], [(s.t, x, v) for s in snaps for x, v in zip(grid.x, s.density)])
    out.table(
        "occupations.csv", ["t"] + [f"f{i + 1}" for i in range(4)],
        [[s.t] + list(s.occupations) for s in snaps],
    )
    peak_rows = []
    for s in snaps:
        for kp, h in detect_peaks(s.momentum_density, grid.k, cfg.peak_k_floor, cfg.peak_prominence):
            km = min(open_k, key=lambda k: abs(k - kp)) if open_k else None
            peak_rows.append((s.t, kp, h, km, None if km is None else kp - km))
    out.table("peaks.csv", ["t", "k_peak", "height", "k_model", "delta"], peak_rows)

    last = snaps[-1]
    leading = detect_peaks(last.momentum_density, grid.k, cfg.peak_k_floor, cfg.peak_prominence)
    parseval = max(
        abs(np.sum(s.density) * grid.dx - np.sum(s.momentum_density) * grid.dk) for s in snaps
    )
    norms = traj.norms
    checks += [
        _check("norm_non_increasing", bool(np.all(np.diff(norms) <= 1e-12 + 1e-5 * (cfg.precision == "single"))),
               f"final norm={norms[-1]!r}"),
        _check("parseval", parseval < 1e-10, f"max deviation={parseval:.3e}"),
    ]
    results.update(
        {
            "final_time": last.t,
            "final_pnot": last.pnot,
            "final_norm": last.norm,
            "final_particle_fraction": last.particle_fraction,
            "predicted_final_state": final.label,
            "predicted_pnot": final.nonescape,
            "model_momenta": [None if ln.closed else ln.k for ln in spectrum],
            "chemical_potentials": [ln.mu for ln in spectrum],
            "energy_sources": table.sources(),
            "leading_peak": leading[0][0] if leading else None,
            "sector_compression_loss": traj.compression_loss,
            "fidelity": FIDELITY_NOTE,
        }
    )
    return results, checks, traj


def _analyze(cfg, out):
    from .observables import (
        g1, g2, momentum_density, one_body_density_matrix, natural_decomposition, two_body_diagonal,
    )

    results, checks, traj = _propagate(cfg, out, keep_analysis=True)
    t, state = min(traj.kept_states.items(), key=lambda kv: abs(kv[0] - cfg.t_analysis))
    grid = state.grid
    rho1 = one_body_density_matrix(state, "momentum")
    dec = natural_decomposition(one_body_density_matrix(state, "position"))
    window = np.abs(grid.k) <= cfg.correlation_kmax
    kw = grid.k[window]
    c1 = np.abs(g1(rho1)) ** 2
    out.matrix("g1.csv", kw, c1[np.ix_(window, window)])
    results["analysis_time"] = t
    results["occupations_at_analysis"] = list(dec.occupations[:4])
    if state.N >= 2:
        c2 = g2(two_body_diagonal(state, "momentum"), momentum_density(rho1))
        out.matrix("g2.csv", kw, c2[np.ix_(window, window)])
        sym = float(np.nanmax(np.abs(c2 - c2.T)))
        checks.append(_check("g2_swap_symmetric", sym < 1e-10, f"max={sym:.3e}"))
    return results, checks, None


def _model(cfg, out):
    from .model import (
        critical_points, energetics_rows, table_family, write_crossings_csv, write_energetics_csv,
    )

    family = table_family(cfg.N, cfg.energy_source)
    values = np.linspace(cfg.sweep_lo, cfg.sweep_hi, cfg.sweep_points)
    fixed = cfg.T if cfg.model_sweep == "lambda0" else cfg.lambda0
    rows = energetics_rows(cfg.N, family, cfg.model_sweep, fixed, values)
    crossings = critical_points(cfg.N, family, cfg.model_sweep, fixed, cfg.sweep_lo, cfg.sweep_hi,
                                resolution=cfg.sweep_points)
    sources = sorted({s for p in values for s in family(fixed if cfg.model_sweep == "T" else p).sources()})
    write_energetics_csv(out.path("energetics.csv"), cfg.N, rows, cfg.model_sweep, out.comment(), sources)
    write_crossings_csv(out.path("crossings.csv"), crossings, cfg.model_sweep, out.comment())
    table, spectrum, final = _model_lines(cfg)
    out.table(
        "spectrum.csv", ["i", "mu", "k"],
        [(ln.index, ln.mu, "closed" if ln.closed else ln.k) for ln in spectrum],
    )
    results = {
        "predicted_final_state": final.label,
        "predicted_pnot": final.nonescape,
        "final_state_energy": final.energy,
        "chemical_potentials": [ln.mu for ln in spectrum],
        "model_momenta": [None if ln.closed else ln.k for ln in spectrum],
        "crossings": [[c.parameter, list(c.first), list(c.second)] for c in crossings],
        "n_crossings": len(crossings),
        "energy_sources": sources,
    }
    checks = [_check("initial_state_available", final is not None)]
    return results, checks, None


_RUNNERS = {"relax": _relax, "propagate": _propagate, "model": _model, "analyze": _analyze}


def _prepare_dir(out_dir):
    if os.path.exists(out_dir):
        if not os.path.isdir(out_dir) or (os.listdir(out_dir) and not os.path.exists(
                os.path.join(out_dir, "manifest.json"))):
            raise ConfigurationError(f"output path {out_dir} exists and is not a previous run directory")
    parent = os.path.dirname(os.path.abspath(out_dir)) or "."
    os.makedirs(parent, exist_ok=True)
    scratch = os.path.join(parent, f".{os.path.basename(os.path.abspath(out_dir))}.partial-{os.getpid()}")
    shutil.rmtree(scratch, ignore_errors=True)
    os.makedirs(scratch)
    return scratch


def _commit(scratch, out_dir):
    if os.path.exists(out_dir):
        shutil.rmtree(out_dir)
    os.replace(scratch, out_dir)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


def run(cfg, subcommand, out_dir=None):
    """Execute one subcommand; returns the manifest dictionary."""
    validate(cfg, subcommand)
    out_dir = out_dir or cfg.output_dir
    scratch = _prepare_dir(out_dir)
    tag = run_hash(cfg, subcommand)
    writer = _Writer(scratch, tag)
    start = time.perf_counter()
    try:
        with open(writer.path("config.txt"), "w") as fh:
            fh.write(format_config(cfg))
        results, checks, _ = _RUNNERS[subcommand](cfg, writer)
        manifest = {
            "subcommand": subcommand,
            "run_hash": tag,
            "code_version": __version__,
            "config": format_config(cfg),
            "results": results,
            "checks": checks,
            "all_checks_passed": all(c["passed"] for c in checks),
            "outputs": sorted(writer.files) + ["manifest.json"],
        }
        if not cfg.deterministic:
            manifest["wall_time_s"] = time.perf_counter() - start
        with open(os.path.join(scratch, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
            fh.write("\n")
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    _commit(scratch, out_dir)
    return manifest


def _member(args):
    cfg_text, subcommand, out_dir = args
    cfg = parse_config(cfg_text)
    try:
        m = run(cfg, subcommand, out_dir)
        return {"status": "ok", "exit_code": 0, "results": m["results"]}
    except OpenTunnelError as exc:
        return {"status": "failed", "exit_code": exc.exit_code, "message": str(exc), "results": {}}


def sweep(cfg, parameter, values, out_dir=None, workers=1):
    """One isolated run per value plus ``summary.csv`` joining model and measurement."""
    if parameter not in ("T", "lambda0"):
        raise ConfigurationError("sweep parameter must be T or lambda0")
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    out_dir = out_dir or cfg.output_dir
    subcommand = cfg.sweep_command
    members = []
    for v in values:
        member_cfg = with_override(cfg, parameter, float(v))
        members.append((format_config(member_cfg), subcommand, os.path.join(out_dir, f"{parameter}_{float(v)!r}")))
    os.makedirs(out_dir, exist_ok=True)
    if workers == 1:
        outcomes = [_member(m) for m in members]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_member, members))
    rows = []
    for v, o in zip(values, outcomes):
        r = o["results"]
        ks = (r.get("model_momenta") or []) + [None, None]
        rows.append([
            float(v), o["status"], o["exit_code"], r.get("predicted_final_state"), r.get("predicted_pnot"),
            ks[0], ks[1], r.get("leading_peak"), r.get("final_pnot"), o.get("message", ""),
        ])
    tag = run_hash(cfg, f"sweep:{parameter}:{','.join(repr(float(v)) for v in values)}")
    writer = _Writer(out_dir, tag)
    writer.table(
        "summary.csv",
        [parameter, "status", "exit_code", "predicted_state", "predicted_pnot", "k1_model", "k2_model",
         "k_peak", "final_pnot", "message"],
        rows,
    )
    manifest = {
        "subcommand": "sweep",
        "member_command": subcommand,
        "parameter": parameter,
        "values": [float(v) for v in values],
        "run_hash": tag,
        "code_version": __version__,
        "config": format_config(cfg),
        "members": [os.path.basename(m[2]) for m in members],
        "failed": [float(v) for v, o in zip(values, outcomes) if o["status"] != "ok"],
        "outputs": ["summary.csv", "manifest.json"],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return manifest, rows


def _parser():
    p = argparse.ArgumentParser(prog="opentunnel", description="Bosons tunnelling over a threshold into open space.")
    p.add_argument("command", choices=SUBCOMMANDS + ("sweep",))
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--param", help="sweep parameter: T or lambda0")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--workers", type=int, default=1, help="concurrent sweep members")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        for item in args.set:
            if "=" not in item:
                raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            cfg = with_override(cfg, key.strip(), value.strip())
        if args.command == "sweep":
            if not args.param:
                raise ConfigurationError("sweep needs --param")
            raw = (args.values or "").split(",")
            try:
                values = [float(v) for v in raw if v.strip()]
            except ValueError:
                raise ConfigurationError(f"bad --values {args.values!r}") from None
            manifest, _ = sweep(cfg, args.param, values, args.out, args.workers)
            print(json.dumps({"status": "ok", "failed": manifest["failed"]}))
            return 0
        manifest = run(cfg, args.command, args.out)
        print(json.dumps({"status": "ok", "run_hash": manifest["run_hash"],
                          "results": manifest["results"]}, default=_json_default))
        return 0
    except OpenTunnelError as exc:
        print(json.dumps({"status": "error", "category": exc.category, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
