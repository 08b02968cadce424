"""Command-line front end: ``multistable {simulate,cf,decompose,localize,check}``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alpha import AlphaFunction
from .charfn import CFQuery, InsufficientSamplesError, QuadratureError, cf_joint
from .config import OUTPUT_ENV, CampaignConfig, ConfigError, load_config
from .decomp import decompose_LI, field_decomposition
from .localize import ProbeRangeError, tangent_check
from .series import TimeGrid, draw_series, sample_paths
from .suite import good_integrator_probe, run_suite

log = logging.getLogger("multistable")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _prepare_out(cfg: CampaignConfig) -> Path:
    out = cfg.out_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, command: str, cfg: CampaignConfig, files, extra=None):
    manifest = {"command": command, "version": __version__, "config": cfg.to_dict(),
                "files": {f.name: _sha256(f) for f in files}}
    if extra:
        manifest.update(extra)
    _write_json(out / f"{command}-manifest.json", manifest)


def _grid(cfg: CampaignConfig) -> TimeGrid:
    return TimeGrid.uniform(cfg.T, cfg.grid_points)


# -- subcommands ---------------------------------------------------------------------------

def cmd_simulate(cfg: CampaignConfig, args) -> int:
    out = _prepare_out(cfg)
    alpha = cfg.alpha_function()
    grid = _grid(cfg)
    log.info("simulating %d %s paths with %d terms", cfg.n_paths, cfg.process_kind, cfg.n_terms)
    values = sample_paths(cfg.process_kind, alpha, grid.points, cfg.n_paths, cfg.n_terms,
                          cfg.seed, kernel=cfg.kernel_object(), threads=cfg.threads)
    ids = np.repeat(np.arange(cfg.n_paths), grid.points.size)
    t = np.tile(grid.points, cfg.n_paths)
    path = out / "paths.csv"
    with open(path, "w", newline="") as fh:
        fh.write("path_id,t,value\n")
        np.savetxt(fh, np.column_stack([ids, t, values.ravel()]),
                   fmt=["%d", "%.17g", "%.17g"], delimiter=",")
    _write_manifest(out, "simulate", cfg, [path])
    print(f"wrote {cfg.n_paths * grid.points.size} rows to {path}")
    return EXIT_OK


def read_queries(path: Path):
    """Rows ``times,thetas`` with space-separated values inside each field."""
    queries = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise UsageError(f"cannot read query file {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["times", "thetas"]:
            raise UsageError(f"{path}, line 1: header must be 'times,thetas'")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != 2:
                    raise ValueError("expected two fields")
                times = [float(x) for x in row[0].split()]
                thetas = [float(x) for x in row[1].split()]
                queries.append(CFQuery(times, thetas))
            except ValueError as exc:
                raise UsageError(f"{path}, line {line}: malformed query row ({exc})") from None
    if not queries:
        raise UsageError(f"{path}: no query rows")
    return queries


def cmd_cf(cfg: CampaignConfig, args) -> int:
    if not args.query:
        raise UsageError("cf needs --query FILE")
    queries = read_queries(Path(args.query))
    process = args.process or cfg.process
    if process not in ("independent", "field_based"):
        raise UsageError("analytic CFs exist for 'independent' and 'field_based'")
    alpha = cfg.alpha_function()
    out = _prepare_out(cfg)
    path = out / f"cf-{process}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "re", "im", "abs_err"])
        for q in queries:
            try:
                res = cf_joint("LI" if process == "independent" else "LF", alpha, q)
            except ValueError as exc:
                raise UsageError(f"query {q.times.tolist()}: {exc}") from None
            writer.writerow([" ".join(repr(float(v)) for v in q.thetas), repr(res.value.real),
                             repr(res.value.imag), repr(float(res.quadrature_error_estimate))])
    _write_manifest(out, "cf", cfg, [path], {"process": process})
    print(f"wrote {len(queries)} rows to {path}")
    return EXIT_OK


def cmd_decompose(cfg: CampaignConfig, args) -> int:
    out = _prepare_out(cfg)
    alpha = cfg.alpha_function()
    grid = _grid(cfg)
    rule = cfg.decompose.get("rule", "magnitude")
    n_draws = int(cfg.decompose.get("n_draws", 1))
    files = []
    for k in range(n_draws):
        draw = draw_series(cfg.seed, cfg.n_terms, cfg.T, k)
        res = (field_decomposition(draw, alpha, grid) if rule == "field_drift"
               else decompose_LI(draw, alpha, grid, rule))
        path = out / f"decomposition-{rule}-{k}.csv"
        with open(path, "w", newline="") as fh:
            fh.write("t,total,a_part,m_part\n")
            for row in res.to_csv_rows():
                fh.write(",".join(repr(v) for v in row) + "\n")
        files.append(path)
    if args.probe:
        probe = good_integrator_probe(alpha, seed=cfg.seed)
        path = out / "integrator-probe.json"
        _write_json(path, probe.to_dicts())
        files.append(path)
    _write_manifest(out, "decompose", cfg, files, {"rule": rule})
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_localize(cfg: CampaignConfig, args) -> int:
    if cfg.process not in ("independent", "field_based"):
        raise UsageError("tangency is checked for 'independent' and 'field_based'")
    out = _prepare_out(cfg)
    alpha = cfg.alpha_function()
    loc = cfg.localize
    proc = "LI" if cfg.process == "independent" else "LF"
    rep = tangent_check(proc, alpha, float(loc.get("u", cfg.T / 2)),
                        loc.get("r_values", (0.2, 0.05, 0.0125)),
                        loc.get("probe_times", (0.5, 1.0)), n_paths=cfg.n_paths,
                        n_terms=cfg.n_terms, seed=cfg.seed, threads=cfg.threads)
    path = out / f"localize-{cfg.process}.json"
    _write_json(path, rep.to_dicts())
    _write_manifest(out, "localize", cfg, [path])
    for row in rep.to_dicts():
        print(f"r={row['r']:<8g} distance={row['distance']:.4f} "
              f"distance_cv={row['distance_cv']:.4f} band={row['band']:.4f}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_check(cfg: CampaignConfig, args) -> int:
    out = _prepare_out(cfg)
    alpha = cfg.alpha_function()
    checks = cfg.checks
    mismatch = checks.get("mismatch_alpha")
    analytic_alpha = AlphaFunction.from_config(mismatch, cfg.T) if mismatch else None
    reports = run_suite(alpha, cfg.n_paths, cfg.n_terms, cfg.seed,
                        analytic_alpha=analytic_alpha,
                        cf_threshold=checks.get("cf_threshold", 0.03),
                        ks_p_min=checks.get("ks_p_min", 0.01), n_se=checks.get("n_se", 3.0),
                        threads=cfg.threads, log=log.info)
    rows = [r.to_dict() for r in reports]
    passed = all(r.passed for r in reports)
    path = out / "check.json"
    _write_json(path, {"checks": rows, "pass": passed})
    _write_manifest(out, "check", cfg, [path])
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.test:<36} "
              f"statistic={r.statistic:.6g} threshold={r.threshold:.6g}")
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "cf": cmd_cf, "decompose": cmd_decompose,
            "localize": cmd_localize, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multistable",
        description="Simulate and check multistable Levy motions.",
        epilog=f"The output directory defaults to ${OUTPUT_ENV} when --out is not given.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML or JSON campaign file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="worker threads across paths")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "cf":
            p.add_argument("--query", help="CSV with columns times,thetas")
            p.add_argument("--process", choices=("independent", "field_based"))
        if name == "decompose":
            p.add_argument("--probe", action="store_true",
                           help="also write the elementary-integral tail probe")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise UsageError("--seed must be non-negative")
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            cfg.threads = args.threads
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError, InsufficientSamplesError, ProbeRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuadratureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
