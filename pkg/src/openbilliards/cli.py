"""Config-driven experiment runner.

Subcommands:
  validate   parse the config, build and validate the geometry, try holes
  run        hitting experiments per hole radius plus requested checks
  check      "cones" or "invariants" diagnostics only
  inducing   return-time tail CSV and the Kac defect

Configs are YAML with `version: 1`.  All randomness flows from the single
`run.seed`; CSV outputs are byte-identical for equal config + seed.
Exit codes: 0 done, 2 config/geometry validation failure, 3 threshold breach
under --enforce.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .cones import cone_invariance_scan
from .geometry import GeometryError, build_table, make_hole, validate_table
from .inducing import kac_defect, return_tail
from .measure import invariance_defect
from .openstats import (
    collect_hitting,
    count_statistics,
    ks_exp1,
    quasi_section_defect,
    short_return_fraction,
    survival_curve,
)

DEFAULT_THRESHOLDS = {
    "ks": 0.05,
    "tv": 0.05,
    "kac": 0.01,
    "invariance": 0.005,
    "cone_violations": 0,
}

CHECK_DEFAULTS = {
    "cone_points": 20000,
    "cone_vectors": 10,
    "kac_samples": 200000,
    "invariance_samples": 200000,
    "return_cap": 10000,
    "short_return_hits": 20000,
    "quasi_orbits": 2000,
}


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        raw = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        cfg = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if cfg.get("version") != 1:
        raise ConfigError("config must declare version: 1")
    return cfg


def build_from_config(cfg):
    table_spec = cfg.get("table")
    if not isinstance(table_spec, dict) or "class" not in table_spec:
        raise ConfigError("config needs table: {class: ..., <params>}")
    params = {k: v for k, v in table_spec.items() if k != "class"}
    try:
        return build_table(table_spec["class"], **params)
    except TypeError as e:
        raise ConfigError(f"bad table parameters: {e}") from e


def _config_errors(cfg):
    """Schema-level problems, as human-readable strings."""
    errors = []
    hole = cfg.get("hole")
    if hole is not None:
        if not isinstance(hole, dict) or "center_s" not in hole \
                or "radii" not in hole:
            errors.append("hole needs center_s and radii")
        else:
            radii = hole["radii"]
            if not isinstance(radii, (list, tuple)) or not radii:
                errors.append("hole.radii must be a non-empty list")
            elif any(r <= 0 for r in radii):
                errors.append("hole radii must be positive")
            elif list(radii) != sorted(radii, reverse=True) \
                    or len(set(radii)) != len(radii):
                errors.append("hole.radii must be strictly decreasing")
    run = cfg.get("run")
    if run is not None:
        if "seed" not in run:
            errors.append("run.seed is required (no wall-clock default)")
        if run.get("n_orbits", 1) < 1:
            errors.append("run.n_orbits must be >= 1")
        for pair in run.get("intervals", []):
            if len(pair) != 2 or not (0 <= pair[0] < pair[1]):
                errors.append(f"bad interval {pair}")
    return errors


def _hole_errors(table, cfg):
    errors = []
    hole = cfg.get("hole")
    if isinstance(hole, dict) and "radii" in hole and "center_s" in hole:
        for r in hole["radii"]:
            try:
                make_hole(table, float(hole["center_s"]), float(r))
            except GeometryError as e:
                errors.append(f"hole r={r}: {e}")
    return errors


def cmd_validate(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    errors = _config_errors(cfg)
    violations = []
    try:
        table = build_from_config(cfg)
    except (ConfigError, GeometryError) as e:
        errors.append(f"table: {e}")
        table = None
    if table is not None:
        violations = validate_table(table)
        errors.extend(_hole_errors(table, cfg))
    for v in violations:
        print(f"violation: {v}", file=sys.stderr)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    if errors or violations:
        return 2
    print("ok")
    return 0


def _out_dir(cfg, args):
    out = args.out or cfg.get("out", "results")
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}") from e
    return path


def _fmt(x):
    """Full-precision, locale-independent float text for CSV cells."""
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _manifest(path, cfg, table, seed):
    _write_json(path / "manifest.json", {
        "config": cfg,
        "resolved_seed": seed,
        "table_class": table.class_tag,
        "perimeter": table.perimeter,
        "package_version": __version__,
    })


def _seed_of(cfg, args):
    run = cfg.get("run", {})
    seed = args.seed if args.seed is not None else run.get("seed")
    if seed is None:
        raise ConfigError("run.seed is required (or pass --seed)")
    return int(seed)


def cmd_run(args):
    try:
        cfg = load_config(args.config)
        errors = _config_errors(cfg)
        if errors:
            raise ConfigError("; ".join(errors))
        table = build_from_config(cfg)
        violations = validate_table(table)
        if violations:
            for v in violations:
                print(f"violation: {v}", file=sys.stderr)
            raise ConfigError("geometry failed validation")
        hole_errors = _hole_errors(table, cfg)
        if hole_errors:
            raise ConfigError("; ".join(hole_errors))
        seed = _seed_of(cfg, args)
        out = _out_dir(cfg, args)
    except (ConfigError, GeometryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    run = cfg.get("run", {})
    checks = cfg.get("checks", {})
    budgets = {**CHECK_DEFAULTS, **cfg.get("budgets", {})}
    thresholds = {**DEFAULT_THRESHOLDS, **cfg.get("thresholds", {})}
    n_orbits = int(run.get("n_orbits", 1000))
    t_max = float(run.get("t_max", 50.0))
    intervals = [tuple(map(float, p)) for p in run.get("intervals", [])]

    _manifest(out, cfg, table, seed)
    summary = {"table_class": table.class_tag, "seed": seed, "radii": [],
               "per_radius": {}, "checks": {}}

    hole_spec = cfg.get("hole")
    if hole_spec:
        center = float(hole_spec["center_s"])
        for r in hole_spec["radii"]:
            r = float(r)
            tag = f"r_{r:g}"
            rdir = out / tag
            rdir.mkdir(exist_ok=True)
            t0 = time.time()
            hole = make_hole(table, center, r)
            data = collect_hitting(table, hole, n_orbits, t_max, seed)
            fh = data.first_hits()
            eligible = ~data.censored_before_first_hit()
            finite = fh[eligible][np.isfinite(fh[eligible])]
            ks = ks_exp1(finite) if finite.size else None

            grid = np.linspace(0.0, min(5.0, t_max), 101)
            sc = survival_curve(data, grid)
            _write_csv(rdir / "hits.csv",
                       ["orbit", "index", "normalized_time"],
                       zip(data.hit_orbit, data.hit_index,
                           (_fmt(v) for v in data.normalized_times)))
            _write_csv(rdir / "survival.csv",
                       ["t", "empirical", "exponential"],
                       zip((_fmt(v) for v in sc.t),
                           (_fmt(v) for v in sc.empirical),
                           (_fmt(v) for v in sc.exponential)))
            entry = {
                "mu": hole.measure, "ks_exp1": ks,
                "survival_at_1": float(sc.empirical[np.argmin(np.abs(grid - 1.0))]),
                "censored_fraction": float((data.censor_step <= data.horizon).mean()),
                "excluded_before_first_hit": sc.excluded_fraction,
                "n_orbits": n_orbits,
            }
            if intervals:
                cr = count_statistics(data, intervals)
                rows = [(i, k, int(cr.counts[i, k]))
                        for i in range(cr.counts.shape[0])
                        for k in range(len(cr.intervals))]
                _write_csv(rdir / "counts.csv",
                           ["orbit", "interval", "count"], rows)
                entry["tv"] = [float(v) for v in cr.tv]
                entry["count_means"] = [float(v) for v in cr.means]
                if len(cr.intervals) > 1:
                    entry["count_correlation"] = float(cr.correlations[0, 1])
            diag = {"censoring": entry["censored_fraction"]}
            if checks.get("short_returns"):
                srr = short_return_fraction(
                    table, hole, n_hits=budgets["short_return_hits"],
                    seed=seed)
                entry["short_return_fraction"] = srr.fraction
                diag["short_return"] = {
                    "fraction": srr.fraction, "p": srr.p,
                    "n_pairs": srr.n_pairs,
                }
            if checks.get("quasi_section"):
                q = quasi_section_defect(
                    table, hole, budgets["quasi_orbits"], seed)
                entry["quasi_section_defect"] = q.defect
                diag["quasi_section"] = {
                    "defect": q.defect, "host_kind": q.host_kind,
                    "n_excursions": q.n_excursions_with_hit,
                }
            _write_json(rdir / "diagnostics.json", diag)
            entry["runtime_s"] = time.time() - t0
            summary["radii"].append(r)
            summary["per_radius"][tag] = entry

    if checks.get("cones"):
        t0 = time.time()
        rep = cone_invariance_scan(table, budgets["cone_points"],
                                   budgets["cone_vectors"], seed)
        summary["checks"]["cones"] = {
            "n_pairs": rep.n_pairs, "violations": rep.n_violations,
            "worst_margin": rep.worst_margin,
            "vertical_min_margin": rep.vertical_min_margin,
            "runtime_s": time.time() - t0,
        }
    if checks.get("invariance"):
        t0 = time.time()
        rep = invariance_defect(table, budgets["invariance_samples"], seed)
        summary["checks"]["invariance"] = {
            "ks_phi": rep.ks_phi, "ks_s": rep.ks_s,
            "censored_fraction": rep.censored_fraction,
            "runtime_s": time.time() - t0,
        }
    if checks.get("kac"):
        t0 = time.time()
        rep = kac_defect(table, budgets["kac_samples"],
                         budgets["return_cap"], seed)
        summary["checks"]["kac"] = {
            "defect": rep.defect, "mu_x": rep.mu_x, "mean_R": rep.mean_R,
            "censored_fraction": rep.censored_fraction,
            "runtime_s": time.time() - t0,
        }

    _write_json(out / "summary.json", summary)

    if args.enforce:
        breaches = _enforce(summary, thresholds)
        if breaches:
            for b in breaches:
                print(f"threshold breach: {b}", file=sys.stderr)
            return 3
    return 0


def _enforce(summary, thresholds):
    """Threshold checks at the smallest radius plus global checks."""
    breaches = []
    if summary["radii"]:
        tag = f"r_{min(summary['radii']):g}"
        entry = summary["per_radius"][tag]
        if entry.get("ks_exp1") is not None \
                and entry["ks_exp1"] >= thresholds["ks"]:
            breaches.append(f"{tag}: ks_exp1 {entry['ks_exp1']:.4f} "
                            f">= {thresholds['ks']}")
        for v in entry.get("tv", []):
            if v >= thresholds["tv"]:
                breaches.append(f"{tag}: tv {v:.4f} >= {thresholds['tv']}")
    cones = summary["checks"].get("cones")
    if cones and cones["violations"] > thresholds["cone_violations"]:
        breaches.append(f"cone violations {cones['violations']}")
    inv = summary["checks"].get("invariance")
    if inv and max(inv["ks_phi"], inv["ks_s"]) >= thresholds["invariance"]:
        breaches.append("invariance KS above threshold")
    kac = summary["checks"].get("kac")
    if kac and kac["defect"] >= thresholds["kac"]:
        breaches.append(f"kac defect {kac['defect']:.4f}")
    return breaches


def cmd_check(args):
    try:
        cfg = load_config(args.config)
        table = build_from_config(cfg)
        seed = _seed_of(cfg, args)
        out = _out_dir(cfg, args)
    except (ConfigError, GeometryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    budgets = {**CHECK_DEFAULTS, **cfg.get("budgets", {})}
    thresholds = {**DEFAULT_THRESHOLDS, **cfg.get("thresholds", {})}
    if args.what == "cones":
        rep = cone_invariance_scan(
            table, args.points or budgets["cone_points"],
            args.vectors or budgets["cone_vectors"], seed)
        result = {
            "n_pairs": rep.n_pairs, "violations": rep.n_violations,
            "worst_margin": rep.worst_margin,
            "vertical_min_margin": rep.vertical_min_margin,
            "transversality_violations": rep.transversality_violations,
            "censored_fraction": rep.censored_fraction,
        }
        _write_json(out / "cones.json", result)
        print(json.dumps(result, sort_keys=True))
        if args.enforce and rep.n_violations > thresholds["cone_violations"]:
            return 3
        return 0
    if args.what == "invariants":
        rep = invariance_defect(
            table, args.samples or budgets["invariance_samples"], seed)
        result = {"ks_phi": rep.ks_phi, "ks_s": rep.ks_s, "n": rep.n,
                  "censored_fraction": rep.censored_fraction}
        _write_json(out / "invariants.json", result)
        print(json.dumps(result, sort_keys=True))
        if args.enforce and max(rep.ks_phi, rep.ks_s) >= thresholds["invariance"]:
            return 3
        return 0
    print(f"error: unknown check {args.what!r}", file=sys.stderr)
    return 2


def cmd_inducing(args):
    try:
        cfg = load_config(args.config)
        table = build_from_config(cfg)
        seed = _seed_of(cfg, args)
        out = _out_dir(cfg, args)
    except (ConfigError, GeometryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    budgets = {**CHECK_DEFAULTS, **cfg.get("budgets", {})}
    samples = args.samples or budgets["kac_samples"]
    cap = args.cap or budgets["return_cap"]
    tail = return_tail(table, samples, cap, seed)
    _write_csv(out / "return_tail.csv", ["n", "survival", "count"],
               zip(tail.n, (_fmt(v) for v in tail.survival), tail.count))
    kac = kac_defect(table, samples, cap, seed)
    result = {
        "kac_defect": kac.defect, "mu_x": kac.mu_x, "mean_R": kac.mean_R,
        "n_base": kac.n_base, "censored_fraction": kac.censored_fraction,
        "tail_max_n": int(tail.n[-1]) if tail.n.size else 0,
        "cap_fraction": tail.cap_fraction,
    }
    _write_json(out / "inducing.json", result)
    print(json.dumps(result, sort_keys=True))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="billiards",
        description="billiard-table experiments: hitting statistics, "
                    "cone checks, inducing diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="YAML config (version: 1)")
        p.add_argument("--out", help="output directory (default from config)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--enforce", action="store_true",
                       help="exit 3 when thresholds are breached")

    p_val = sub.add_parser("validate", help="check config and geometry only")
    p_val.add_argument("config")

    p_run = sub.add_parser("run", help="hitting experiments plus checks")
    common(p_run)

    p_chk = sub.add_parser("check", help="single diagnostic")
    p_chk.add_argument("what", choices=["cones", "invariants"])
    common(p_chk)
    p_chk.add_argument("--points", type=int)
    p_chk.add_argument("--vectors", type=int)
    p_chk.add_argument("--samples", type=int)

    p_ind = sub.add_parser("inducing", help="return-time tail and Kac defect")
    common(p_ind)
    p_ind.add_argument("--samples", type=int)
    p_ind.add_argument("--cap", type=int)

    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "check":
        return cmd_check(args)
    if args.command == "inducing":
        return cmd_inducing(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
