"""Command-line surface: validate, merge, fit, stats, derive.

Exit codes: 0 clean, 1 domain failure (blocked pool, degenerate fit, Block
findings), 2 usage or parse failure (bad header, unknown key, missing file).
Machine output goes to standard output or files; diagnostics to standard
error.  An optional JSON config file mirrors the flags; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from . import analysis, figures
from .analysis import Split
from .derivation import PointGeometry, derive_point, load_direction_profile
from .errors import (
    DerivationError,
    EmptyAfterThreshold,
    FormatError,
    InvariantViolation,
    MissingRequired,
    PointDataError,
    PoolBlocked,
)
from .ioformat import (
    CSV_DIALECT,
    JSON_DIALECT,
    POINT_COLUMNS,
    DialectKind,
    FormatDialect,
    dialect_for_path,
    format_decimal,
    parse_metadata_document,
    read_campaign,
    write_campaign,
    write_pooled_table,
)
from .model import Campaign, LocCondition, Severity
from .validation import DEFAULT_POLICY, CompatPolicy, pool, validate_campaign

_NUMERIC_COLUMNS = tuple(c for c in POINT_COLUMNS if c not in ("tx", "rx", "loc"))

_SPLITS = {"los": (Split.LOS,), "nlos": (Split.NLOS,),
           "both": (Split.LOS, Split.NLOS)}


@dataclass
class RunConfig:
    """Resolved invocation settings (flags over config file over defaults)."""

    inputs: tuple[Path, ...]
    out_dir: Path
    dialect: FormatDialect
    strict: bool = True
    figures: bool = False
    force: bool = False
    freq_rel_tol: float | None = None

    def policy(self) -> CompatPolicy:
        if self.freq_rel_tol is None:
            return DEFAULT_POLICY
        return CompatPolicy(freq_rel_tol=float(self.freq_rel_tol))


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"config file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"config file {path}: expected a JSON object")
    return obj


def _pick(args, key: str, config: dict, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _resolve_config(args, *, need_inputs: bool = True) -> RunConfig:
    config = _load_config_file(getattr(args, "config", None))
    inputs = [Path(p) for p in (getattr(args, "paths", None)
                                or config.get("inputs", []))]
    if need_inputs and not inputs:
        raise MissingRequired("input path(s)")
    dialect_name = _pick(args, "dialect", config, "csv")
    if dialect_name not in ("csv", "json"):
        raise FormatError(f"unknown dialect {dialect_name!r} (csv or json)")
    out_dir = Path(_pick(args, "out", config, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    return RunConfig(
        inputs=tuple(inputs),
        out_dir=out_dir,
        dialect=CSV_DIALECT if dialect_name == "csv" else JSON_DIALECT,
        strict=bool(_pick(args, "strict", config, True)),
        figures=bool(_pick(args, "figures", config, False)),
        force=bool(_pick(args, "force", config, False)),
        freq_rel_tol=_pick(args, "freq_rel_tol", config, None),
    )


def _emit_findings(findings) -> None:
    for f in findings:
        sys.stdout.write(json.dumps(f.to_json_dict()) + "\n")


def _read_campaigns(cfg: RunConfig) -> list[Campaign]:
    campaigns = []
    for path in cfg.inputs:
        extra: list = []
        campaigns.append(read_campaign(path, strict=cfg.strict, findings=extra))
        for f in extra:
            sys.stderr.write(f"{path.name}: [{f.severity}] {f.message}\n")
    return campaigns


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _points_ext(cfg: RunConfig) -> str:
    return ".pointdata.csv" if cfg.dialect.kind is DialectKind.CSV \
        else ".pointdata.json"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = _resolve_config(args)
    worst = Severity.INFO
    any_findings = False
    for path in cfg.inputs:
        parse_findings: list = []
        campaign = read_campaign(path, strict=cfg.strict, findings=parse_findings)
        findings = parse_findings + validate_campaign(campaign)
        _emit_findings(findings)
        for f in findings:
            any_findings = True
            worst = max(worst, f.severity)
    if any_findings and worst is Severity.BLOCK:
        return 1
    return 0


def cmd_merge(args) -> int:
    cfg = _resolve_config(args)
    if len(cfg.inputs) < 2:
        raise MissingRequired("at least two campaigns to merge")
    campaigns = _read_campaigns(cfg)
    pooled = pool(campaigns, cfg.policy(), force=cfg.force)

    out_points = cfg.out_dir / ("merged" + _points_ext(cfg))
    _write(out_points, write_pooled_table(pooled, cfg.dialect))
    report = {
        "campaigns": [c.campaign_id for c in pooled.campaigns],
        "points": len(pooled.points),
        "findings": [f.to_json_dict() for f in pooled.compat_report],
    }
    _write(cfg.out_dir / "compat.json", json.dumps(report, indent=2) + "\n")
    _emit_findings(pooled.compat_report)
    sys.stderr.write(f"merged {len(pooled.points)} points from "
                     f"{len(campaigns)} campaigns -> {out_points}\n")
    return 0


def _pool_inputs(cfg: RunConfig):
    campaigns = _read_campaigns(cfg)
    return pool(campaigns, cfg.policy(), force=cfg.force)


def _scatter_csv(rows) -> str:
    lines = ["tr_sep_m,pl_db,campaign_id,loc"]
    for d, pl_value, cid, loc in rows:
        lines.append(f"{format_decimal(d)},{format_decimal(pl_value)},"
                     f"{cid},{loc.value}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    cfg = _resolve_config(args)
    model_name = (args.model or "ci").lower()
    if model_name not in ("ci", "abg"):
        raise FormatError(f"unknown model {model_name!r} (ci or abg)")
    pooled = _pool_inputs(cfg)

    rows = analysis.scatter_data(pooled, Split.BOTH)
    _write(cfg.out_dir / "scatter.csv", _scatter_csv(rows))

    failures = 0
    fits: dict[Split, object] = {}
    for split in _SPLITS[(args.split or "both").lower()]:
        records = analysis.select_split(pooled.points, split)
        try:
            if model_name == "ci":
                fit = analysis.fit_ci(
                    [(r.tr_sep_m, r.pl_db) for r in records],
                    [r.freq_ghz for r in records])
            else:
                fit = analysis.fit_abg(
                    [(r.tr_sep_m, r.pl_db, r.freq_ghz) for r in records])
        except PointDataError as exc:
            failures += 1
            sys.stderr.write(f"fit {model_name} {split.value}: "
                             f"{type(exc).__name__}: {exc}\n")
            continue
        fits[split] = fit
        doc = fit.to_json_dict(split)
        sys.stdout.write(json.dumps(doc) + "\n")
        _write(cfg.out_dir / f"fit_{model_name}_{split.value.lower()}.json",
               json.dumps(doc, indent=2) + "\n")

    if cfg.figures and fits:
        figures.save_scatter_figure(cfg.out_dir / f"scatter_{model_name}.svg",
                                    rows, fits)
    return 1 if failures else 0


def cmd_stats(args) -> int:
    cfg = _resolve_config(args)
    column = args.column or "omni_ds_ns"
    if column not in _NUMERIC_COLUMNS:
        raise FormatError(f"unknown column {column!r}; numeric columns: "
                          + ", ".join(_NUMERIC_COLUMNS))
    pooled = _pool_inputs(cfg)

    failures = 0
    for split in _SPLITS[(args.split or "both").lower()]:
        records = analysis.select_split(pooled.points, split)
        values = [float(getattr(r, column)) for r in records]
        tag = split.value.lower()
        try:
            cdf = analysis.empirical_cdf(values)
        except PointDataError as exc:
            failures += 1
            sys.stderr.write(f"stats {column} {split.value}: "
                             f"{type(exc).__name__}: {exc}\n")
            continue
        cdf_name = f"cdf_{column}_{tag}.csv"
        lines = ["value,probability"]
        lines += [f"{v!r},{p!r}" for v, p in
                  zip(cdf.sorted_values, cdf.probabilities)]
        _write(cfg.out_dir / cdf_name, "\n".join(lines) + "\n")

        try:
            stats = analysis.lognormal_stats(values).to_json_dict()
        except PointDataError as exc:
            stats = None
            sys.stderr.write(f"stats {column} {split.value}: lognormal stats "
                             f"omitted ({type(exc).__name__}: {exc})\n")
        doc = {"column": column, "split": split.value, "n_points": len(values),
               "lognormal": stats, "cdf_file": cdf_name}
        sys.stdout.write(json.dumps(doc) + "\n")
        _write(cfg.out_dir / f"stats_{column}_{tag}.json",
               json.dumps(doc, indent=2) + "\n")

        if cfg.figures:
            figures.save_cdf_figure(cfg.out_dir / f"cdf_{column}_{tag}.svg",
                                    {f"{split.value}": cdf}, column)
    return 1 if failures else 0


def _load_geometry_entries(path: Path) -> list[dict]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"), parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise FormatError(f"geometry file {path}: {exc}") from exc
    entries = doc.get("points") if isinstance(doc, dict) else None
    if not isinstance(entries, list) or not entries:
        raise MissingRequired(f"'points' array in geometry file {path}")
    return entries


def cmd_derive(args) -> int:
    config = _load_config_file(getattr(args, "config", None))
    profiles_dir = Path(_pick(args, "profiles", config, None) or "")
    meta_path = _pick(args, "meta", config, None)
    geometry_path = _pick(args, "geometry", config, None)
    if not str(profiles_dir):
        raise MissingRequired("--profiles directory")
    if not meta_path:
        raise MissingRequired("--meta metadata file")
    if not geometry_path:
        raise MissingRequired("--geometry file")
    args.paths = [str(geometry_path)]  # satisfies the common input check
    cfg = _resolve_config(args)

    meta_path = Path(meta_path)
    if not meta_path.exists():
        raise MissingRequired(f"metadata file {meta_path}")
    meta, campaign_fields = parse_metadata_document(
        meta_path.read_text(encoding="utf-8"), dialect_for_path(meta_path),
        strict=cfg.strict)
    for field in ("as_def", "t_pdp", "t_pas"):
        if getattr(meta, field) is None:
            raise MissingRequired(f"metadata key {field!r}")

    records = []
    skipped = 0
    for i, entry in enumerate(_load_geometry_entries(Path(geometry_path))):
        missing = [k for k in ("tx_id", "rx_id", "loc_condition", "tr_sep_m",
                               "profiles") if k not in entry]
        if missing:
            raise MissingRequired(f"geometry entry {i}: key {missing[0]!r}")
        geometry = PointGeometry(
            tx_id=entry["tx_id"], rx_id=entry["rx_id"],
            loc_condition=LocCondition(entry["loc_condition"]),
            tr_sep_m=entry["tr_sep_m"],
        )
        profiles = []
        for name in entry["profiles"]:
            profile_path = profiles_dir / name
            if not profile_path.exists():
                raise MissingRequired(f"profile file {profile_path}")
            profiles.append(load_direction_profile(
                profile_path.read_text(encoding="utf-8")))
        try:
            records.append(derive_point(
                profiles, meta, geometry,
                lobes_arrival=entry.get("lobes_arrival"),
                lobes_departure=entry.get("lobes_departure"),
                lobe_spreads=entry.get("lobe_spreads"),
            ))
        except EmptyAfterThreshold as exc:
            skipped += 1
            sys.stderr.write(f"({geometry.tx_id}, {geometry.rx_id}): skipped "
                             f"({exc})\n")

    campaign = Campaign(
        institution=campaign_fields.get("institution",
                                        campaign_fields.get("campaign_id",
                                                            "derived")),
        campaign_id=campaign_fields.get("campaign_id", "derived"),
        metadata=meta,
        points=tuple(records),
        map_ref=campaign_fields.get("map_ref"),
    )
    out_points = cfg.out_dir / (campaign.campaign_id + _points_ext(cfg))
    write_campaign(campaign, out_points, dialect=cfg.dialect)
    sys.stdout.write(json.dumps({"points": len(records), "skipped": skipped,
                                 "out": out_points.name}) + "\n")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, *, paths: bool = True) -> None:
    if paths:
        p.add_argument("paths", nargs="*", metavar="POINTDATA_FILE",
                       help="canonical .pointdata.csv/.pointdata.json files "
                            "(each needs its sibling .meta file)")
    p.add_argument("--dialect", choices=("csv", "json"), default=None,
                   help="dialect for written outputs (default csv)")
    p.add_argument("--out", default=None, help="output directory (default .)")
    strictness = p.add_mutually_exclusive_group()
    strictness.add_argument("--strict", dest="strict", action="store_const",
                            const=True, default=None,
                            help="require canonical headers/keys (default)")
    strictness.add_argument("--lenient", dest="strict", action="store_const",
                            const=False,
                            help="accept reordered columns, ignore unknown keys")
    p.add_argument("--figures", action="store_const", const=True, default=None,
                   help="also write SVG figures")
    p.add_argument("--config", default=None,
                   help="JSON config file mirroring the flags; flags override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointdata",
        description="Point-data tables for propagation measurements: "
                    "validate, pool, fit, and derive.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check campaigns, print findings")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("merge", help="pool campaigns into one table")
    _add_common(p)
    p.add_argument("--force", action="store_const", const=True, default=None,
                   help="pool even when Block findings exist")
    p.add_argument("--freq-rel-tol", dest="freq_rel_tol", type=float,
                   default=None, help="carrier separation tolerance "
                                      "(fraction, default 0.05)")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("fit", help="Path-loss fits over the pooled points")
    _add_common(p)
    p.add_argument("--model", choices=("ci", "abg"), default=None)
    p.add_argument("--split", choices=("los", "nlos", "both"), default=None)
    p.add_argument("--force", action="store_const", const=True, default=None)
    p.add_argument("--freq-rel-tol", dest="freq_rel_tol", type=float,
                   default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stats", help="lognormal stats and CDF for a column")
    _add_common(p)
    p.add_argument("--column", default=None,
                   help="numeric point-data column (default omni_ds_ns)")
    p.add_argument("--split", choices=("los", "nlos", "both"), default=None)
    p.add_argument("--force", action="store_const", const=True, default=None)
    p.add_argument("--freq-rel-tol", dest="freq_rel_tol", type=float,
                   default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("derive", help="derive a point table from raw profiles")
    _add_common(p, paths=False)
    p.add_argument("--profiles", default=None, help="directory of per-direction "
                                                    "profile JSON files")
    p.add_argument("--meta", default=None, help="campaign metadata file")
    p.add_argument("--geometry", default=None,
                   help="JSON file listing TX-RX geometry entries")
    p.set_defaults(func=cmd_derive)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (FormatError, InvariantViolation)):
        return 2
    if isinstance(exc, (PoolBlocked, DerivationError, PointDataError)):
        return 1
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PoolBlocked as exc:
        _emit_findings(exc.findings)
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (PointDataError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return _exit_code(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
