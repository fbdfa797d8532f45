"""Canonical table I/O: point tables and metadata documents, CSV and JSON.

Numbers are carried as :class:`decimal.Decimal` end to end.  The writer emits
the minimal plain-decimal representation (no exponent notation, no trailing
zeros), so ``parse -> write`` is idempotent and ``write -> parse -> write``
is byte-identical.  JSON documents are emitted by a small renderer instead of
``json.dumps`` so decimal values appear as plain number tokens rather than
floats that went through binary and back.

Strict parsing (the default) requires the canonical header order for CSV and
the exact canonical key set per JSON point object.  Lenient parsing accepts
reordered columns and ignores unknown keys, reporting them as Info findings
through the optional ``findings`` sink.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import (
    FormatError,
    HeaderMismatch,
    MissingRequired,
    UnitsMismatch,
    UnknownKey,
    ValueParseError,
)
from .model import (
    AntennaKind,
    AntennaType,
    ArrayGeometry,
    ArrayKind,
    AsDefinition,
    Campaign,
    CompatFinding,
    Environment,
    FrequencyRef,
    LocCondition,
    MetadataRecord,
    Mobility,
    MobilityKind,
    PointRecord,
    Polarization,
    RepetitionRate,
    Severity,
    SweepFD,
    Sync,
    SyncKind,
    ThresholdCombine,
    ThresholdRule,
    Waveform,
)

__all__ = [
    "DialectKind",
    "FormatDialect",
    "CSV_DIALECT",
    "JSON_DIALECT",
    "POINT_COLUMNS",
    "POINT_UNITS",
    "METADATA_KEYS",
    "format_decimal",
    "parse_point_table",
    "write_point_table",
    "write_pooled_table",
    "parse_metadata",
    "parse_metadata_document",
    "write_metadata",
    "parse_threshold_text",
    "render_threshold",
    "dialect_for_path",
    "meta_path_for",
    "read_campaign",
    "write_campaign",
]


# ---------------------------------------------------------------------------
# Dialects
# ---------------------------------------------------------------------------

class DialectKind(enum.Enum):
    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class FormatDialect:
    """Serialization dialect: concrete syntax, format version, missing token."""

    kind: DialectKind = DialectKind.CSV
    version: str = "1.0"
    missing_token: str = "--"

    def __post_init__(self):
        if not isinstance(self.kind, DialectKind):
            object.__setattr__(self, "kind", DialectKind(self.kind))
        if not self.version or not self.version.strip():
            raise FormatError("dialect version must be non-empty")
        tok = self.missing_token
        if not tok or any(ch in tok for ch in ',"\r\n'):
            raise FormatError("missing token must be non-empty and CSV-safe")


CSV_DIALECT = FormatDialect(kind=DialectKind.CSV)
JSON_DIALECT = FormatDialect(kind=DialectKind.JSON)

POINTS_FORMAT_TAG = "pointdata.points"
META_FORMAT_TAG = "pointdata.meta"


# ---------------------------------------------------------------------------
# Decimal token codec
# ---------------------------------------------------------------------------

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")


def format_decimal(value: Decimal) -> str:
    """Minimal plain-decimal text: no exponent, no trailing fraction zeros."""
    if value == 0:
        return "0"
    out = value.normalize()
    # normalize() may produce exponent form for round numbers (1E+2); expand it.
    if out.as_tuple().exponent > 0:
        out = out.quantize(Decimal(1))
    return str(out)


def _parse_decimal_token(token: str, row: int, column: str) -> Decimal:
    token = token.strip()
    if not _DECIMAL_RE.match(token):
        raise ValueParseError(row, column, token, "not a plain decimal number")
    try:
        return Decimal(token)
    except InvalidOperation as exc:  # pragma: no cover - regex should prevent this
        raise ValueParseError(row, column, token, str(exc)) from exc


def _coerce_decimal(raw, row: int, column: str) -> Decimal:
    """Accept a parsed JSON number (Decimal/int) or a text token."""
    if isinstance(raw, Decimal):
        return raw
    if isinstance(raw, bool):
        raise ValueParseError(row, column, str(raw), "expected a number")
    if isinstance(raw, int):
        return Decimal(raw)
    if isinstance(raw, str):
        return _parse_decimal_token(raw, row, column)
    raise ValueParseError(row, column, repr(raw), "expected a number")


def _coerce_int(raw, row: int, column: str) -> int:
    if isinstance(raw, bool):
        raise ValueParseError(row, column, str(raw), "expected an integer")
    if isinstance(raw, int):
        return raw
    if isinstance(raw, Decimal):
        if raw == raw.to_integral_value():
            return int(raw)
        raise ValueParseError(row, column, str(raw), "expected an integer")
    if isinstance(raw, str):
        token = raw.strip()
        if re.fullmatch(r"[+-]?\d+", token):
            return int(token)
        raise ValueParseError(row, column, token, "expected an integer")
    raise ValueParseError(row, column, repr(raw), "expected an integer")


# ---------------------------------------------------------------------------
# Point tables
# ---------------------------------------------------------------------------

POINT_COLUMNS = (
    "freq_ghz", "tx", "rx", "loc", "tr_sep_m", "pl_db",
    "mean_dir_ds_ns", "omni_ds_ns",
    "mean_lobe_asa_deg", "omni_asa_deg",
    "mean_lobe_asd_deg", "omni_asd_deg",
    "mean_lobe_zsa_deg", "omni_zsa_deg",
    "mean_lobe_zsd_deg", "omni_zsd_deg",
)

POINT_UNITS = (
    "[GHz]", "", "", "", "[m]", "[dB]",
    "[ns]", "[ns]",
    "[deg]", "[deg]", "[deg]", "[deg]",
    "[deg]", "[deg]", "[deg]", "[deg]",
)

_STRING_COLUMNS = frozenset({"tx", "rx", "loc"})


def _normalize_unit(cell: str) -> str:
    return cell.strip().replace("°", "deg")


def _record_from_cells(cells: dict[str, object], row: int) -> PointRecord:
    kwargs: dict[str, object] = {}
    for col in POINT_COLUMNS:
        raw = cells[col]
        if col in ("tx", "rx"):
            if not isinstance(raw, str) or not raw.strip():
                raise ValueParseError(row, col, repr(raw), "expected a non-empty identifier")
            kwargs[col] = raw.strip()
        elif col == "loc":
            token = raw.strip() if isinstance(raw, str) else repr(raw)
            try:
                kwargs[col] = LocCondition(token)
            except ValueError:
                raise ValueParseError(row, col, token, "expected LOS or NLOS") from None
        else:
            kwargs[col] = _coerce_decimal(raw, row, col)
    return PointRecord(**kwargs)


def _match_header(header: list[str], strict: bool, findings: list | None):
    """Return the column order to read data cells in; raise HeaderMismatch."""
    names = [h.strip() for h in header]
    if names == list(POINT_COLUMNS):
        return list(POINT_COLUMNS)
    if strict:
        for i, expected in enumerate(POINT_COLUMNS):
            got = names[i] if i < len(names) else "<absent>"
            if got != expected:
                raise HeaderMismatch(
                    f"header column {i + 1}: expected {expected!r}, found {got!r}",
                    column=expected,
                )
        raise HeaderMismatch(
            f"header has {len(names)} columns, expected {len(POINT_COLUMNS)}",
        )
    # Lenient: accept any permutation of the canonical names, ignore extras.
    missing = [c for c in POINT_COLUMNS if c not in names]
    if missing:
        raise HeaderMismatch(f"header is missing column {missing[0]!r}", column=missing[0])
    extras = [c for c in names if c not in POINT_COLUMNS]
    if extras and findings is not None:
        findings.append(CompatFinding(
            severity=Severity.INFO, code="UNKNOWN_COLUMN", field=extras[0],
            message=f"ignoring {len(extras)} unrecognized column(s): {', '.join(extras)}",
        ))
    return names


def _parse_point_csv(text: str, strict: bool, findings: list | None) -> list[PointRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    physical = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not physical:
        raise HeaderMismatch("empty document: canonical header row is required")
    _, header = physical[0]
    order = _match_header(header, strict, findings)
    body = physical[1:]

    # An optional units row may follow the header; every non-empty cell is
    # bracketed, which no data row can satisfy (tx/rx are bare identifiers).
    if body:
        rownum, candidate = body[0]
        stripped = [c.strip() for c in candidate]
        if stripped and all(re.fullmatch(r"\[[^\]]*\]", c) for c in stripped if c):
            expected_units = dict(zip(POINT_COLUMNS, POINT_UNITS))
            for name, cell in zip(order, stripped):
                if name not in expected_units:
                    continue
                want = expected_units[name]
                if _normalize_unit(cell) != _normalize_unit(want) and (cell or want):
                    raise UnitsMismatch(
                        f"row {rownum}: column {name!r} units {cell!r}, expected {want!r}",
                        column=name,
                    )
            body = body[1:]

    records = []
    for rownum, row in body:
        cells = [c.strip() for c in row]
        if len(cells) != len(order):
            raise FormatError(
                f"row {rownum}: expected {len(order)} cells, found {len(cells)}"
            )
        for i, name in enumerate(order):
            if name in POINT_COLUMNS and cells[i] == "":
                raise ValueParseError(rownum, name, "", "empty cell")
        bycol = {name: cells[i] for i, name in enumerate(order) if name in POINT_COLUMNS}
        records.append(_record_from_cells(bycol, rownum))
    return records


def _parse_point_json(text: str, dialect: FormatDialect, strict: bool,
                      findings: list | None) -> list[PointRecord]:
    try:
        doc = json.loads(text, parse_float=Decimal, parse_int=int)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("point document must be a JSON object")
    tag = doc.get("format")
    if tag != POINTS_FORMAT_TAG:
        raise HeaderMismatch(f"format tag {tag!r}, expected {POINTS_FORMAT_TAG!r}")
    version = doc.get("version")
    if version != dialect.version:
        raise HeaderMismatch(f"format version {version!r}, expected {dialect.version!r}")
    if "points" not in doc or not isinstance(doc["points"], list):
        raise MissingRequired("'points' array")

    records = []
    for i, obj in enumerate(doc["points"]):
        rownum = i + 1
        if not isinstance(obj, dict):
            raise FormatError(f"points[{i}] is not an object")
        missing = [c for c in POINT_COLUMNS if c not in obj]
        if missing:
            raise HeaderMismatch(
                f"points[{i}] is missing key {missing[0]!r}", column=missing[0]
            )
        extras = [k for k in obj if k not in POINT_COLUMNS]
        if extras:
            if strict:
                raise HeaderMismatch(
                    f"points[{i}] has unexpected key {extras[0]!r}", column=extras[0]
                )
            if findings is not None:
                findings.append(CompatFinding(
                    severity=Severity.INFO, code="UNKNOWN_COLUMN", field=extras[0],
                    message=f"points[{i}]: ignoring unrecognized key(s) {', '.join(extras)}",
                ))
        records.append(_record_from_cells({c: obj[c] for c in POINT_COLUMNS}, rownum))
    return records


def parse_point_table(text: str, dialect: FormatDialect = CSV_DIALECT, *,
                      strict: bool = True,
                      findings: list | None = None) -> list[PointRecord]:
    """Parse a canonical point table into records.

    ``findings``, when given, collects Info findings raised by lenient mode
    (unknown columns); errors are always raised, never downgraded.
    """
    if dialect.kind is DialectKind.CSV:
        return _parse_point_csv(text, strict, findings)
    return _parse_point_json(text, dialect, strict, findings)


def _point_row_values(record: PointRecord) -> list[tuple[str, object]]:
    out = []
    for col in POINT_COLUMNS:
        v = getattr(record, col)
        if col == "loc":
            out.append((col, v.value))
        elif col in _STRING_COLUMNS:
            out.append((col, v))
        else:
            out.append((col, v))
    return out


def write_point_table(records, dialect: FormatDialect = CSV_DIALECT) -> str:
    records = list(records)
    if dialect.kind is DialectKind.CSV:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(POINT_COLUMNS)
        w.writerow(POINT_UNITS)
        for r in records:
            row = []
            for col, v in _point_row_values(r):
                row.append(format_decimal(v) if isinstance(v, Decimal) else str(v))
            w.writerow(row)
        return buf.getvalue()

    lines = ["{"]
    lines.append(f'  "format": {json.dumps(POINTS_FORMAT_TAG)},')
    lines.append(f'  "version": {json.dumps(dialect.version)},')
    if not records:
        lines.append('  "points": []')
    else:
        lines.append('  "points": [')
        for i, r in enumerate(records):
            parts = []
            for col, v in _point_row_values(r):
                if isinstance(v, Decimal):
                    parts.append(f"{json.dumps(col)}: {format_decimal(v)}")
                else:
                    parts.append(f"{json.dumps(col)}: {json.dumps(v)}")
            comma = "," if i < len(records) - 1 else ""
            lines.append("    {" + ", ".join(parts) + "}" + comma)
        lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_pooled_table(pool, dialect: FormatDialect = CSV_DIALECT) -> str:
    """Serialize a pooled dataset with an appended ``campaign_id`` column.

    Single-campaign files stay exactly canonical; only merged outputs carry
    the provenance column.  Lenient parsing reads these back (the extra
    column is reported as an Info finding and ignored).
    """
    if dialect.kind is DialectKind.CSV:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(POINT_COLUMNS + ("campaign_id",))
        w.writerow(POINT_UNITS + ("",))
        for record, cid in zip(pool.points, pool.provenance):
            row = [format_decimal(v) if isinstance(v, Decimal) else str(v)
                   for _, v in _point_row_values(record)]
            w.writerow(row + [cid])
        return buf.getvalue()

    lines = ["{"]
    lines.append(f'  "format": {json.dumps(POINTS_FORMAT_TAG)},')
    lines.append(f'  "version": {json.dumps(dialect.version)},')
    if not pool.points:
        lines.append('  "points": []')
    else:
        lines.append('  "points": [')
        for i, (record, cid) in enumerate(zip(pool.points, pool.provenance)):
            parts = []
            for col, v in _point_row_values(record):
                if isinstance(v, Decimal):
                    parts.append(f"{json.dumps(col)}: {format_decimal(v)}")
                else:
                    parts.append(f"{json.dumps(col)}: {json.dumps(v)}")
            parts.append(f'"campaign_id": {json.dumps(cid)}')
            comma = "," if i < len(pool.points) - 1 else ""
            lines.append("    {" + ", ".join(parts) + "}" + comma)
        lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Threshold rule text
# ---------------------------------------------------------------------------

_NUM = r"(\d+(?:\.\d+)?)"
_RE_REL_PEAK = re.compile(_NUM + r"\s*db\s*below\s*(?:the\s*)?(?:peak|max)", re.I)
_RE_ABOVE_NOISE = re.compile(
    r"\+?\s*" + _NUM + r"\s*db\s*(?:above\s*(?:the\s*)?noise|\(noise\))", re.I)
_RE_GATE = re.compile(
    r"(?:tau_?gate|t_?gate|gate|delay)\s*(?:=|<=|≤)?\s*" + _NUM + r"\s*ns", re.I)


def parse_threshold_text(text: str, *, row: int = 0,
                         column: str = "threshold") -> ThresholdRule:
    """Parse a campaign's stated threshold rule into its components.

    Understands the phrasings that appear in measurement summaries, e.g.
    ``max(25 dB below peak, 5 dB above noise floor)``,
    ``10 dB below max. PAS power``, ``tau_gate = 966.67 ns; +12 dB (noise)``.
    The original wording is preserved in ``ThresholdRule.text``.
    """
    norm = text.replace("τ", "tau").strip()
    rel_peak = _RE_REL_PEAK.search(norm)
    above_noise = _RE_ABOVE_NOISE.search(norm)
    gate = _RE_GATE.search(norm)
    if not (rel_peak or above_noise or gate):
        raise ValueParseError(row, column, text, "unrecognized threshold rule")
    n_components = sum(1 for m in (rel_peak, above_noise, gate) if m)
    combine = ThresholdCombine.MAX_OF
    if "max(" in norm.lower().replace(" ", ""):
        combine = ThresholdCombine.MAX_OF
    elif n_components > 1:
        combine = ThresholdCombine.ALL_OF
    return ThresholdRule(
        rel_peak_db=Decimal(rel_peak.group(1)) if rel_peak else None,
        above_noise_db=Decimal(above_noise.group(1)) if above_noise else None,
        gate_ns=Decimal(gate.group(1)) if gate else None,
        combine=combine,
        text=text.strip(),
    )


def render_threshold(rule: ThresholdRule) -> str:
    """Inverse of :func:`parse_threshold_text`; verbatim text wins if present."""
    if rule.text:
        return rule.text
    phrases = []
    if rule.rel_peak_db is not None:
        phrases.append(f"{format_decimal(rule.rel_peak_db)} dB below peak")
    if rule.above_noise_db is not None:
        phrases.append(f"{format_decimal(rule.above_noise_db)} dB above noise floor")
    if rule.gate_ns is not None:
        phrases.append(f"gate = {format_decimal(rule.gate_ns)} ns")
    if len(phrases) == 1:
        return phrases[0]
    if rule.combine is ThresholdCombine.MAX_OF:
        return "max(" + ", ".join(phrases) + ")"
    return "; ".join(phrases)


# ---------------------------------------------------------------------------
# Metadata documents
# ---------------------------------------------------------------------------

# (canonical key, value kind, aliases).  Order defines document order.
_CAMPAIGN_KEYS = (
    ("institution", "str", ()),
    ("campaign_id", "str", ("campaign",)),
    ("map_ref", "str", ("map",)),
)

_RECORD_KEYS = (
    ("env", "env", ("environment",)),
    ("pl_kind", "str", ("path_loss_kind",)),
    ("az_res_deg", "dec", ("az_res",)),
    ("el_res_deg", "dec", ("el_res",)),
    ("mobility", "mobility", ("mobility_kind",)),
    ("speed_mps", "dec", ("speed",)),
    ("trajectory", "traj", ()),
    ("fc", "fc", ("f_c", "freq", "frequency", "fc_ghz")),
    ("bw_ghz", "dec", ("bw", "bandwidth_ghz")),
    ("ptx_avg_dbm", "dec", ("ptx", "tx_power_dbm")),
    ("dr_max_db", "dec", ("dr", "dynamic_range_db")),
    ("t_pdp", "threshold", ("pdp_threshold",)),
    ("t_pas", "threshold", ("pas_threshold",)),
    ("tau_max_ns", "dec", ("tau_max", "max_excess_delay_ns")),
    ("f_rep", "frep", ("rep_rate",)),
    ("waveform", "str", ()),
    ("pn_length_chips", "int", ("pn_length",)),
    ("n_avg", "int", ("averages",)),
    ("papr_db", "dec", ("papr",)),
    ("spreading_factor", "int", ()),
    ("dt_s_ns", "dec", ("dt_s", "delay_resolution_ns")),
    ("fs_msps", "dec", ("f_s", "sample_rate_msps")),
    ("sync", "sync", ("synchronization",)),
    ("sync_note", "str", ()),
    ("ifbw_khz", "dec", ("ifbw",)),
    ("n_pts", "int", ("sweep_points",)),
    ("fd_averaging", "int", ()),
    ("as_def", "asdef", ("as_definition", "angular_spread_def")),
    ("ant_model", "str", ("antenna_model",)),
    ("ant_op_band", "str", ("antenna_band",)),
    ("ant_type", "anttype", ("antenna_type",)),
    ("ant_subtype", "str", ("antenna_subtype",)),
    ("bw_ant_ghz", "dec", ("bw_ant",)),
    ("g_tx_dbi", "dec", ("gtx", "g_tx")),
    ("g_rx_dbi", "dec", ("grx", "g_rx")),
    ("hpbw_tx_deg", "dec", ("hpbw_tx",)),
    ("hpbw_rx_deg", "dec", ("hpbw_rx",)),
    ("sll_db", "dec", ("sll",)),
    ("fbr_db", "dec", ("fbr",)),
    ("xpd_db", "dec", ("xpd",)),
    ("pol", "pol", ("polarization",)),
    ("array_geometry", "arraykind", ()),
    ("element_spacing_mm", "dec", ("spacing_mm",)),
    ("n_elements", "int", ()),
)

METADATA_KEYS = tuple(k for k, _, _ in _CAMPAIGN_KEYS + _RECORD_KEYS)

_KIND_OF = {k: kind for k, kind, _ in _CAMPAIGN_KEYS + _RECORD_KEYS}

_ALIAS_OF = {}
for _key, _, _aliases in _CAMPAIGN_KEYS + _RECORD_KEYS:
    _ALIAS_OF[_key] = _key
    for _a in _aliases:
        _ALIAS_OF[_a] = _key


def _canonical_key(raw_key: str) -> str | None:
    return _ALIAS_OF.get(raw_key.strip().lower().rstrip("."))


_FC_RE = re.compile(_NUM + r"\s*ghz(?:\s*\((center|start)\))?$", re.I)
_FREP_RE = re.compile(_NUM + r"\s*(s|ms|us|hz|khz|mhz)$", re.I)
_FREP_UNITS = {"s": "s", "ms": "ms", "us": "us",
               "hz": "Hz", "khz": "kHz", "mhz": "MHz"}


def _enum_ci(enum_cls, token: str):
    token = token.strip()
    for member in enum_cls:
        if member.value.lower() == token.lower():
            return member
    return None


def _parse_meta_value(key: str, raw, row: int):
    """Convert one raw metadata value (text or JSON scalar) to its typed form."""
    kind = _KIND_OF[key]
    if kind == "dec":
        return _coerce_decimal(raw, row, key)
    if kind == "int":
        return _coerce_int(raw, row, key)
    if kind == "str":
        if isinstance(raw, str) and raw.strip():
            return raw.strip()
        raise ValueParseError(row, key, repr(raw), "expected non-empty text")
    if not isinstance(raw, str) and kind in (
            "env", "mobility", "sync", "asdef", "anttype", "pol", "arraykind",
            "threshold", "frep", "fc"):
        if kind == "fc" and isinstance(raw, (Decimal, int)):
            return (_coerce_decimal(raw, row, key), FrequencyRef.CENTER)
        raise ValueParseError(row, key, repr(raw), "expected text")

    if kind == "env":
        member = _enum_ci(Environment, raw)
        if member is None:
            raise ValueParseError(row, key, raw, "unknown environment")
        return member
    if kind == "mobility":
        member = _enum_ci(MobilityKind, raw)
        if member is None:
            raise ValueParseError(row, key, raw, "expected Static or Mobile")
        return member
    if kind == "sync":
        member = _enum_ci(SyncKind, raw)
        if member is None:
            raise ValueParseError(row, key, raw, "unknown sync kind")
        return member
    if kind == "asdef":
        low = raw.lower()
        if "fleury" in low:
            return AsDefinition.FLEURY
        if "3gpp" in low or "38.901" in low:
            return AsDefinition.TGPP
        raise ValueParseError(row, key, raw, "unknown angular-spread definition")
    if kind == "anttype":
        member = _enum_ci(AntennaKind, raw)
        if member is None:
            raise ValueParseError(row, key, raw, "unknown antenna kind")
        return member
    if kind == "pol":
        member = _enum_ci(Polarization, raw)
        if member is None:
            raise ValueParseError(row, key, raw, "unknown polarization")
        return member
    if kind == "arraykind":
        member = _enum_ci(ArrayKind, raw)
        if member is None:
            raise ValueParseError(row, key, raw, "unknown array geometry")
        return member
    if kind == "threshold":
        return parse_threshold_text(raw, row=row, column=key)
    if kind == "frep":
        m = _FREP_RE.match(raw.strip())
        if not m:
            raise ValueParseError(row, key, raw, "expected '<number> <unit>'")
        return RepetitionRate(value=Decimal(m.group(1)),
                              unit=_FREP_UNITS[m.group(2).lower()])
    if kind == "fc":
        m = _FC_RE.match(raw.strip())
        if m:
            ref = FrequencyRef(m.group(2).lower()) if m.group(2) else FrequencyRef.CENTER
            return (Decimal(m.group(1)), ref)
        return (_parse_decimal_token(raw, row, key), FrequencyRef.CENTER)
    if kind == "traj":
        if isinstance(raw, str):
            try:
                raw = json.loads(raw, parse_float=Decimal, parse_int=int)
            except json.JSONDecodeError as exc:
                raise ValueParseError(row, key, str(raw), f"bad trajectory: {exc}") from exc
        if not isinstance(raw, list):
            raise ValueParseError(row, key, repr(raw), "trajectory must be a list")
        waypoints = []
        for wp in raw:
            if not isinstance(wp, (list, tuple)) or len(wp) != 3:
                raise ValueParseError(row, key, repr(wp), "waypoint must be [x, y, t]")
            waypoints.append(tuple(_coerce_decimal(v, row, key) for v in wp))
        return tuple(waypoints)
    raise UnknownKey(key)  # pragma: no cover - registry covers every kind


def _render_meta_value(key: str, value) -> object:
    """Typed value -> raw form for the document (str, Decimal, int, or list)."""
    kind = _KIND_OF[key]
    if kind in ("dec", "int", "str"):
        return value
    if kind in ("env", "mobility", "sync", "anttype", "pol", "arraykind"):
        return value.value
    if kind == "asdef":
        return value.value
    if kind == "threshold":
        return render_threshold(value)
    if kind == "frep":
        return f"{format_decimal(value.value)} {value.unit}"
    if kind == "fc":
        fc_ghz, ref = value
        return f"{format_decimal(fc_ghz)} GHz ({ref.value})"
    if kind == "traj":
        return [list(wp) for wp in value]
    raise UnknownKey(key)  # pragma: no cover


def _assemble_metadata(typed: dict[str, object]):
    """Build (MetadataRecord, campaign_fields) from typed per-key values."""
    campaign_fields = {k: typed.pop(k) for k, _, _ in _CAMPAIGN_KEYS if k in typed}

    required = [k for k in ("env", "fc") if k not in typed]
    if required:
        raise MissingRequired("metadata key(s): " + ", ".join(required))

    kwargs: dict[str, object] = {}
    kwargs["env"] = typed.pop("env")
    kwargs["fc_ghz"], kwargs["fc_ref"] = typed.pop("fc")

    mob_kind = typed.pop("mobility", None)
    speed = typed.pop("speed_mps", None)
    traj = typed.pop("trajectory", None)
    if mob_kind is not None:
        kwargs["mobility"] = Mobility(kind=mob_kind, speed_mps=speed, trajectory=traj)
    elif speed is not None or traj is not None:
        raise MissingRequired("metadata key 'mobility' (speed/trajectory given without it)")

    wf_fields = {name: typed.pop(name, None) for name in
                 ("waveform", "pn_length_chips", "n_avg", "papr_db", "spreading_factor")}
    if any(v is not None for v in wf_fields.values()):
        kwargs["waveform"] = Waveform(
            kind=wf_fields["waveform"],
            pn_length_chips=wf_fields["pn_length_chips"],
            n_avg=wf_fields["n_avg"],
            papr_db=wf_fields["papr_db"],
            spreading_factor=wf_fields["spreading_factor"],
        )

    sync_kind = typed.pop("sync", None)
    sync_note = typed.pop("sync_note", None)
    if sync_kind is not None:
        kwargs["sync"] = Sync(kind=sync_kind, note=sync_note)
    elif sync_note is not None:
        raise MissingRequired("metadata key 'sync' (sync_note given without it)")

    fd_fields = {name: typed.pop(name, None)
                 for name in ("ifbw_khz", "n_pts", "fd_averaging")}
    if any(v is not None for v in fd_fields.values()):
        kwargs["sweep_fd"] = SweepFD(ifbw_khz=fd_fields["ifbw_khz"],
                                     n_pts=fd_fields["n_pts"],
                                     averaging=fd_fields["fd_averaging"])

    ant_kind = typed.pop("ant_type", None)
    ant_subtype = typed.pop("ant_subtype", None)
    if ant_kind is not None:
        kwargs["ant_type"] = AntennaType(kind=ant_kind, subtype=ant_subtype)
    elif ant_subtype is not None:
        raise MissingRequired("metadata key 'ant_type' (ant_subtype given without it)")

    arr_kind = typed.pop("array_geometry", None)
    spacing = typed.pop("element_spacing_mm", None)
    if arr_kind is not None:
        kwargs["array_geometry"] = ArrayGeometry(kind=arr_kind, spacing_mm=spacing)
    elif spacing is not None:
        raise MissingRequired(
            "metadata key 'array_geometry' (element_spacing_mm given without it)")

    # Everything left maps 1:1 onto MetadataRecord fields.
    kwargs.update(typed)
    return MetadataRecord(**kwargs), campaign_fields


def _metadata_pairs_from_csv(text: str) -> list[tuple[str, object, int]]:
    pairs = []
    for i, row in enumerate(csv.reader(io.StringIO(text))):
        rownum = i + 1
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        if rownum == 1 and [c.lower() for c in cells[:2]] == ["key", "value"]:
            continue
        if len(cells) != 2:
            raise FormatError(f"metadata row {rownum}: expected 'key,value'")
        pairs.append((cells[0], cells[1], rownum))
    return pairs


def _metadata_pairs_from_json(text: str, dialect: FormatDialect):
    try:
        doc = json.loads(text, parse_float=Decimal, parse_int=int)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("metadata document must be a JSON object")
    tag = doc.get("format")
    if tag != META_FORMAT_TAG:
        raise HeaderMismatch(f"format tag {tag!r}, expected {META_FORMAT_TAG!r}")
    version = doc.get("version")
    if version != dialect.version:
        raise HeaderMismatch(f"format version {version!r}, expected {dialect.version!r}")
    fields = doc.get("fields")
    if not isinstance(fields, dict):
        raise MissingRequired("'fields' object")
    return [(k, v, i + 1) for i, (k, v) in enumerate(fields.items())]


def _parse_metadata_document(text: str, dialect: FormatDialect, strict: bool,
                             findings: list | None):
    if dialect.kind is DialectKind.CSV:
        pairs = _metadata_pairs_from_csv(text)
    else:
        pairs = _metadata_pairs_from_json(text, dialect)

    typed: dict[str, object] = {}
    for raw_key, raw_value, rownum in pairs:
        key = _canonical_key(raw_key) if isinstance(raw_key, str) else None
        if key is None:
            if strict:
                raise UnknownKey(str(raw_key))
            if findings is not None:
                findings.append(CompatFinding(
                    severity=Severity.INFO, code="UNKNOWN_KEY", field=str(raw_key),
                    message=f"ignoring unrecognized metadata key {raw_key!r}",
                ))
            continue
        if key in typed:
            raise FormatError(f"duplicate metadata key {key!r} (row {rownum})")
        if raw_value is None:
            continue
        if isinstance(raw_value, str) and (
                raw_value.strip() == "" or raw_value.strip() == dialect.missing_token):
            continue
        typed[key] = _parse_meta_value(key, raw_value, rownum)
    return _assemble_metadata(typed)


def parse_metadata(text: str, dialect: FormatDialect = CSV_DIALECT, *,
                   strict: bool = True,
                   findings: list | None = None) -> MetadataRecord:
    """Parse a measurement-summary document into a :class:`MetadataRecord`.

    Campaign-scope keys (institution, campaign_id, map_ref) are accepted and
    ignored here; :func:`read_campaign` is the API that consumes them.
    """
    meta, _ = _parse_metadata_document(text, dialect, strict, findings)
    return meta


def parse_metadata_document(text: str, dialect: FormatDialect = CSV_DIALECT, *,
                            strict: bool = True, findings: list | None = None
                            ) -> tuple[MetadataRecord, dict]:
    """Parse a metadata document, also returning its campaign-scope fields
    (institution, campaign_id, map_ref) as a dict of whatever was present."""
    return _parse_metadata_document(text, dialect, strict, findings)


def _metadata_raw_items(meta: MetadataRecord, campaign_fields: dict | None):
    """Yield (key, raw_value_or_None) for every canonical key, in order."""
    campaign_fields = campaign_fields or {}
    for key, _, _ in _CAMPAIGN_KEYS:
        yield key, campaign_fields.get(key)

    values: dict[str, object] = {
        "env": meta.env,
        "pl_kind": meta.pl_kind,
        "az_res_deg": meta.az_res_deg,
        "el_res_deg": meta.el_res_deg,
        "mobility": meta.mobility.kind if meta.mobility else None,
        "speed_mps": meta.mobility.speed_mps if meta.mobility else None,
        "trajectory": meta.mobility.trajectory if meta.mobility else None,
        "fc": (meta.fc_ghz, meta.fc_ref),
        "bw_ghz": meta.bw_ghz,
        "ptx_avg_dbm": meta.ptx_avg_dbm,
        "dr_max_db": meta.dr_max_db,
        "t_pdp": meta.t_pdp,
        "t_pas": meta.t_pas,
        "tau_max_ns": meta.tau_max_ns,
        "f_rep": meta.f_rep,
        "waveform": meta.waveform.kind if meta.waveform else None,
        "pn_length_chips": meta.waveform.pn_length_chips if meta.waveform else None,
        "n_avg": meta.waveform.n_avg if meta.waveform else None,
        "papr_db": meta.waveform.papr_db if meta.waveform else None,
        "spreading_factor": meta.waveform.spreading_factor if meta.waveform else None,
        "dt_s_ns": meta.dt_s_ns,
        "fs_msps": meta.fs_msps,
        "sync": meta.sync.kind if meta.sync else None,
        "sync_note": meta.sync.note if meta.sync else None,
        "ifbw_khz": meta.sweep_fd.ifbw_khz if meta.sweep_fd else None,
        "n_pts": meta.sweep_fd.n_pts if meta.sweep_fd else None,
        "fd_averaging": meta.sweep_fd.averaging if meta.sweep_fd else None,
        "as_def": meta.as_def,
        "ant_model": meta.ant_model,
        "ant_op_band": meta.ant_op_band,
        "ant_type": meta.ant_type.kind if meta.ant_type else None,
        "ant_subtype": meta.ant_type.subtype if meta.ant_type else None,
        "bw_ant_ghz": meta.bw_ant_ghz,
        "g_tx_dbi": meta.g_tx_dbi,
        "g_rx_dbi": meta.g_rx_dbi,
        "hpbw_tx_deg": meta.hpbw_tx_deg,
        "hpbw_rx_deg": meta.hpbw_rx_deg,
        "sll_db": meta.sll_db,
        "fbr_db": meta.fbr_db,
        "xpd_db": meta.xpd_db,
        "pol": meta.pol,
        "array_geometry": meta.array_geometry.kind if meta.array_geometry else None,
        "element_spacing_mm": meta.array_geometry.spacing_mm if meta.array_geometry else None,
        "n_elements": meta.n_elements,
    }
    for key, _, _ in _RECORD_KEYS:
        raw = values[key]
        yield key, (None if raw is None else _render_meta_value(key, raw))


def _emit_json_scalar(value, missing_token: str) -> str:
    if value is None:
        return json.dumps(missing_token)
    if isinstance(value, Decimal):
        return format_decimal(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_emit_json_scalar(v, missing_token) for v in value) + "]"
    raise FormatError(f"cannot serialize {type(value).__name__}")  # pragma: no cover


def _write_metadata_document(meta: MetadataRecord, dialect: FormatDialect,
                             campaign_fields: dict | None) -> str:
    items = list(_metadata_raw_items(meta, campaign_fields))
    if dialect.kind is DialectKind.CSV:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for key, raw in items:
            if raw is None:
                cell = dialect.missing_token
            elif isinstance(raw, Decimal):
                cell = format_decimal(raw)
            elif isinstance(raw, list):
                cell = "[" + ", ".join(
                    "[" + ", ".join(format_decimal(v) for v in wp) + "]" for wp in raw
                ) + "]"
            else:
                cell = str(raw)
            w.writerow([key, cell])
        return buf.getvalue()

    lines = ["{"]
    lines.append(f'  "format": {json.dumps(META_FORMAT_TAG)},')
    lines.append(f'  "version": {json.dumps(dialect.version)},')
    lines.append('  "fields": {')
    for i, (key, raw) in enumerate(items):
        comma = "," if i < len(items) - 1 else ""
        lines.append(f'    {json.dumps(key)}: '
                     f'{_emit_json_scalar(raw, dialect.missing_token)}{comma}')
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_metadata(meta: MetadataRecord, dialect: FormatDialect = CSV_DIALECT) -> str:
    """Serialize a metadata record; absent fields become the missing token."""
    return _write_metadata_document(meta, dialect, None)


# ---------------------------------------------------------------------------
# Campaign-level file I/O
# ---------------------------------------------------------------------------

_POINT_SUFFIXES = {".pointdata.csv": DialectKind.CSV, ".pointdata.json": DialectKind.JSON}
_META_SUFFIXES = {".meta.csv": DialectKind.CSV, ".meta.json": DialectKind.JSON}


def _split_known_suffix(name: str, table: dict[str, DialectKind]):
    for suffix, kind in table.items():
        if name.endswith(suffix):
            return name[: -len(suffix)], kind, suffix
    return None


def dialect_for_path(path) -> FormatDialect:
    name = Path(path).name
    hit = _split_known_suffix(name, _POINT_SUFFIXES) or _split_known_suffix(
        name, _META_SUFFIXES)
    if hit is None:
        raise FormatError(
            f"{name!r}: expected one of "
            f"{sorted(_POINT_SUFFIXES) + sorted(_META_SUFFIXES)} suffixes"
        )
    return FormatDialect(kind=hit[1])


def meta_path_for(points_path) -> Path:
    points_path = Path(points_path)
    hit = _split_known_suffix(points_path.name, _POINT_SUFFIXES)
    if hit is None:
        raise FormatError(f"{points_path.name!r}: not a .pointdata.* file")
    stem, kind, _ = hit
    ext = ".meta.csv" if kind is DialectKind.CSV else ".meta.json"
    return points_path.with_name(stem + ext)


def read_campaign(points_path, *, strict: bool = True,
                  findings: list | None = None) -> Campaign:
    """Load a campaign from a ``*.pointdata.*`` file and its sibling metadata.

    The metadata file with the same stem is required.  Institution and
    campaign id default from the file stem when the document omits them.
    """
    points_path = Path(points_path)
    dialect = dialect_for_path(points_path)
    if not points_path.exists():
        raise MissingRequired(f"input file {points_path}")
    meta_path = meta_path_for(points_path)
    if not meta_path.exists():
        raise MissingRequired(f"metadata file {meta_path.name} (companion of "
                              f"{points_path.name})")

    points = parse_point_table(points_path.read_text(encoding="utf-8"), dialect,
                               strict=strict, findings=findings)
    meta, campaign_fields = _parse_metadata_document(
        meta_path.read_text(encoding="utf-8"), dialect, strict, findings)

    stem = _split_known_suffix(points_path.name, _POINT_SUFFIXES)[0]
    campaign_id = campaign_fields.get("campaign_id", stem)
    return Campaign(
        institution=campaign_fields.get("institution", campaign_id),
        campaign_id=campaign_id,
        metadata=meta,
        points=tuple(points),
        map_ref=campaign_fields.get("map_ref"),
    )


def write_campaign(campaign: Campaign, points_path, *,
                   dialect: FormatDialect | None = None) -> tuple[Path, Path]:
    """Write a campaign as a points file plus its sibling metadata file."""
    points_path = Path(points_path)
    if dialect is None:
        dialect = dialect_for_path(points_path)
    meta_path = meta_path_for(points_path)
    campaign_fields = {
        "institution": campaign.institution,
        "campaign_id": campaign.campaign_id,
        "map_ref": campaign.map_ref,
    }
    points_path.write_text(write_point_table(campaign.points, dialect),
                           encoding="utf-8")
    meta_path.write_text(
        _write_metadata_document(campaign.metadata, dialect,
                                 {k: v for k, v in campaign_fields.items() if v}),
        encoding="utf-8")
    return points_path, meta_path
