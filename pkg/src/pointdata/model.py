"""Domain model: point records, campaign metadata, findings, pooled datasets.

Numeric fields that travel through the canonical tables are stored as
:class:`decimal.Decimal` so that values survive a parse/write cycle verbatim
(``24.43`` never becomes ``24.430000000000001``).  Floats are rejected at
construction time; convert explicitly and consciously.

Single-record invariants (positivity, angular caps, mobility consistency) are
enforced in ``__post_init__`` and raise :class:`InvariantViolation`.
Cross-record rules -- frequency consistency with the campaign metadata and
TX/RX pair uniqueness -- are deliberately *not* constructor-enforced: a
campaign that violates them must still be constructible so that validation
can report Block findings and the CLI can exit 1 rather than crash.  See
:mod:`pointdata.validation`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from decimal import Decimal, InvalidOperation

from .errors import InvariantViolation

__all__ = [
    "LocCondition",
    "Environment",
    "FrequencyRef",
    "MobilityKind",
    "SyncKind",
    "AsDefinition",
    "AntennaKind",
    "Polarization",
    "ArrayKind",
    "ThresholdCombine",
    "Severity",
    "ThresholdRule",
    "Mobility",
    "RepetitionRate",
    "Waveform",
    "Sync",
    "SweepFD",
    "AntennaType",
    "ArrayGeometry",
    "PointRecord",
    "MetadataRecord",
    "Campaign",
    "CompatFinding",
    "PooledDataset",
]


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------

class LocCondition(enum.Enum):
    """Link state of a TX-RX location pair."""

    LOS = "LOS"
    NLOS = "NLOS"


class Environment(enum.Enum):
    UMI = "UMi"
    UMA = "UMa"
    INH = "InH"
    INF = "InF"
    RMA = "RMa"
    O2I = "O2I"


class FrequencyRef(enum.Enum):
    """Whether a stated carrier frequency names the band center or its start."""

    CENTER = "center"
    START = "start"


class MobilityKind(enum.Enum):
    STATIC = "Static"
    MOBILE = "Mobile"


class SyncKind(enum.Enum):
    RUBIDIUM = "Rubidium"
    GPS = "GPS"
    INTERNAL = "Internal"
    OTHER = "Other"


class AsDefinition(enum.Enum):
    """Angular-spread convention used when a campaign reduced its spectra."""

    FLEURY = "Fleury"
    TGPP = "3GPP"


class AntennaKind(enum.Enum):
    HORN = "Horn"
    ARRAY = "Array"
    OMNI = "Omni"
    OTHER = "Other"


class Polarization(enum.Enum):
    LINEAR = "Linear"
    CIRCULAR = "Circular"
    DUAL = "Dual"


class ArrayKind(enum.Enum):
    ULA = "ULA"
    UPA = "UPA"
    UCA = "UCA"


class ThresholdCombine(enum.Enum):
    """How multiple threshold components combine into one keep/drop rule."""

    MAX_OF = "MaxOf"
    ALL_OF = "AllOf"


class Severity(enum.IntEnum):
    """Finding severity; ordering matters (Block > Warn > Info)."""

    INFO = 0
    WARN = 1
    BLOCK = 2

    def __str__(self) -> str:  # "Info" / "Warn" / "Block"
        return self.name.capitalize()


# ---------------------------------------------------------------------------
# Construction-time checks
# ---------------------------------------------------------------------------

def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise InvariantViolation(field_name, message)


def _check_decimal(value, field_name: str, *, optional: bool = False) -> Decimal | None:
    """Accept Decimal, int, or numeric str; reject float (silent precision loss)."""
    if value is None:
        _require(optional, field_name, "value is required")
        return None
    if isinstance(value, bool) or isinstance(value, float):
        raise InvariantViolation(
            field_name, f"expected Decimal, int, or str, got {type(value).__name__}"
        )
    if isinstance(value, Decimal):
        out = value
    elif isinstance(value, int):
        out = Decimal(value)
    elif isinstance(value, str):
        try:
            out = Decimal(value)
        except InvalidOperation as exc:
            raise InvariantViolation(field_name, f"not a decimal number: {value!r}") from exc
    else:
        raise InvariantViolation(
            field_name, f"expected Decimal, int, or str, got {type(value).__name__}"
        )
    _require(out.is_finite(), field_name, "must be finite")
    return out


def _check_enum(value, enum_cls, field_name, *, optional: bool = False):
    if value is None:
        _require(optional, field_name, "value is required")
        return None
    if isinstance(value, enum_cls):
        return value
    if isinstance(value, str):
        try:
            return enum_cls(value)
        except ValueError:
            pass
    raise InvariantViolation(
        field_name,
        f"expected {enum_cls.__name__} (one of {[m.value for m in enum_cls]}), got {value!r}",
    )


def _check_str(value, field_name: str, *, optional: bool = False) -> str | None:
    if value is None:
        _require(optional, field_name, "value is required")
        return None
    _require(isinstance(value, str), field_name, f"expected str, got {type(value).__name__}")
    _require(value.strip() != "", field_name, "must be non-empty")
    return value


def _check_int(value, field_name: str, *, optional: bool = False) -> int | None:
    if value is None:
        _require(optional, field_name, "value is required")
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvariantViolation(field_name, f"expected int, got {type(value).__name__}")
    return value


def _set(obj, name, value) -> None:
    object.__setattr__(obj, name, value)


# ---------------------------------------------------------------------------
# Metadata value objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdRule:
    """One multipath threshold rule (for PDPs or angular spectra).

    At least one component must be present.  ``rel_peak_db`` keeps bins within
    that many dB of the strongest bin; ``above_noise_db`` keeps bins that many
    dB above the recorded noise floor; ``gate_ns`` keeps bins at or before that
    excess delay.  ``combine`` states how power components compose; since both
    conventions keep a bin only when it clears the resulting floor, ``MaxOf``
    and ``AllOf`` select the same bins -- the field is preserved for fidelity
    to the originating campaign's description.

    ``text`` carries the rule exactly as the campaign stated it, so writing a
    parsed metadata document reproduces the original wording.
    """

    rel_peak_db: Decimal | None = None
    above_noise_db: Decimal | None = None
    gate_ns: Decimal | None = None
    combine: ThresholdCombine = ThresholdCombine.MAX_OF
    text: str | None = None

    def __post_init__(self):
        _set(self, "rel_peak_db", _check_decimal(self.rel_peak_db, "rel_peak_db", optional=True))
        _set(self, "above_noise_db",
             _check_decimal(self.above_noise_db, "above_noise_db", optional=True))
        _set(self, "gate_ns", _check_decimal(self.gate_ns, "gate_ns", optional=True))
        _set(self, "combine", _check_enum(self.combine, ThresholdCombine, "combine"))
        _set(self, "text", _check_str(self.text, "text", optional=True))
        _require(
            any(v is not None for v in (self.rel_peak_db, self.above_noise_db, self.gate_ns)),
            "threshold",
            "a threshold rule needs at least one component",
        )
        for name in ("rel_peak_db", "above_noise_db", "gate_ns"):
            v = getattr(self, name)
            if v is not None:
                _require(v > 0, name, "must be > 0")


@dataclass(frozen=True)
class Mobility:
    """Whether the link moved during capture, and how."""

    kind: MobilityKind
    speed_mps: Decimal | None = None
    trajectory: tuple[tuple[Decimal, Decimal, Decimal], ...] | None = None

    def __post_init__(self):
        _set(self, "kind", _check_enum(self.kind, MobilityKind, "mobility"))
        _set(self, "speed_mps", _check_decimal(self.speed_mps, "speed_mps", optional=True))
        if self.trajectory is not None:
            pts = []
            for i, pt in enumerate(self.trajectory):
                _require(len(pt) == 3, "trajectory", f"waypoint {i} must be (x, y, t)")
                pts.append(tuple(_check_decimal(v, f"trajectory[{i}]") for v in pt))
            _set(self, "trajectory", tuple(pts))
        if self.kind is MobilityKind.STATIC:
            _require(self.speed_mps is None, "speed_mps", "static campaigns carry no speed")
            _require(self.trajectory is None, "trajectory",
                     "static campaigns carry no trajectory")
        if self.speed_mps is not None:
            _require(self.speed_mps >= 0, "speed_mps", "must be >= 0")


@dataclass(frozen=True)
class RepetitionRate:
    """Waveform repetition figure with its stated unit (e.g. 32.752 ms)."""

    value: Decimal
    unit: str = "ms"

    _UNITS = ("s", "ms", "us", "Hz", "kHz", "MHz")

    def __post_init__(self):
        _set(self, "value", _check_decimal(self.value, "f_rep"))
        _require(self.value > 0, "f_rep", "must be > 0")
        _require(self.unit in self._UNITS, "f_rep",
                 f"unit must be one of {self._UNITS}, got {self.unit!r}")


@dataclass(frozen=True)
class Waveform:
    kind: str | None = None
    pn_length_chips: int | None = None
    n_avg: int | None = None
    papr_db: Decimal | None = None
    spreading_factor: int | None = None

    def __post_init__(self):
        _set(self, "kind", _check_str(self.kind, "waveform", optional=True))
        _set(self, "pn_length_chips",
             _check_int(self.pn_length_chips, "pn_length_chips", optional=True))
        _set(self, "n_avg", _check_int(self.n_avg, "n_avg", optional=True))
        _set(self, "papr_db", _check_decimal(self.papr_db, "papr_db", optional=True))
        _set(self, "spreading_factor",
             _check_int(self.spreading_factor, "spreading_factor", optional=True))
        for name in ("pn_length_chips", "n_avg", "spreading_factor"):
            v = getattr(self, name)
            if v is not None:
                _require(v >= 1, name, "must be >= 1")


@dataclass(frozen=True)
class Sync:
    kind: SyncKind
    note: str | None = None

    def __post_init__(self):
        _set(self, "kind", _check_enum(self.kind, SyncKind, "sync"))
        _set(self, "note", _check_str(self.note, "sync_note", optional=True))


@dataclass(frozen=True)
class SweepFD:
    """Frequency-domain sweep settings for VNA-style sounders."""

    ifbw_khz: Decimal | None = None
    n_pts: int | None = None
    averaging: int | None = None

    def __post_init__(self):
        _set(self, "ifbw_khz", _check_decimal(self.ifbw_khz, "ifbw_khz", optional=True))
        _set(self, "n_pts", _check_int(self.n_pts, "n_pts", optional=True))
        _set(self, "averaging", _check_int(self.averaging, "fd_averaging", optional=True))
        if self.ifbw_khz is not None:
            _require(self.ifbw_khz > 0, "ifbw_khz", "must be > 0")
        for name in ("n_pts", "averaging"):
            v = getattr(self, name)
            if v is not None:
                _require(v >= 1, name, "must be >= 1")


@dataclass(frozen=True)
class AntennaType:
    kind: AntennaKind
    subtype: str | None = None

    def __post_init__(self):
        _set(self, "kind", _check_enum(self.kind, AntennaKind, "ant_type"))
        _set(self, "subtype", _check_str(self.subtype, "ant_subtype", optional=True))


@dataclass(frozen=True)
class ArrayGeometry:
    kind: ArrayKind
    spacing_mm: Decimal | None = None

    def __post_init__(self):
        _set(self, "kind", _check_enum(self.kind, ArrayKind, "array_geometry"))
        _set(self, "spacing_mm",
             _check_decimal(self.spacing_mm, "element_spacing_mm", optional=True))
        if self.spacing_mm is not None:
            _require(self.spacing_mm > 0, "element_spacing_mm", "must be > 0")


# ---------------------------------------------------------------------------
# Point records
# ---------------------------------------------------------------------------

@dataclass(frozen=True, kw_only=True)
class PointRecord:
    """One row of the canonical point table: a single TX-RX location pair.

    Path loss is in dB, delay spreads in ns, angular spreads in degrees.
    Azimuth spreads are capped at 180 deg and zenith spreads at 90 deg, the
    half-range of their respective angle domains.
    """

    freq_ghz: Decimal
    tx: str
    rx: str
    loc: LocCondition
    tr_sep_m: Decimal
    pl_db: Decimal
    mean_dir_ds_ns: Decimal
    omni_ds_ns: Decimal
    mean_lobe_asa_deg: Decimal
    omni_asa_deg: Decimal
    mean_lobe_asd_deg: Decimal
    omni_asd_deg: Decimal
    mean_lobe_zsa_deg: Decimal
    omni_zsa_deg: Decimal
    mean_lobe_zsd_deg: Decimal
    omni_zsd_deg: Decimal

    _POSITIVE = ("freq_ghz", "tr_sep_m", "pl_db")
    _SPREADS = (
        "mean_dir_ds_ns", "omni_ds_ns",
        "mean_lobe_asa_deg", "omni_asa_deg", "mean_lobe_asd_deg", "omni_asd_deg",
        "mean_lobe_zsa_deg", "omni_zsa_deg", "mean_lobe_zsd_deg", "omni_zsd_deg",
    )

    def __post_init__(self):
        _set(self, "tx", _check_str(self.tx, "tx"))
        _set(self, "rx", _check_str(self.rx, "rx"))
        _set(self, "loc", _check_enum(self.loc, LocCondition, "loc"))
        for name in self._POSITIVE:
            v = _check_decimal(getattr(self, name), name)
            _require(v > 0, name, "must be > 0")
            _set(self, name, v)
        for name in self._SPREADS:
            v = _check_decimal(getattr(self, name), name)
            _require(v >= 0, name, "must be >= 0")
            _set(self, name, v)
        for name in ("mean_lobe_asa_deg", "omni_asa_deg",
                     "mean_lobe_asd_deg", "omni_asd_deg"):
            _require(getattr(self, name) <= 180, name, "azimuth spread cannot exceed 180 deg")
        for name in ("mean_lobe_zsa_deg", "omni_zsa_deg",
                     "mean_lobe_zsd_deg", "omni_zsd_deg"):
            _require(getattr(self, name) <= 90, name, "zenith spread cannot exceed 90 deg")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.tx, self.rx)


# ---------------------------------------------------------------------------
# Campaign metadata
# ---------------------------------------------------------------------------

@dataclass(frozen=True, kw_only=True)
class MetadataRecord:
    """Measurement-summary metadata for one campaign.

    Only ``env`` and ``fc_ghz`` are mandatory; everything else may be absent
    when a campaign did not report it.  Absent values round-trip as the
    dialect's missing token.
    """

    env: Environment
    fc_ghz: Decimal
    fc_ref: FrequencyRef = FrequencyRef.CENTER
    pl_kind: str = "unspecified"
    az_res_deg: Decimal | None = None
    el_res_deg: Decimal | None = None
    mobility: Mobility | None = None
    bw_ghz: Decimal | None = None
    ptx_avg_dbm: Decimal | None = None
    dr_max_db: Decimal | None = None
    t_pdp: ThresholdRule | None = None
    t_pas: ThresholdRule | None = None
    tau_max_ns: Decimal | None = None
    f_rep: RepetitionRate | None = None
    waveform: Waveform | None = None
    dt_s_ns: Decimal | None = None
    fs_msps: Decimal | None = None
    sync: Sync | None = None
    sweep_fd: SweepFD | None = None
    as_def: AsDefinition | None = None
    ant_model: str | None = None
    ant_op_band: str | None = None
    ant_type: AntennaType | None = None
    bw_ant_ghz: Decimal | None = None
    g_tx_dbi: Decimal | None = None
    g_rx_dbi: Decimal | None = None
    hpbw_tx_deg: Decimal | None = None
    hpbw_rx_deg: Decimal | None = None
    sll_db: Decimal | None = None
    fbr_db: Decimal | None = None
    xpd_db: Decimal | None = None
    pol: Polarization | None = None
    array_geometry: ArrayGeometry | None = None
    n_elements: int | None = None

    def __post_init__(self):
        _set(self, "env", _check_enum(self.env, Environment, "env"))
        _set(self, "fc_ref", _check_enum(self.fc_ref, FrequencyRef, "fc_ref"))
        _set(self, "pl_kind", _check_str(self.pl_kind, "pl_kind"))
        _set(self, "as_def", _check_enum(self.as_def, AsDefinition, "as_def", optional=True))
        _set(self, "pol", _check_enum(self.pol, Polarization, "pol", optional=True))
        for name in ("fc_ghz", "az_res_deg", "el_res_deg", "bw_ghz", "ptx_avg_dbm",
                     "dr_max_db", "tau_max_ns", "dt_s_ns", "fs_msps", "bw_ant_ghz",
                     "g_tx_dbi", "g_rx_dbi", "hpbw_tx_deg", "hpbw_rx_deg",
                     "sll_db", "fbr_db", "xpd_db"):
            optional = name != "fc_ghz"
            _set(self, name, _check_decimal(getattr(self, name), name, optional=optional))
        for name in ("ant_model", "ant_op_band"):
            _set(self, name, _check_str(getattr(self, name), name, optional=True))
        _set(self, "n_elements", _check_int(self.n_elements, "n_elements", optional=True))

        _require(self.fc_ghz > 0, "fc_ghz", "must be > 0")
        for name in ("bw_ghz", "tau_max_ns", "dt_s_ns", "fs_msps",
                     "bw_ant_ghz", "az_res_deg", "el_res_deg"):
            v = getattr(self, name)
            if v is not None:
                _require(v > 0, name, "must be > 0")
        if self.dr_max_db is not None:
            _require(self.dr_max_db > 0, "dr_max_db", "must be > 0")
        for name in ("hpbw_tx_deg", "hpbw_rx_deg"):
            v = getattr(self, name)
            if v is not None:
                _require(0 < v < 360, name, "must lie in (0, 360) deg")
        if self.sll_db is not None:
            _require(self.sll_db <= 0, "sll_db",
                     "side-lobe level is relative to boresight and cannot be positive")
        for name in ("fbr_db", "xpd_db"):
            v = getattr(self, name)
            if v is not None:
                _require(v >= 0, name, "must be >= 0")
        if self.n_elements is not None:
            _require(self.n_elements >= 1, "n_elements", "must be >= 1")
        for name, cls in (("mobility", Mobility), ("t_pdp", ThresholdRule),
                          ("t_pas", ThresholdRule), ("f_rep", RepetitionRate),
                          ("waveform", Waveform), ("sync", Sync), ("sweep_fd", SweepFD),
                          ("ant_type", AntennaType), ("array_geometry", ArrayGeometry)):
            v = getattr(self, name)
            _require(v is None or isinstance(v, cls), name,
                     f"expected {cls.__name__} or None")


# ---------------------------------------------------------------------------
# Campaigns, findings, pools
# ---------------------------------------------------------------------------

@dataclass(frozen=True, kw_only=True)
class Campaign:
    """A point table plus the metadata record describing how it was measured."""

    institution: str
    campaign_id: str
    metadata: MetadataRecord
    points: tuple[PointRecord, ...] = ()
    map_ref: str | None = None

    def __post_init__(self):
        _set(self, "institution", _check_str(self.institution, "institution"))
        _set(self, "campaign_id", _check_str(self.campaign_id, "campaign_id"))
        _require(isinstance(self.metadata, MetadataRecord), "metadata",
                 "expected MetadataRecord")
        _set(self, "points", tuple(self.points))
        for i, p in enumerate(self.points):
            _require(isinstance(p, PointRecord), "points", f"points[{i}] is not a PointRecord")
        _set(self, "map_ref", _check_str(self.map_ref, "map_ref", optional=True))

    def split(self, loc: LocCondition) -> tuple[PointRecord, ...]:
        loc = _check_enum(loc, LocCondition, "loc")
        return tuple(p for p in self.points if p.loc is loc)


@dataclass(frozen=True, kw_only=True)
class CompatFinding:
    """One validation or pooling observation with a stable machine code."""

    severity: Severity
    code: str
    message: str
    field: str | None = None
    campaigns: tuple[str, ...] = ()

    def __post_init__(self):
        _require(isinstance(self.severity, Severity), "severity", "expected Severity")
        _set(self, "code", _check_str(self.code, "code"))
        _set(self, "message", _check_str(self.message, "message"))
        _set(self, "field", _check_str(self.field, "field", optional=True))
        _set(self, "campaigns", tuple(self.campaigns))

    def to_json_dict(self) -> dict:
        return {
            "severity": str(self.severity),
            "code": self.code,
            "field": self.field,
            "message": self.message,
            "campaigns": list(self.campaigns),
        }


@dataclass(frozen=True, kw_only=True)
class PooledDataset:
    """Points from one or more campaigns, with per-point provenance.

    ``provenance[i]`` names the campaign that contributed ``points[i]``.
    ``compat_report`` carries every finding raised while pooling, including
    the per-campaign validation findings.
    """

    campaigns: tuple[Campaign, ...]
    points: tuple[PointRecord, ...]
    provenance: tuple[str, ...]
    compat_report: tuple[CompatFinding, ...] = ()

    def __post_init__(self):
        _set(self, "campaigns", tuple(self.campaigns))
        _set(self, "points", tuple(self.points))
        _set(self, "provenance", tuple(self.provenance))
        _set(self, "compat_report", tuple(self.compat_report))
        _require(len(self.campaigns) >= 1, "campaigns", "a pool needs at least one campaign")
        _require(len(self.points) == len(self.provenance), "provenance",
                 "one provenance entry per point")
        ids = {c.campaign_id for c in self.campaigns}
        for cid in self.provenance:
            _require(cid in ids, "provenance", f"unknown campaign id {cid!r}")

    def split(self, loc: LocCondition) -> tuple[PointRecord, ...]:
        loc = _check_enum(loc, LocCondition, "loc")
        return tuple(p for p in self.points if p.loc is loc)

    @property
    def worst_severity(self) -> Severity | None:
        if not self.compat_report:
            return None
        return max(f.severity for f in self.compat_report)


def revalidate(record):
    """Re-run a record's constructor invariants; raises InvariantViolation."""
    kwargs = {f.name: getattr(record, f.name) for f in fields(record) if f.init}
    return type(record)(**kwargs)
