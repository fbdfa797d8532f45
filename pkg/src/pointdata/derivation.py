"""From sounder output to point records: thresholding, spreads, link budget.

The inputs are directional power delay profiles (PDPs) tagged with pointing
angles.  ``derive_point`` applies the campaign's threshold rules, synthesizes
the omnidirectional PDP by summing linear power across directions per delay
bin, and reduces everything to one :class:`PointRecord`.

Conventions:

- Thresholded bins are zeroed, never removed, so delay grids stay aligned
  for the omnidirectional union.
- The omni synthesis rule (plain linear power sum per bin) is a documented
  choice isolated in :func:`synthesize_omni`.
- Angle arithmetic happens on the unit circle via complex exponentials, so
  wrapping cannot corrupt spreads; zenith angles live on [0, 180] and are
  never wrapped.
- The 3GPP circular spread is undefined when the mean vector vanishes; that
  is the :class:`DegenerateSpectrum` error, not an infinity or NaN.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .errors import (
    DegenerateSpectrum,
    EmptyAfterThreshold,
    InvariantViolation,
    MissingMetadata,
    NoPower,
    ValueParseError,
)
from .model import (
    AsDefinition,
    LocCondition,
    MetadataRecord,
    PointRecord,
    ThresholdRule,
)

__all__ = [
    "AngleDomain",
    "SweepSide",
    "PowerDelayProfile",
    "PowerAngularSpectrum",
    "DirectionalProfile",
    "PointGeometry",
    "dbm_to_mw",
    "mw_to_dbm",
    "apply_threshold_pdp",
    "apply_threshold_pas",
    "rms_delay_spread",
    "angular_spread_fleury",
    "angular_spread_3gpp",
    "angular_spread",
    "path_loss_from_link_budget",
    "synthesize_omni",
    "load_direction_profile",
    "derive_point",
]


class AngleDomain(enum.Enum):
    AZIMUTH = "Azimuth"
    ZENITH = "Zenith"


class SweepSide(enum.Enum):
    """Which link end was swept; departure sweeps feed ASD/ZSD."""

    ARRIVAL = "arrival"
    DEPARTURE = "departure"


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (float(dbm) / 10.0)


def mw_to_dbm(mw: float) -> float:
    if not mw > 0:
        raise NoPower(f"cannot express {mw} mW in dBm")
    return 10.0 * math.log10(mw)


def _readonly(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PowerDelayProfile:
    """Received power per delay bin, linear milliwatts."""

    delays_ns: np.ndarray
    powers_mw: np.ndarray
    noise_floor_dbm: float

    def __post_init__(self):
        delays = _readonly(self.delays_ns)
        powers = _readonly(self.powers_mw)
        object.__setattr__(self, "delays_ns", delays)
        object.__setattr__(self, "powers_mw", powers)
        object.__setattr__(self, "noise_floor_dbm", float(self.noise_floor_dbm))
        if delays.ndim != 1 or powers.ndim != 1 or len(delays) != len(powers):
            raise InvariantViolation("delays_ns", "delays and powers must be "
                                     "1-D and the same length")
        if len(delays) == 0:
            raise InvariantViolation("delays_ns", "profile cannot be empty")
        if not np.all(np.isfinite(delays)) or not np.all(np.isfinite(powers)):
            raise InvariantViolation("powers_mw", "values must be finite")
        if np.any(np.diff(delays) <= 0):
            raise InvariantViolation("delays_ns", "delays must be strictly increasing")
        if np.any(powers < 0):
            raise InvariantViolation("powers_mw", "powers must be >= 0")
        if not math.isfinite(self.noise_floor_dbm):
            raise InvariantViolation("noise_floor_dbm", "must be finite")

    @property
    def total_power_mw(self) -> float:
        return float(np.sum(self.powers_mw))


@dataclass(frozen=True)
class PowerAngularSpectrum:
    """Linear power per pointing angle, azimuth [0, 360) or zenith [0, 180]."""

    angles_deg: np.ndarray
    powers_mw: np.ndarray
    domain: AngleDomain = AngleDomain.AZIMUTH

    def __post_init__(self):
        angles = _readonly(self.angles_deg)
        powers = _readonly(self.powers_mw)
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "powers_mw", powers)
        if not isinstance(self.domain, AngleDomain):
            object.__setattr__(self, "domain", AngleDomain(self.domain))
        if angles.ndim != 1 or powers.ndim != 1 or len(angles) != len(powers):
            raise InvariantViolation("angles_deg", "angles and powers must be "
                                     "1-D and the same length")
        if len(angles) == 0:
            raise InvariantViolation("angles_deg", "spectrum cannot be empty")
        if not np.all(np.isfinite(angles)) or not np.all(np.isfinite(powers)):
            raise InvariantViolation("powers_mw", "values must be finite")
        if np.any(powers < 0):
            raise InvariantViolation("powers_mw", "powers must be >= 0")
        if self.domain is AngleDomain.AZIMUTH:
            if np.any(angles < 0) or np.any(angles >= 360):
                raise InvariantViolation("angles_deg", "azimuths must lie in [0, 360)")
        else:
            if np.any(angles < 0) or np.any(angles > 180):
                raise InvariantViolation("angles_deg", "zeniths must lie in [0, 180]")

    @property
    def total_power_mw(self) -> float:
        return float(np.sum(self.powers_mw))


@dataclass(frozen=True)
class DirectionalProfile:
    """One directional PDP with its pointing angles."""

    pdp: PowerDelayProfile
    azimuth_deg: float
    zenith_deg: float
    sweep: SweepSide = SweepSide.ARRIVAL

    def __post_init__(self):
        if not isinstance(self.pdp, PowerDelayProfile):
            raise InvariantViolation("pdp", "expected PowerDelayProfile")
        az = float(self.azimuth_deg)
        zen = float(self.zenith_deg)
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "zenith_deg", zen)
        if not isinstance(self.sweep, SweepSide):
            object.__setattr__(self, "sweep", SweepSide(self.sweep))
        if not 0 <= az < 360:
            raise InvariantViolation("azimuth_deg", "must lie in [0, 360)")
        if not 0 <= zen <= 180:
            raise InvariantViolation("zenith_deg", "must lie in [0, 180]")


@dataclass(frozen=True)
class PointGeometry:
    """Identity and geometry of one TX-RX location pair."""

    tx_id: str
    rx_id: str
    loc_condition: LocCondition
    tr_sep_m: Decimal

    def __post_init__(self):
        if not isinstance(self.tx_id, str) or not self.tx_id.strip():
            raise InvariantViolation("tx_id", "must be a non-empty string")
        if not isinstance(self.rx_id, str) or not self.rx_id.strip():
            raise InvariantViolation("rx_id", "must be a non-empty string")
        if not isinstance(self.loc_condition, LocCondition):
            object.__setattr__(self, "loc_condition", LocCondition(self.loc_condition))
        sep = self.tr_sep_m
        if isinstance(sep, float):
            raise InvariantViolation("tr_sep_m", "use Decimal, not float")
        if not isinstance(sep, Decimal):
            sep = Decimal(str(sep))
            object.__setattr__(self, "tr_sep_m", sep)
        if not sep > 0:
            raise InvariantViolation("tr_sep_m", "must be > 0")


# ---------------------------------------------------------------------------
# Thresholding
# ---------------------------------------------------------------------------

def _power_floor_dbm(rule: ThresholdRule, peak_mw: float,
                     noise_floor_dbm: float | None) -> float | None:
    """The keep/drop power floor implied by a rule, or None if power-free.

    ``MaxOf`` takes the higher of the component floors.  ``AllOf`` requires a
    bin to clear every component, which for keep-if-above floors is the same
    set of bins, so both combiners reduce to the max.
    """
    candidates = []
    if rule.rel_peak_db is not None:
        candidates.append(mw_to_dbm(peak_mw) - float(rule.rel_peak_db))
    if rule.above_noise_db is not None:
        if noise_floor_dbm is None:
            raise ValueError("rule has an above_noise_db component but no "
                             "noise floor is available")
        candidates.append(noise_floor_dbm + float(rule.above_noise_db))
    if not candidates:
        return None
    return max(candidates)


def apply_threshold_pdp(pdp: PowerDelayProfile,
                        rule: ThresholdRule | None) -> PowerDelayProfile:
    """Zero every bin below the rule's floor or beyond its delay gate.

    Bins are kept when they sit at or above the floor.  Raises
    :class:`EmptyAfterThreshold` when nothing survives (including an all-zero
    input profile).
    """
    if rule is None:
        if not np.any(pdp.powers_mw > 0):
            raise EmptyAfterThreshold("profile carries no power")
        return pdp
    powers = np.array(pdp.powers_mw, copy=True)
    peak = float(powers.max()) if len(powers) else 0.0
    if peak <= 0:
        raise EmptyAfterThreshold("profile carries no power")
    floor_dbm = _power_floor_dbm(rule, peak, pdp.noise_floor_dbm)
    if floor_dbm is not None:
        powers[powers < dbm_to_mw(floor_dbm)] = 0.0
    if rule.gate_ns is not None:
        powers[pdp.delays_ns > float(rule.gate_ns)] = 0.0
    if not np.any(powers > 0):
        raise EmptyAfterThreshold(
            f"no bin clears the threshold ({rule.text or rule.combine.value})")
    return PowerDelayProfile(pdp.delays_ns, powers, pdp.noise_floor_dbm)


def apply_threshold_pas(pas: PowerAngularSpectrum, rule: ThresholdRule | None, *,
                        noise_floor_dbm: float | None = None) -> PowerAngularSpectrum:
    """Angular-domain analogue of :func:`apply_threshold_pdp`.

    A ``gate_ns`` component has no meaning without a delay axis and is
    ignored here.  ``above_noise_db`` needs ``noise_floor_dbm``.
    """
    if rule is None:
        if not np.any(pas.powers_mw > 0):
            raise EmptyAfterThreshold("spectrum carries no power")
        return pas
    powers = np.array(pas.powers_mw, copy=True)
    peak = float(powers.max()) if len(powers) else 0.0
    if peak <= 0:
        raise EmptyAfterThreshold("spectrum carries no power")
    floor_dbm = _power_floor_dbm(rule, peak, noise_floor_dbm) \
        if (rule.rel_peak_db is not None or rule.above_noise_db is not None) else None
    if floor_dbm is not None:
        powers[powers < dbm_to_mw(floor_dbm)] = 0.0
    if not np.any(powers > 0):
        raise EmptyAfterThreshold(
            f"no direction clears the threshold ({rule.text or rule.combine.value})")
    return PowerAngularSpectrum(pas.angles_deg, powers, pas.domain)


# ---------------------------------------------------------------------------
# Spread statistics
# ---------------------------------------------------------------------------

def rms_delay_spread(pdp: PowerDelayProfile) -> float:
    """Power-weighted RMS delay spread in ns (second central moment).

    Computed in central form, sqrt(sum p (tau - mean)^2 / sum p), which is
    algebraically the textbook sqrt(E[tau^2] - E[tau]^2) but does not cancel
    catastrophically for narrow profiles at large absolute delays.
    """
    p = pdp.powers_mw
    total = float(np.sum(p))
    if not total > 0:
        raise NoPower("delay spread needs at least one nonzero bin")
    tau = pdp.delays_ns
    mean = float(np.sum(p * tau)) / total
    var = float(np.sum(p * (tau - mean) ** 2)) / total
    return math.sqrt(max(var, 0.0))


def _mean_vector(pas: PowerAngularSpectrum) -> tuple[complex, np.ndarray]:
    p = pas.powers_mw
    total = float(np.sum(p))
    if not total > 0:
        raise NoPower("angular spread needs at least one nonzero direction")
    w = p / total
    phasors = np.exp(1j * np.radians(pas.angles_deg))
    mu = complex(np.sum(w * phasors))
    return mu, w * np.abs(phasors - mu) ** 2


def angular_spread_fleury(pas: PowerAngularSpectrum) -> float:
    """Fleury circular spread sqrt(sum w |e^{j phi} - mu|^2), in degrees.

    Bounded above by 1 rad (57.296 deg); exactly 0 for a single direction.
    """
    if int(np.count_nonzero(pas.powers_mw)) == 1:
        return 0.0
    _, weighted_dev = _mean_vector(pas)
    return math.degrees(math.sqrt(max(float(np.sum(weighted_dev)), 0.0)))


def angular_spread_3gpp(pas: PowerAngularSpectrum) -> float:
    """3GPP circular spread sqrt(-2 ln |mu|), in degrees.

    Undefined (DegenerateSpectrum) when the mean vector magnitude vanishes,
    e.g. power spread uniformly around the full circle.
    """
    if int(np.count_nonzero(pas.powers_mw)) == 1:
        return 0.0
    mu, _ = _mean_vector(pas)
    r = abs(mu)
    if r <= 1e-12:
        raise DegenerateSpectrum(
            f"mean vector magnitude {r:.3e}; circular spread diverges")
    r = min(r, 1.0)
    return math.degrees(math.sqrt(-2.0 * math.log(r)))


def angular_spread(pas: PowerAngularSpectrum, definition: AsDefinition) -> float:
    if definition is AsDefinition.FLEURY:
        return angular_spread_fleury(pas)
    if definition is AsDefinition.TGPP:
        return angular_spread_3gpp(pas)
    raise ValueError(f"unknown angular-spread definition {definition!r}")


# ---------------------------------------------------------------------------
# Link budget
# ---------------------------------------------------------------------------

def path_loss_from_link_budget(prx_dbm: float, meta: MetadataRecord) -> float:
    """PL = P_TX,avg + G_TX + G_RX - P_RX, all in dB/dBm/dBi."""
    for name in ("ptx_avg_dbm", "g_tx_dbi", "g_rx_dbi"):
        if getattr(meta, name) is None:
            raise MissingMetadata(name)
    return (float(meta.ptx_avg_dbm) + float(meta.g_tx_dbi)
            + float(meta.g_rx_dbi) - float(prx_dbm))


# ---------------------------------------------------------------------------
# Omni synthesis and point derivation
# ---------------------------------------------------------------------------

def synthesize_omni(pdps) -> PowerDelayProfile:
    """Sum linear power across directional PDPs per exact delay bin.

    This is the omnidirectional synthesis rule of this artifact: a plain
    power union with no per-direction gain reweighting (boresight gains are
    already accounted for in the link budget).  Bins are matched by exact
    delay value; the output grid is their sorted union.
    """
    pdps = list(pdps)
    if not pdps:
        raise EmptyAfterThreshold("no directional profiles to combine")
    acc: dict[float, float] = {}
    for pdp in pdps:
        for tau, p in zip(pdp.delays_ns.tolist(), pdp.powers_mw.tolist()):
            acc[tau] = acc.get(tau, 0.0) + p
    delays = sorted(acc)
    powers = [acc[t] for t in delays]
    noise = max(p.noise_floor_dbm for p in pdps)
    return PowerDelayProfile(np.array(delays), np.array(powers), noise)


def load_direction_profile(source) -> DirectionalProfile:
    """Parse one raw directional profile.

    Accepts the JSON text or the already-decoded object:
    ``{delays_ns: [...], powers_dbm: [...], noise_floor_dbm, azimuth_deg,
    zenith_deg}`` plus an optional ``sweep`` of ``arrival`` (default) or
    ``departure``.  Powers arrive in dBm and are converted to linear mW.
    """
    if isinstance(source, (str, bytes)):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ValueParseError(0, "profile", "<json>", str(exc)) from exc
    else:
        obj = source
    if not isinstance(obj, dict):
        raise ValueParseError(0, "profile", repr(obj), "expected a JSON object")
    missing = [k for k in ("delays_ns", "powers_dbm", "noise_floor_dbm",
                           "azimuth_deg", "zenith_deg") if k not in obj]
    if missing:
        raise ValueParseError(0, missing[0], "<absent>", "required profile key")
    powers_mw = [dbm_to_mw(v) for v in obj["powers_dbm"]]
    pdp = PowerDelayProfile(np.asarray(obj["delays_ns"], dtype=float),
                            np.asarray(powers_mw), float(obj["noise_floor_dbm"]))
    sweep = SweepSide(obj.get("sweep", "arrival"))
    return DirectionalProfile(
        pdp=pdp,
        azimuth_deg=float(obj["azimuth_deg"]) % 360.0,
        zenith_deg=float(obj["zenith_deg"]),
        sweep=sweep,
    )


def _pas_from_directions(directions, axis: str,
                         domain: AngleDomain) -> PowerAngularSpectrum:
    acc: dict[float, float] = {}
    for prof, thr in directions:
        angle = prof.azimuth_deg if axis == "azimuth" else prof.zenith_deg
        acc[angle] = acc.get(angle, 0.0) + thr.total_power_mw
    angles = sorted(acc)
    return PowerAngularSpectrum(np.array(angles),
                                np.array([acc[a] for a in angles]), domain)


def _spread_pair(directions, meta: MetadataRecord) -> tuple[float, float]:
    """(azimuth spread, zenith spread) of one sweep side, post T_PAS."""
    noise = max(prof.pdp.noise_floor_dbm for prof, _ in directions)
    out = []
    for axis, domain in (("azimuth", AngleDomain.AZIMUTH),
                         ("zenith", AngleDomain.ZENITH)):
        pas = _pas_from_directions(directions, axis, domain)
        pas = apply_threshold_pas(pas, meta.t_pas, noise_floor_dbm=noise)
        out.append(angular_spread(pas, meta.as_def))
    return out[0], out[1]


def _lobe_spread_pair(directions_by_index, partition, meta: MetadataRecord):
    """Power-weighted mean per-lobe spreads for one sweep side.

    ``partition`` holds lists of profile indices; indices whose profile did
    not survive T_PDP are skipped.  T_PAS applies within each lobe (spatial
    thresholding is per-lobe).  Lobes with no surviving member are dropped;
    if none remain the contract value 0.0 is returned (no decomposition).
    """
    weights, az_spreads, zen_spreads = [], [], []
    for members in partition:
        directions = [directions_by_index[i] for i in members
                      if i in directions_by_index]
        if not directions:
            continue
        noise = max(prof.pdp.noise_floor_dbm for prof, _ in directions)
        try:
            az_pas = apply_threshold_pas(
                _pas_from_directions(directions, "azimuth", AngleDomain.AZIMUTH),
                meta.t_pas, noise_floor_dbm=noise)
            zen_pas = apply_threshold_pas(
                _pas_from_directions(directions, "zenith", AngleDomain.ZENITH),
                meta.t_pas, noise_floor_dbm=noise)
        except EmptyAfterThreshold:
            continue
        weights.append(az_pas.total_power_mw)
        az_spreads.append(angular_spread(az_pas, meta.as_def))
        zen_spreads.append(angular_spread(zen_pas, meta.as_def))
    total = math.fsum(weights)
    if not total > 0:
        return 0.0, 0.0
    az = math.fsum(w * s for w, s in zip(weights, az_spreads)) / total
    zen = math.fsum(w * s for w, s in zip(weights, zen_spreads)) / total
    return az, zen


def _quantize_stat(value: float) -> Decimal:
    # Derived statistics are reported at table precision (two decimals).
    return Decimal(f"{float(value):.2f}")


def derive_point(pdps, meta: MetadataRecord, geometry: PointGeometry, *,
                 lobes_arrival=None, lobes_departure=None,
                 lobe_spreads: dict | None = None) -> PointRecord:
    """Reduce directional PDPs for one location pair to a point record.

    Applies ``meta.t_pdp`` per direction, synthesizes the omni PDP, applies
    ``meta.t_pas`` to the angular spectra, and evaluates spreads under
    ``meta.as_def``.  Path loss comes from the link budget over the total
    surviving omni power.  Departure-side statistics (ASD/ZSD) are 0 when no
    departure sweep is given.

    ``lobes_arrival``/``lobes_departure`` are optional partitions (lists of
    profile-index lists) defining spatial lobes; without them the mean-lobe
    columns are 0 unless ``lobe_spreads`` supplies upstream-computed values
    keyed ``asa``/``zsa``/``asd``/``zsd``.  Derived statistics are quantized
    to two decimals, the resolution of the canonical tables.
    """
    if meta.as_def is None:
        raise MissingMetadata("as_def")
    profiles = list(pdps)
    survivors: dict[int, tuple[DirectionalProfile, PowerDelayProfile]] = {}
    for i, prof in enumerate(profiles):
        try:
            survivors[i] = (prof, apply_threshold_pdp(prof.pdp, meta.t_pdp))
        except EmptyAfterThreshold:
            continue
    if not survivors:
        raise EmptyAfterThreshold("no directional PDP survives thresholding")

    by_side = {side: [v for v in survivors.values() if v[0].sweep is side]
               for side in SweepSide}
    arrival = by_side[SweepSide.ARRIVAL]
    departure = by_side[SweepSide.DEPARTURE]
    # Delay statistics and the power budget use the receive sweep; a
    # departure-only capture falls back to what it has.
    omni_side = arrival if arrival else departure

    omni = synthesize_omni([thr for _, thr in omni_side])
    omni_ds = rms_delay_spread(omni)
    weights = [thr.total_power_mw for _, thr in omni_side]
    ds_values = [rms_delay_spread(thr) for _, thr in omni_side]
    mean_dir_ds = (math.fsum(w * v for w, v in zip(weights, ds_values))
                   / math.fsum(weights))
    pl_db = path_loss_from_link_budget(mw_to_dbm(omni.total_power_mw), meta)

    if arrival:
        asa, zsa = _spread_pair(arrival, meta)
    else:
        asa, zsa = 0.0, 0.0
    if departure:
        asd, zsd = _spread_pair(departure, meta)
    else:
        asd, zsd = 0.0, 0.0

    lobe = {"asa": 0.0, "zsa": 0.0, "asd": 0.0, "zsd": 0.0}
    arrival_by_index = {i: v for i, v in survivors.items()
                        if v[0].sweep is SweepSide.ARRIVAL}
    departure_by_index = {i: v for i, v in survivors.items()
                          if v[0].sweep is SweepSide.DEPARTURE}
    if lobes_arrival is not None:
        lobe["asa"], lobe["zsa"] = _lobe_spread_pair(arrival_by_index,
                                                     lobes_arrival, meta)
    if lobes_departure is not None:
        lobe["asd"], lobe["zsd"] = _lobe_spread_pair(departure_by_index,
                                                     lobes_departure, meta)
    if lobe_spreads:
        unknown = set(lobe_spreads) - set(lobe)
        if unknown:
            raise ValueError(f"unknown lobe spread key(s): {sorted(unknown)}")
        for key, value in lobe_spreads.items():
            lobe[key] = float(value)

    return PointRecord(
        freq_ghz=meta.fc_ghz,
        tx=geometry.tx_id,
        rx=geometry.rx_id,
        loc=geometry.loc_condition,
        tr_sep_m=geometry.tr_sep_m,
        pl_db=_quantize_stat(pl_db),
        mean_dir_ds_ns=_quantize_stat(mean_dir_ds),
        omni_ds_ns=_quantize_stat(omni_ds),
        mean_lobe_asa_deg=_quantize_stat(lobe["asa"]),
        omni_asa_deg=_quantize_stat(asa),
        mean_lobe_asd_deg=_quantize_stat(lobe["asd"]),
        omni_asd_deg=_quantize_stat(asd),
        mean_lobe_zsa_deg=_quantize_stat(lobe["zsa"]),
        omni_zsa_deg=_quantize_stat(zsa),
        mean_lobe_zsd_deg=_quantize_stat(lobe["zsd"]),
        omni_zsd_deg=_quantize_stat(zsd),
    )
