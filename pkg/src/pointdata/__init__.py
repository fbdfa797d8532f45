"""Point-data tables for wireless propagation measurements.

One row per measured TX-RX location pair (path loss, delay spread, angular
spreads), one metadata record per campaign, and the operations needed to
validate, pool, fit, and derive them.
"""

from .analysis import (
    ABGFit,
    CIFit,
    EmpiricalCDF,
    LognormalStats,
    Split,
    empirical_cdf,
    fit_abg,
    fit_ci,
    lognormal_stats,
    scatter_data,
    select_split,
)
from .derivation import (
    AngleDomain,
    DirectionalProfile,
    PointGeometry,
    PowerAngularSpectrum,
    PowerDelayProfile,
    SweepSide,
    angular_spread,
    angular_spread_3gpp,
    angular_spread_fleury,
    apply_threshold_pdp,
    apply_threshold_pas,
    derive_point,
    load_direction_profile,
    path_loss_from_link_budget,
    rms_delay_spread,
    synthesize_omni,
)
from .errors import (
    AnalysisError,
    DegenerateSpectrum,
    DerivationError,
    DistanceBelowReference,
    EmptyAfterThreshold,
    EmptyInput,
    FormatError,
    HeaderMismatch,
    InvariantViolation,
    MissingMetadata,
    MissingRequired,
    NonPositiveFrequency,
    NonPositiveSample,
    NoPower,
    PointDataError,
    PoolBlocked,
    RankDeficient,
    UnitsMismatch,
    UnknownKey,
    ValueParseError,
)
from .ioformat import (
    CSV_DIALECT,
    JSON_DIALECT,
    METADATA_KEYS,
    POINT_COLUMNS,
    POINT_UNITS,
    DialectKind,
    FormatDialect,
    dialect_for_path,
    format_decimal,
    meta_path_for,
    parse_metadata,
    parse_metadata_document,
    parse_point_table,
    parse_threshold_text,
    read_campaign,
    render_threshold,
    write_campaign,
    write_metadata,
    write_point_table,
    write_pooled_table,
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
    PooledDataset,
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
from .pathloss import (
    SPEED_OF_LIGHT_M_S,
    ABGPathLossModel,
    CIPathLossModel,
    fspl_1m,
)
from .validation import (
    DEFAULT_POLICY,
    CompatPolicy,
    assess_pooling,
    pool,
    validate_campaign,
)

__version__ = "0.1.0"
