from decimal import Decimal

import pytest

from pointdata import (
    AsDefinition,
    Campaign,
    CompatFinding,
    Environment,
    InvariantViolation,
    LocCondition,
    MetadataRecord,
    Mobility,
    MobilityKind,
    PointRecord,
    PooledDataset,
    Severity,
    ThresholdCombine,
    ThresholdRule,
)

D = Decimal


def make_point(**overrides) -> PointRecord:
    base = dict(
        freq_ghz=D("142"),
        tx="TX1",
        rx="RX1",
        loc=LocCondition.LOS,
        tr_sep_m=D("24.43"),
        pl_db=D("102.6"),
        mean_dir_ds_ns=D("50.8"),
        omni_ds_ns=D("15.7"),
        mean_lobe_asa_deg=D("2.3"),
        omni_asa_deg=D("21.2"),
        mean_lobe_asd_deg=D("2.8"),
        omni_asd_deg=D("20.1"),
        mean_lobe_zsa_deg=D("3.1"),
        omni_zsa_deg=D("5.4"),
        mean_lobe_zsd_deg=D("3.2"),
        omni_zsd_deg=D("3.3"),
    )
    base.update(overrides)
    return PointRecord(**base)


def make_metadata(**overrides) -> MetadataRecord:
    base = dict(env=Environment.UMI, fc_ghz=D("142"))
    base.update(overrides)
    return MetadataRecord(**base)


class TestPointRecord:
    def test_valid_row_constructs(self):
        p = make_point()
        assert p.pair == ("TX1", "RX1")
        assert p.loc is LocCondition.LOS

    def test_loc_accepts_canonical_string(self):
        p = make_point(loc="NLOS")
        assert p.loc is LocCondition.NLOS

    def test_float_rejected(self):
        """Floats would silently destroy the verbatim round-trip guarantee."""
        with pytest.raises(InvariantViolation) as err:
            make_point(pl_db=102.6)
        assert err.value.field == "pl_db"

    def test_bool_rejected(self):
        with pytest.raises(InvariantViolation):
            make_point(freq_ghz=True)

    @pytest.mark.parametrize("name", ["freq_ghz", "tr_sep_m", "pl_db"])
    def test_positive_fields(self, name):
        with pytest.raises(InvariantViolation):
            make_point(**{name: D("0")})
        with pytest.raises(InvariantViolation):
            make_point(**{name: D("-1")})

    def test_spreads_may_be_zero_but_not_negative(self):
        make_point(omni_ds_ns=D("0"))
        with pytest.raises(InvariantViolation):
            make_point(omni_ds_ns=D("-0.1"))

    def test_azimuth_spread_capped_at_180(self):
        make_point(omni_asa_deg=D("180"))
        with pytest.raises(InvariantViolation):
            make_point(omni_asa_deg=D("180.1"))

    def test_zenith_spread_capped_at_90(self):
        make_point(omni_zsa_deg=D("90"))
        with pytest.raises(InvariantViolation):
            make_point(omni_zsd_deg=D("90.01"))

    def test_nan_rejected(self):
        with pytest.raises(InvariantViolation):
            make_point(pl_db=D("NaN"))

    def test_empty_station_id_rejected(self):
        with pytest.raises(InvariantViolation):
            make_point(tx="  ")

    def test_frozen(self):
        p = make_point()
        with pytest.raises(AttributeError):
            p.pl_db = D("1")


class TestThresholdRule:
    def test_needs_at_least_one_component(self):
        with pytest.raises(InvariantViolation):
            ThresholdRule()

    def test_components_must_be_positive(self):
        with pytest.raises(InvariantViolation):
            ThresholdRule(rel_peak_db=D("0"))
        with pytest.raises(InvariantViolation):
            ThresholdRule(gate_ns=D("-5"))

    def test_defaults(self):
        r = ThresholdRule(rel_peak_db=D("25"), above_noise_db=D("5"))
        assert r.combine is ThresholdCombine.MAX_OF
        assert r.gate_ns is None


class TestMobility:
    def test_static_carries_no_speed(self):
        with pytest.raises(InvariantViolation):
            Mobility(kind=MobilityKind.STATIC, speed_mps=D("1.5"))

    def test_mobile_with_trajectory(self):
        m = Mobility(
            kind=MobilityKind.MOBILE,
            speed_mps=D("1.5"),
            trajectory=((D("0"), D("0"), D("0")), (D("3"), D("0"), D("2"))),
        )
        assert len(m.trajectory) == 2

    def test_bad_waypoint_arity(self):
        with pytest.raises(InvariantViolation):
            Mobility(kind=MobilityKind.MOBILE, trajectory=((D("0"), D("0")),))


class TestMetadataRecord:
    def test_minimal(self):
        m = make_metadata()
        assert m.env is Environment.UMI
        assert m.pl_kind == "unspecified"
        assert m.as_def is None

    def test_fc_required_positive(self):
        with pytest.raises(InvariantViolation):
            make_metadata(fc_ghz=D("-142"))

    def test_hpbw_range(self):
        make_metadata(hpbw_tx_deg=D("359.9"))
        with pytest.raises(InvariantViolation):
            make_metadata(hpbw_tx_deg=D("360"))
        with pytest.raises(InvariantViolation):
            make_metadata(hpbw_rx_deg=D("0"))

    def test_sll_cannot_be_positive(self):
        make_metadata(sll_db=D("-11"))
        make_metadata(sll_db=D("0"))
        with pytest.raises(InvariantViolation):
            make_metadata(sll_db=D("3"))

    def test_as_def_from_string(self):
        m = make_metadata(as_def="3GPP")
        assert m.as_def is AsDefinition.TGPP

    def test_composite_type_checked(self):
        with pytest.raises(InvariantViolation):
            make_metadata(t_pdp="25 dB below peak")


class TestCampaign:
    def test_split(self):
        camp = Campaign(
            institution="NYU",
            campaign_id="c1",
            metadata=make_metadata(),
            points=(make_point(), make_point(rx="RX2", loc="NLOS")),
        )
        assert len(camp.split(LocCondition.LOS)) == 1
        assert len(camp.split("NLOS")) == 1

    def test_duplicate_pair_constructible(self):
        # Cross-record rules are validation findings, not constructor errors:
        # a broken campaign must load so the CLI can report and exit 1.
        camp = Campaign(
            institution="NYU",
            campaign_id="c1",
            metadata=make_metadata(),
            points=(make_point(), make_point()),
        )
        assert len(camp.points) == 2

    def test_freq_mismatch_constructible(self):
        camp = Campaign(
            institution="NYU",
            campaign_id="c1",
            metadata=make_metadata(fc_ghz=D("28")),
            points=(make_point(freq_ghz=D("142")),),
        )
        assert camp.points[0].freq_ghz == 142


class TestFindings:
    def test_severity_order_and_strings(self):
        assert Severity.INFO < Severity.WARN < Severity.BLOCK
        assert [str(s) for s in Severity] == ["Info", "Warn", "Block"]

    def test_to_json_dict(self):
        f = CompatFinding(
            severity=Severity.WARN,
            code="AS_DEF_MISMATCH",
            message="angular-spread definitions differ",
            field="as_def",
            campaigns=("a", "b"),
        )
        d = f.to_json_dict()
        assert d["severity"] == "Warn"
        assert d["campaigns"] == ["a", "b"]

    def test_pool_provenance_must_align(self):
        camp = Campaign(institution="NYU", campaign_id="c1",
                        metadata=make_metadata(), points=(make_point(),))
        with pytest.raises(InvariantViolation):
            PooledDataset(campaigns=(camp,), points=camp.points, provenance=())
        with pytest.raises(InvariantViolation):
            PooledDataset(campaigns=(camp,), points=camp.points, provenance=("other",))

    def test_pool_worst_severity(self):
        camp = Campaign(institution="NYU", campaign_id="c1",
                        metadata=make_metadata(), points=())
        pool = PooledDataset(campaigns=(camp,), points=(), provenance=())
        assert pool.worst_severity is None
