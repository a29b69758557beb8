import json

import pytest

from smartirr.store import (
    CSV_HEADER,
    DecisionRecord,
    SensorReading,
    TelemetryStore,
    ValidationError,
    format_number,
)


def reading(ts=1000, h=78, t=9, s=485, r=1, node="n1"):
    return SensorReading(ts, node, h, t, s, r)


class TestValidation:
    def test_table_row_accepted(self):
        r = reading()
        assert r.payload() == "78,9,485,1"

    def test_out_of_range_soil_rejected(self):
        with pytest.raises(ValidationError):
            reading(s=2000)

    @pytest.mark.parametrize("kw", [{"h": 101}, {"h": -1}, {"t": 51}, {"r": 2}])
    def test_other_ranges(self, kw):
        with pytest.raises(ValidationError):
            reading(**kw)

    def test_decision_value_checked(self):
        with pytest.raises(ValidationError):
            DecisionRecord(1000, reading(), 2, "model")

    def test_format_number(self):
        assert format_number(78.0) == "78"
        assert format_number(25.5) == "25.5"


class TestAppend:
    def test_first_seq_is_one(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            assert store.append(reading()) == 1

    def test_sequence_is_monotone(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            assert store.append(reading()) == 1
            assert store.append(reading(ts=2000)) == 2

    def test_sequence_shared_across_kinds(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            r = reading()
            assert store.append(r) == 1
            assert store.append(DecisionRecord(1500, r, 0, "model")) == 2
            assert store.append(reading(ts=3000)) == 3

    def test_invalid_record_rejected(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            with pytest.raises(ValidationError):
                store.append("not a record")

    def test_reopen_reproduces_sequence(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            for i in range(5):
                store.append(reading(ts=1000 + i))
        with TelemetryStore(tmp_path) as store:
            got = store.readings()
            assert [r.timestamp for r in got] == [1000 + i for i in range(5)]
            assert store.append(reading(ts=9999)) == 6

    def test_files_follow_store_layout(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            store.append(reading())
            store.append(DecisionRecord(1500, reading(), 0, "model"))
        names = sorted(p.name for p in tmp_path.glob("*.log"))
        assert names == ["decisions-2.log", "readings-1.log"]
        line = (tmp_path / "readings-1.log").read_text().splitlines()[0]
        assert json.loads(line)["seq"] == 1


class TestQueryRange:
    def test_orders_by_timestamp_then_seq(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            store.append(reading(ts=3000))
            store.append(reading(ts=1000))  # late arrival
            store.append(reading(ts=2000))
            got = store.query_range(0, 10_000)
            assert [r.timestamp for r in got] == [1000, 2000, 3000]

    def test_empty_range(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            store.append(reading(ts=1000))
            assert store.query_range(1000, 1000) == []
            assert store.query_range(5000, 1000) == []

    def test_half_open_interval(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            store.append(reading(ts=1000))
            store.append(reading(ts=2000))
            got = store.query_range(1000, 2000)
            assert [r.timestamp for r in got] == [1000]

    def test_union_property_no_duplicates(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            for i in range(20):
                store.append(reading(ts=100 * (i % 7), h=i % 100))
            left = store.query_range(0, 300)
            right = store.query_range(300, 10_000)
            union = store.query_range(0, 10_000)
            assert left + right == union

    def test_segmented_store_matches_single_segment(self, tmp_path):
        rows = [reading(ts=1000 * i, h=i % 100) for i in range(50)]
        with TelemetryStore(tmp_path / "small", segment_bytes=256) as segmented:
            for r in rows:
                segmented.append(r)
            seg_files = list((tmp_path / "small").glob("readings-*.log"))
            assert len(seg_files) > 1, "test should force several segments"
            got_seg = segmented.query_range(7_000, 31_000)
        with TelemetryStore(tmp_path / "big") as plain:
            for r in rows:
                plain.append(r)
            got_plain = plain.query_range(7_000, 31_000)
        assert got_seg == got_plain


class TestExport:
    def test_single_reading_oracle_label(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            store.append(reading())  # 78,9,485,1 -> raining, do not irrigate
            result = store.export_training_csv(0, 10_000, "oracle")
        assert result.csv.splitlines() == [CSV_HEADER, "78,9,485,1,0"]
        assert result.rows == 1

    def test_empty_range_header_only(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            result = store.export_training_csv(0, 10, "oracle")
        assert result.csv == CSV_HEADER + "\n"
        assert result.rows == 0

    def test_decision_join_within_window(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            r1 = reading(ts=10_000)
            store.append(r1)
            store.append(DecisionRecord(40_000, r1, 1, "model"))  # 30 s later
            r2 = reading(ts=500_000)
            store.append(r2)  # no decision anywhere near
            result = store.export_training_csv(0, 600_000, "decisions")
        assert result.rows == 1
        assert result.skipped == 1
        assert result.csv.splitlines()[1].endswith(",1")

    def test_decision_join_prefers_nearest(self, tmp_path):
        with TelemetryStore(tmp_path) as store:
            r = reading(ts=100_000)
            store.append(r)
            store.append(DecisionRecord(50_000, r, 1, "model"))  # 50 s before
            store.append(DecisionRecord(110_000, r, 0, "model"))  # 10 s after
            result = store.export_training_csv(0, 200_000, "decisions")
        assert result.csv.splitlines()[1].endswith(",0")

    def test_simulated_readings_export(self, tmp_path):
        from smartirr.fieldsim import SimConfig, simulate_readings

        rows = simulate_readings(SimConfig(seed=5), n=200, seed=5)
        with TelemetryStore(tmp_path) as store:
            for r in rows:
                store.append(r)
            result = store.export_training_csv(0, 2**62, "oracle")
        lines = result.csv.splitlines()
        assert len(lines) == 201
        labels = {ln.rsplit(",", 1)[1] for ln in lines[1:]}
        assert labels <= {"0", "1"}
        assert len(labels) == 2, "simulator should produce both classes"
