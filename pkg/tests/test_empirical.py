import gzip
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from volmodel import distributions as dist
from volmodel.distributions import ModelKind, ModelParams
from volmodel.empirical import (
    DegenerateSampleError,
    EmptyInputError,
    InsufficientSamplesError,
    SnapshotParseError,
    build_empirical,
    format_timestamp,
    load_snapshots,
    log_bin_edges,
    read_snapshots,
    volume_price,
)

HEADER = "timestamp,ticker,price,volume\n"


def write(tmp_path, body, name="snap.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


class TestVolumePrice:
    def test_examples(self):
        assert volume_price(10.0, 0) == 0.0
        assert volume_price(2.5, 100) == 250.0
        assert volume_price(31.07, 1200) == pytest.approx(37284.0, rel=1e-15)

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            volume_price(0.0, 10)
        with pytest.raises(ValueError):
            volume_price(1.0, -1)


class TestLoad:
    def test_single_window(self, tmp_path):
        p = write(tmp_path, "2011-01-03T14:30:00Z,A,1.5,100\n2011-01-03T14:30:00Z,B,2,10\n2011-01-03T14:30:00Z,C,3,7\n")
        windows = load_snapshots(p)
        assert len(windows) == 1
        assert sorted(windows[0].samples.tolist()) == [20.0, 21.0, 150.0]

    def test_window_boundary(self, tmp_path):
        rows = [f"2011-01-03T14:{m:02d}:00Z,T{m},1.0,{m + 1}\n" for m in range(20)]
        windows = load_snapshots(write(tmp_path, "".join(rows)), window_minutes=10)
        assert len(windows) == 2
        assert [len(w) for w in windows] == [10, 10]
        assert format_timestamp(windows[1].window_start) == "2011-01-03T14:10:00Z"

    def test_zero_volume_dropped(self, tmp_path):
        ingest = read_snapshots(write(tmp_path, "2011-01-03T14:30:00Z,A,10.0,0\n2011-01-03T14:30:00Z,B,2.5,100\n"))
        assert ingest.dropped == 1
        assert ingest.windows[0].samples.tolist() == [250.0]

    def test_latest_duplicate_wins(self, tmp_path):
        body = "2011-01-03T14:31:00Z,A,1,5\n2011-01-03T14:30:00Z,A,1,9\n2011-01-03T14:35:00Z,A,1,7\n"
        ingest = read_snapshots(write(tmp_path, body))
        assert ingest.duplicates == 2
        assert ingest.windows[0].samples.tolist() == [7.0]

    def test_gzip_and_offsets(self, tmp_path):
        p = tmp_path / "snap.csv.gz"
        with gzip.open(p, "wt") as fh:
            fh.write(HEADER + "2011-01-03T09:30:00-05:00,A,2,3\n")
        w = load_snapshots(p)
        assert format_timestamp(w[0].window_start) == "2011-01-03T14:30:00Z"

    @pytest.mark.parametrize(
        "body, line",
        [
            ("2011-01-03T14:30:00Z,A,1.0\n", 2),
            ("not-a-time,A,1.0,3\n", 2),
            ("2011-01-03T14:30:00Z,A,1.0,3\n2011-01-03T14:30:00Z,B,abc,3\n", 3),
            ("2011-01-03T14:30:00Z,,1.0,3\n", 2),
        ],
    )
    def test_parse_errors_name_line(self, tmp_path, body, line):
        with pytest.raises(SnapshotParseError) as err:
            load_snapshots(write(tmp_path, body))
        assert err.value.line == line
        assert "snap.csv" in str(err.value)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("time,sym,p,v\n")
        with pytest.raises(SnapshotParseError):
            load_snapshots(p)

    def test_empty_input(self, tmp_path):
        with pytest.raises(EmptyInputError):
            load_snapshots(write(tmp_path, "2011-01-03T14:30:00Z,A,1.0,0\n"))

    def test_deterministic(self, tmp_path):
        rng = np.random.default_rng(3)
        rows = "".join(
            f"2011-01-03T14:{m:02d}:00Z,T{i},{float(p)!r},{v}\n"
            for m in range(0, 30, 5)
            for i, (p, v) in enumerate(zip(rng.uniform(1, 50, 40), rng.integers(1, 1000, 40)))
        )
        p = write(tmp_path, rows)
        a, b = load_snapshots(p), load_snapshots(p)
        assert [w.window_start for w in a] == [w.window_start for w in b]
        assert all(np.array_equal(x.samples, y.samples) for x, y in zip(a, b))


class TestBuildEmpirical:
    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            build_empirical([1.0] * 50)

    def test_too_few(self):
        with pytest.raises(InsufficientSamplesError):
            build_empirical([1.0, 2.0, 3.0])

    def test_padded_median(self):
        emp = build_empirical([1.0, 2.0, 3.0, 4.0] * 8)
        assert emp.median == 2.5
        assert emp.ecdf_f.tolist() == [0.25, 0.5, 0.75, 1.0]

    def test_modal_bin_density(self):
        s = np.random.default_rng(42).lognormal(0.0, 1.0, 10_000)
        emp = build_empirical(s)
        i = int(np.argmax(emp.density))
        model = dist.pdf(ModelKind.LOGNORMAL, ModelParams(0.0, 1.0), emp.midpoints[i])
        assert abs(emp.density[i] / model - 1.0) < 0.10

    def test_bin_edges(self):
        e = log_bin_edges(1.0, 1000.0, 8)
        assert len(e) == 25
        assert e[0] == 1.0 and e[-1] == 1000.0
        np.testing.assert_allclose(np.diff(np.log10(e)), 1 / 8, rtol=1e-12)

    @given(st.lists(st.floats(1e-3, 1e9), min_size=32, max_size=300), st.integers(2, 12))
    def test_invariants(self, values, bpd):
        if min(values) == max(values):
            return
        emp = build_empirical(values, bpd)
        n = len(values)
        assert emp.n == n
        assert emp.counts.sum() == n
        assert np.sum(emp.density * emp.widths) == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(emp.edges) > 0)
        assert emp.ecdf_f[-1] == 1.0 and np.all(emp.ecdf_f > 0) and np.all(np.diff(emp.ecdf_f) > 0)
        steps = np.diff(np.concatenate([[0.0], emp.ecdf_f])) * n
        np.testing.assert_allclose(steps, np.rint(steps), atol=1e-9)
        if len(emp.ecdf_s) >= 3:
            emp.validate()

    @given(st.lists(st.floats(1e-3, 1e6), min_size=32, max_size=100), st.randoms())
    def test_median_permutation_invariant(self, values, rnd):
        if min(values) == max(values):
            return
        shuffled = list(values)
        rnd.shuffle(shuffled)
        assert build_empirical(values).median == build_empirical(shuffled).median
        assert math.isfinite(build_empirical(values).median)
