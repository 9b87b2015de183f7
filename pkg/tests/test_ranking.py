from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from volmodel.distributions import ModelKind, ModelParams
from volmodel.divergence import DistanceReport
from volmodel.empirical import WindowSnapshot, build_empirical
from volmodel.fitting import fit_cdf
from volmodel.pipeline import RunConfig, process_windows
from volmodel.ranking import (
    EmptyRankingError,
    KINDS,
    MissingModelError,
    aggregate,
    export_series,
    histogram,
    matrix_from_ranks,
    rank_distances,
    rank_window,
    ranking_table,
    read_table,
)
from volmodel.synth import sample

T0 = datetime(2011, 1, 3, 14, 30, tzinfo=timezone.utc)
distances = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=4, max_size=4)


def reports(values, variant="standard", start=T0):
    out = []
    for kind, v in zip(KINDS, values):
        std, tail = (v, 0.0) if variant == "standard" else (0.0, v)
        out.append(DistanceReport(start, kind, std, tail, 5, 3))
    return out


def ranks_of(values, variant="standard"):
    ranked = rank_window(reports(values, variant), variant)
    return [next(r.rank for r in ranked if r.kind == k) for k in KINDS]


class TestRankWindow:
    def test_examples(self):
        assert ranks_of([0.1, 0.2, 0.3, 0.4]) == [1, 2, 3, 4]
        assert ranks_of([0.7] * 4) == [1, 2, 3, 4]
        assert ranks_of([0.3, 0.05, 0.2, 0.1]) == [4, 1, 3, 2]
        assert rank_distances([0.3, 0.05, 0.2, 0.1]) == [4, 1, 3, 2]

    def test_absolute_value_key(self):
        assert ranks_of([-0.05, 0.1, -0.2, 0.3], "tail") == [1, 2, 3, 4]

    def test_missing_model(self):
        with pytest.raises(MissingModelError):
            rank_window(reports([0.1, 0.2, 0.3, 0.4])[:3])
        with pytest.raises(MissingModelError):
            rank_window(reports([0.1, 0.2, 0.3, 0.4])[:3] + reports([0.1] * 4)[:1])

    @given(distances)
    def test_rank_invariants(self, values):
        ranks = ranks_of(values)
        assert sorted(ranks) == [1, 2, 3, 4]
        best = ranks.index(1)
        assert abs(values[best]) == min(abs(v) for v in values)

    @given(distances, st.floats(1e-3, 1e3))
    def test_rescaling_invariance(self, values, c):
        scaled = [v * c for v in values]
        if len({abs(v) for v in scaled}) < len({abs(v) for v in values}):
            return  # rescaling collapsed two values into a tie
        assert ranks_of(scaled) == ranks_of(values)


class TestAggregate:
    def test_single_window(self):
        m = aggregate([rank_window(reports([0.3, 0.05, 0.2, 0.1]))])
        assert m[int(ModelKind.INVERSE_GAMMA), 0] == 100.0
        assert np.all(np.isin(m, [0.0, 100.0]))

    def test_reversed_windows(self):
        a = rank_window(reports([0.1, 0.2, 0.3, 0.4]))
        b = rank_window(reports([0.4, 0.3, 0.2, 0.1]))
        m = aggregate([a, b])
        expected = np.array([[50, 0, 0, 50], [0, 50, 50, 0], [0, 50, 50, 0], [50, 0, 0, 50]], dtype=float)
        np.testing.assert_array_equal(m, expected)

    def test_empty(self):
        with pytest.raises(EmptyRankingError):
            aggregate([])

    @given(st.lists(distances, min_size=1, max_size=20), st.randoms())
    def test_rows_sum_and_permutation(self, windows, rnd):
        ranked = [rank_window(reports(v)) for v in windows]
        m = aggregate(ranked)
        np.testing.assert_allclose(m.sum(axis=1), 100.0, atol=1e-9)
        np.testing.assert_allclose(m.sum(axis=0), 100.0, atol=1e-9)
        shuffled = list(ranked)
        rnd.shuffle(shuffled)
        np.testing.assert_allclose(aggregate(shuffled), m, atol=1e-12)

    def test_ranking_table(self):
        t = ranking_table([(T0, reports([0.2, 0.1, 0.3, 0.4]))], "standard")
        assert t.windows[0][1][0].kind == ModelKind.INVERSE_GAMMA
        assert t.matrix[1, 0] == 100.0


class TestHistogram:
    def test_identical_values(self):
        counts, edges = histogram([2.5] * 10, bins=64)
        assert np.count_nonzero(counts) == 1 and counts.sum() == 10 and len(edges) == 65

    def test_non_finite_dropped(self):
        counts, _ = histogram([1.0, np.inf, 2.0, np.nan], bins=4)
        assert counts.sum() == 2
        assert histogram([np.inf])[0].size == 0


def small_run(windows=3, n=400, kind=ModelKind.LOGNORMAL, params=(0.0, 1.0)):
    snaps = [
        WindowSnapshot(T0 + timedelta(minutes=10 * w), sample(kind, ModelParams(*params), n, seed=w))
        for w in range(windows)
    ]
    return process_windows(snaps, RunConfig(jobs=1))


class TestExport:
    def test_single_window_series(self, tmp_path):
        results = small_run(1)
        export_series(results, tmp_path)
        for kind in KINDS:
            header, rows = read_table(tmp_path / f"params_{kind.slug}.csv")
            assert header == ["window_start", "phi", "theta", "sse", "n_eval", "converged"]
            assert len(rows) == 1
        _, ranks = read_table(tmp_path / "ranks_standard.csv")
        m = matrix_from_ranks(ranks)
        assert sorted(m.max(axis=1).tolist()) == [100.0] * 4

    def test_round_trip_exact(self, tmp_path):
        results = small_run(3)
        export_series(results, tmp_path)
        for kind in KINDS:
            _, rows = read_table(tmp_path / f"params_{kind.slug}.csv")
            for res, row in zip(results, rows):
                assert float(row[1]) == res.fits[kind].params.phi
                assert float(row[2]) == res.fits[kind].params.theta
            _, errs = read_table(tmp_path / f"errors_{kind.slug}.csv")
            assert [float(r[1]) for r in errs] == [res.fits[kind].rel_err_phi for res in results]
        _, dist_rows = read_table(tmp_path / "dist_tail.csv")
        for res, row in zip(results, dist_rows):
            assert [float(x) for x in row[1:]] == [res.reports[k].d_tail for k in KINDS]

    def test_histogram_files(self, tmp_path):
        export_series(small_run(2), tmp_path, hist_bins=8)
        header, rows = read_table(tmp_path / "hist_distances.csv")
        assert header == ["model", "variant", "bin_left", "bin_right", "count"]
        assert len(rows) == 4 * 2 * 8
        _, rows = read_table(tmp_path / "hist_errors.csv")
        assert sum(int(r[4]) for r in rows if r[0] == "Gamma" and r[1] == "rel_err_phi") == 2

    def test_io_error_names_path(self, tmp_path):
        target = tmp_path / "file"
        target.write_text("x")
        with pytest.raises(OSError, match="file"):
            export_series(small_run(1), target / "sub")

    def test_parameter_series_centred_on_truth(self):
        truth = ModelParams(1.0, 0.7)
        fits = [
            fit_cdf(ModelKind.LOGNORMAL, build_empirical(sample(ModelKind.LOGNORMAL, truth, 2000, seed=w)))
            for w in range(200)
        ]
        for values, want in (
            (np.array([f.params.phi for f in fits]), truth.phi),
            (np.array([f.params.theta for f in fits]), truth.theta),
        ):
            se = values.std(ddof=1) / np.sqrt(len(values))
            assert abs(values.mean() - want) < 2 * se
