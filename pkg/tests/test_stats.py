import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xfiles.probe import ProbeSample, parse_log, synth_samples
from xfiles.stats import (
    EmptyInputError,
    StatsSummary,
    VarianceUndefinedError,
    gamma_fit,
    histogram,
    render_series,
    render_vfstat,
    split_series,
    stars,
    summarize,
    vfstat,
    write_series,
)

UTC = timezone.utc
durations_st = st.lists(st.floats(0, 1e4, allow_nan=False, allow_infinity=False), min_size=2,
                        max_size=200)


def test_summarize_small():
    s = summarize([1, 2, 3])
    assert (s.n, s.mean, s.var, s.sdev, s.cov) == (3, 2, 1, 1, 0.5)
    assert (s.minm, s.maxm) == (1, 3)
    assert s.mdev == 1.0  # |1-2|, |2-2|, |3-2| -> median 1


def test_summarize_constant():
    s = summarize([5, 5, 5, 5])
    assert s.var == 0 and s.cov == 0 and s.mdev == 0
    assert s.gam_a is None and s.gam_b is None


def test_summarize_errors():
    with pytest.raises(EmptyInputError):
        summarize([])
    with pytest.raises(VarianceUndefinedError):
        summarize([1.0])
    with pytest.raises(ValueError):
        summarize([1.0, -2.0])


def test_published_moments_are_consistent():
    s = StatsSummary.from_moments(728, 5.69, 14.26, 773.94, 811.65, 4.35)
    assert s.sdev == pytest.approx(28.49, abs=0.005)
    assert s.cov == pytest.approx(2.00, abs=0.005)
    assert s.long_tail
    assert s.maxm / s.mean > 10


@given(durations_st)
def test_summary_identities(xs):
    s = summarize(xs)
    assert s.minm <= s.mean <= s.maxm
    assert math.isclose(math.sqrt(s.var), s.sdev, rel_tol=1e-9, abs_tol=1e-12)
    if s.mean > 0:
        assert math.isclose(s.cov * s.mean, s.sdev, rel_tol=1e-9, abs_tol=1e-12)
    if s.gam_a is not None:
        assert math.isclose(s.gam_a * s.gam_b, s.mean, rel_tol=1e-9)
        assert math.isclose(s.gam_a * s.gam_b**2, s.var, rel_tol=1e-9)


@pytest.mark.parametrize("mean,var,shape,scale", [
    (14.26, 811.65, 0.25, 56.92),
    (1, 1, 1, 1),
    (10, 25, 4, 2.5),
])
def test_gamma_fit(mean, var, shape, scale):
    a, b = gamma_fit(mean, var)
    assert round(a, 2) == shape and round(b, 2) == scale


@pytest.mark.parametrize("mean,var", [(0, 1), (1, 0), (-1, 2)])
def test_gamma_fit_rejects(mean, var):
    with pytest.raises(ValueError):
        gamma_fit(mean, var)


def test_gamma_round_trip_recovers_parameters():
    for k, theta, seed in [(0.25, 56.92, 3), (4.0, 2.5, 4)]:
        d = [s.duration for s in synth_samples(k, theta, 100_000, seed=seed)]
        s = summarize(d)
        assert s.gam_a == pytest.approx(k, rel=0.05)
        assert s.gam_b == pytest.approx(theta, rel=0.05)


def test_histogram_hand_bucketing():
    h = histogram([5.69, 7, 7, 10, 14], 3)
    assert [(b.lower, b.upper, b.count) for b in h.buckets] == [
        (0, 3, 0), (3, 6, 1), (6, 9, 2), (9, 12, 1), (12, 15, 1)]


def test_histogram_boundary_and_empty():
    h = histogram([6.0], 3)
    assert h.buckets[-1].lower == 6 and h.buckets[-1].count == 1
    e = histogram([], 3)
    assert e.n == 0 and all(b.count == 0 for b in e.buckets)
    with pytest.raises(ValueError):
        histogram([1.0], 0)


def _brute_force_counts(xs, w):
    counts = {}
    for x in xs:
        k = 0
        while not (k * w <= x < (k + 1) * w):
            k += 1
        counts[k] = counts.get(k, 0) + 1
    return counts


@given(st.lists(st.floats(0, 500, allow_nan=False), max_size=100),
       st.sampled_from([0.1, 0.5, 1.0, 3.0, 7.5]))
def test_histogram_conserves_and_matches_brute_force(xs, w):
    h = histogram(xs, w)
    assert h.n == len(xs)
    got = {k: b.count for k, b in enumerate(h.buckets) if b.count}
    assert got == _brute_force_counts(xs, w)


def test_star_rounding():
    assert stars(1, 20) == 5
    assert stars(1, 200) == 1   # 0.5% rounds half up
    assert stars(1, 201) == 0
    assert stars(0, 0) == 0


def test_render_single_sample_caps_with_marker():
    xs = [4.0, 4.0]
    s = summarize(xs)
    text = render_vfstat("appX", "x.log", s, histogram(xs))
    row = [l for l in text.splitlines() if l.strip().startswith("3-")][0]
    assert row.endswith("*" * 50 + ">")


def test_render_one_in_twenty_is_five_stars():
    xs = [1.0] * 19 + [10.0]
    text = render_vfstat("appX", "x.log", summarize(xs), histogram(xs))
    row = [l for l in text.splitlines() if l.strip().startswith("9-12")][0]
    assert row.split("|")[1].strip() == "*****"


def test_render_header_lines_match_layout():
    s = StatsSummary.from_moments(728, 5.69, 14.26, 773.94, 811.65, 4.35)
    h = histogram([5.69, 7, 7, 10, 14])
    text = render_vfstat("AppA", "bench.log.x", s, h)
    lines = text.splitlines()
    assert lines[0] == 'AppA Stats for 728 samples in "bench.log.x"'
    assert lines[1] == "====="
    assert lines[2] == "Minm:   5.69      Mean:  14.26      Maxm:  773.94      MDev:   4.35"
    assert lines[3] == "Var:   811.65     SDev:  28.49      COV:    2.00"
    assert "GamA:   0.25" in lines[4] and "GamB:  56.92" in lines[4]
    assert "long" in lines[5]
    assert lines[6].split("|")[1].split() == [f"{p}%" for p in range(5, 55, 5)]
    bar_col = lines[6].index("|")
    assert set(lines[7]) == {"-", "+"} and lines[7][bar_col] == "+"
    # ticks sit under the last star of each 5% band
    assert [i - bar_col - 1 for i, c in enumerate(lines[7]) if c == "+"][1:] == list(range(5, 55, 5))
    assert lines[8].strip().startswith("< 3 |")


def test_no_long_tail_flag_for_tight_data():
    xs = [10, 11, 12, 9, 10]
    assert "long" not in render_vfstat("a", "b", summarize(xs), histogram(xs))


def test_render_is_pure():
    xs = [s.duration for s in synth_samples(2, 3, 300, seed=5)]
    a = render_vfstat("a", "b", summarize(xs), histogram(xs))
    b = render_vfstat("a", "b", summarize(list(xs)), histogram(list(xs)))
    assert a == b


def test_vfstat_filters_app_and_failures():
    t = datetime(1999, 6, 1, tzinfo=UTC)
    samples = [ProbeSample(t, "appA", 5.0), ProbeSample(t, "appA", 7.0),
               ProbeSample(t, "appA", 999.0, "timeout"), ProbeSample(t, "appB", 1.0)]
    assert "for 2 samples" in vfstat(samples, "appA", "x")
    assert "for 3 samples" in vfstat(samples, "appA", "x", include_failed=True)
    with pytest.raises(EmptyInputError):
        vfstat(samples, "appZ", "x")


def _cycle_log():
    t = datetime(1999, 6, 1, 17, 0, tzinfo=UTC)
    lines = []
    for c in range(2):
        for i, app in enumerate(["appA", "appB", "appC"]):
            ts = t + timedelta(minutes=15 * c, seconds=20 * i)
            lines.append(f"{ts:%Y-%m-%dT%H:%M:%SZ}\t{app}\t{10 + c + i:.2f}\tok")
    return lines


def test_split_series_grouping():
    samples, _ = parse_log(_cycle_log())
    series = split_series(samples)
    assert [s.app for s in series] == ["appA", "appB", "appC"]
    assert all(len(s.points) == 2 for s in series)
    for s in series:
        ts = [p[0] for p in s.points]
        assert ts == sorted(ts) and len(set(ts)) == len(ts)


def test_split_series_keeps_spike_verbatim():
    lines = _cycle_log() + ["1999-06-01T18:22:00Z\tappC\t773.94\tok"]
    series = {s.app: s for s in split_series(parse_log(lines)[0])}
    spike = datetime(1999, 6, 1, 18, 22, tzinfo=UTC)
    assert (spike, 773.94) in series["appC"].points
    assert f"{int(spike.timestamp())} 773.94" in render_series(series["appC"])


def test_split_series_skips_malformed(tmp_path):
    lines = [f"1999-06-01T17:{m:02d}:00Z\tappA\t{m}.00\tok" for m in range(9)]
    lines.insert(4, "1999-06-01T17:99:00Z\tappA\toops")
    samples, problems = parse_log(lines)
    assert len(problems) == 1 and problems[0][0] == 5
    series = split_series(samples)
    assert len(series[0].points) == 9
    paths = write_series(series, tmp_path / "out")
    rows = paths[0].read_text().splitlines()
    assert len(rows) == 9 and rows[0] == "928256400 0.00"
