"""The thirteen acceptance criteria, one test each.

Each test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Run directly with ``python tests/test_acceptance.py``.
"""

import math
import random
import statistics
from pathlib import Path

import pytest

from netutil import CaptureBin, NullSink, StreamServer, exchange
from xfiles.fontmodel import FontModel, TableRow, compare, log_ratio, predict
from xfiles.load import (
    BoundsFit, MvaModel, escalation_detect, find_exceedance, knee, mva, mva_curve, nfs_headroom,
)
from xfiles.probe import read_log, synth_samples
from xfiles.stats import StatsSummary, gamma_fit, summarize, vfstat
from xfiles.xtrace import (
    CaptureRecord, Relay, decode, font_report, match_latencies, overhead_probe, parse_capture,
)
from xfiles.xtrace import protocol as xp
from xfiles.xtrace.fakes import FakeXClient, FakeXServer

GOLDEN = Path(__file__).parent / "golden"


def test_01_gamma_fit_golden(verdict):
    shape, scale = gamma_fit(14.26, 811.65)
    ok = abs(shape - 0.25) <= 0.005 and abs(scale - 56.92) <= 0.01
    verdict(1, "gamma fit of mean 14.26, var 811.65", ok, f"shape {shape:.4f}, scale {scale:.3f}")


def test_02_moment_consistency(verdict):
    s = StatsSummary.from_moments(728, 5.69, 14.26, 773.94, 811.65, 4.35)
    ok = abs(s.sdev - 28.49) <= 0.005 and abs(s.cov - 2.00) <= 0.005
    verdict(2, "SDev and COV from published variance", ok, f"SDev {s.sdev:.4f}, COV {s.cov:.4f}")


def test_03_font_table(verdict):
    rows = [TableRow("Rz2", 109, 9.41, baseline=True), TableRow("Rz1", 4781, 17.01),
            TableRow("Rfs1", 8371, 18.57), TableRow("Rfs2", 7113, 16.72)]
    entries = compare(FontModel(9.41, 109), rows)
    models = [e.model for e in entries]
    errors = [e.error for e in entries]
    ok = all(abs(m - w) <= 0.01 for m, w in zip(models, [9.41, 16.99, 18.12, 17.79]))
    ok = ok and errors[0] is None
    ok = ok and all(abs(e - w) <= 0.05 for e, w in zip(errors[1:], [-0.09, -2.50, 6.02]))
    detail = ", ".join(f"{m:.3f}" for m in models) + " / " + \
        ", ".join("N/A" if e is None else f"{e:+.3f}" for e in errors)
    verdict(3, "font model table reproduction", ok, detail)


def test_04_log_ratio(verdict):
    ratio = log_ratio(1000, 100)
    via_predict = predict(FontModel(1.0, 100), 1000)
    verdict(4, "1000 vs 100 fonts ratio", ratio == 1.5 and via_predict == 1.5, repr(ratio))


def test_05_statistical_round_trip(verdict):
    durations = [s.duration for s in synth_samples(0.25, 56.92, 100_000, seed=1999)]
    s = summarize(durations)
    ok = (abs(s.mean / 14.23 - 1) <= 0.02 and abs(s.cov / 2.0 - 1) <= 0.02
          and abs(s.gam_a / 0.25 - 1) <= 0.05 and abs(s.gam_b / 56.92 - 1) <= 0.05)
    verdict(5, "gamma sample round trip (1e5, seed 1999)", ok,
            f"mean {s.mean:.3f}, COV {s.cov:.4f}, shape {s.gam_a:.4f}, scale {s.gam_b:.3f}")


def test_06_mva_oracle(verdict):
    r4 = mva(MvaModel([1.0], 1.0), 4)[-1].response
    linear = all(p.response == p.n for p in mva(MvaModel([1.0]), 100))
    rng = random.Random(6)
    worst_balance, worst_bound = 0.0, 0.0
    for _ in range(200):
        model = MvaModel([rng.uniform(0.01, 5) for _ in range(rng.randint(1, 6))], rng.uniform(0, 30))
        for p in mva(model, 100):
            worst_balance = max(worst_balance, abs(p.throughput * (p.response + model.think_time) - p.n))
            floor = max(model.total_demand, p.n * model.d_max - model.think_time)
            worst_bound = max(worst_bound, (floor - p.response) / max(1.0, floor))
    ok = r4 == 3.0625 and linear and worst_balance <= 1e-9 and worst_bound <= 1e-9
    verdict(6, "MVA exact values, flow balance and bounds", ok,
            f"R(4)={r4}, max balance error {worst_balance:.1e}, max bound violation {worst_bound:.1e}")


def test_07_knee_and_exceedance(verdict):
    _, whole = knee(BoundsFit(12, 2, 2))
    clean = MvaModel([2.0] * 6, 2.0)
    fit = BoundsFit.from_model(clean)
    paged = mva_curve(MvaModel(clean.demands, 2.0, 20, 5.0), 40)
    hit = find_exceedance(paged, fit)
    miss = find_exceedance(mva_curve(clean, 40), fit)
    verdict(7, "knee 7, exceedance 21 with paging, none without", whole == 7 and hit == 21 and miss is None,
            f"knee {whole}, paged {hit}, clean {miss}")


def test_08_escalation(verdict):
    shaped = {"ogl": [(5, 0.6), (10, 0.7), (15, 0.8), (20, 9.5), (25, 11.0)],
              "menu": [(5, 0.2), (10, 0.2), (15, 0.3), (20, 0.3)]}
    flags, _ = escalation_detect(shaped, 10)
    flat, _ = escalation_detect({"flat": [(n, 1.0) for n in range(5, 30, 5)]}, 10)
    verdict(8, "order-of-magnitude escalation detector", flags == [("ogl", 20)] and flat == [],
            f"flags {flags}")


def test_09_headroom(verdict):
    rates = [("read", 20.0), ("lookup", 11.7), ("getattr", 3.5), ("readlink", 3.3),
             ("write", 0.0), ("create", 0.0)]
    pct = {cap: 100 * nfs_headroom(rates, cap).utilization for cap in (300, 3000, 12000)}
    total = nfs_headroom(rates, 300).total
    ok = abs(total - 38.5) < 1e-9 and all(abs(pct[c] - w) <= 0.01 for c, w in
                                          [(300, 12.83), (3000, 1.28), (12000, 0.32)])
    verdict(9, "NFS headroom", ok, f"total {total:.2f}; " +
            ", ".join(f"{c}: {p:.3f}%" for c, p in pct.items()))


def test_10_relay_transparency_and_font_latency(verdict):
    rng = random.Random(10)
    mismatches = 0
    for _ in range(100):
        up, down = rng.randbytes(rng.randrange(1 << 20)), rng.randbytes(rng.randrange(1 << 20))
        server = StreamServer(down)
        with Relay(("127.0.0.1", 0), server.address, CaptureBin(NullSink)).start() as relay:
            got = exchange(relay.address, up)
            server.done.wait(10)
        server.close()
        mismatches += got != down or server.received[0] != up

    fake = FakeXServer({xp.QUERY_FONT: 0.2, 43: 0.001})
    bin_ = CaptureBin()
    with Relay(("127.0.0.1", 0), fake.address, bin_).start() as relay:
        client = FakeXClient(relay.address)
        client.run_script([(xp.QUERY_FONT, b"\0" * 4)] * 40 + [43] * 10)
        client.close()
        relay.sessions[0].wait(10)
    fake.close()
    msgs = decode(parse_capture(bin_.writers[0].fh.getvalue())[0]).messages
    match = match_latencies(msgs)
    fonts = [l.latency for l in match.latencies if l.opcode == xp.QUERY_FONT]
    worst = max(abs(us - 200_000) for us in fonts) if fonts else math.inf
    share = font_report(msgs, match.latencies).font_share
    ok = mismatches == 0 and len(fonts) == 40 and worst <= 15_000 and share >= 0.99
    verdict(10, "relay bit-exact over 100 fuzzed sessions; font latency and share", ok,
            f"{mismatches} mismatches, {len(fonts)} font latencies, worst error {worst / 1000:.2f} ms, "
            f"font share {100 * share:.2f}%")


def _rechunk(records, rng):
    out = []
    for r in records:
        n = len(r.data)
        cuts = sorted(rng.sample(range(1, n), min(n - 1, rng.randint(0, 6)))) if n > 1 else []
        for a, b in zip([0] + cuts, cuts + [n]):
            out.append(CaptureRecord(r.timestamp, r.direction, r.data[a:b]))
    return out


def test_11_chunk_invariance(verdict):
    fake = FakeXServer()
    bin_ = CaptureBin()
    with Relay(("127.0.0.1", 0), fake.address, bin_).start() as relay:
        client = FakeXClient(relay.address, order=xp.MSB_FIRST)
        client.run_script([(45, b"\0" * 12), (xp.QUERY_FONT, b"\0" * 4), 8, (50, b"\0" * 8), 43, 46] * 10)
        client.close()
        relay.sessions[0].wait(10)
    fake.close()
    records = parse_capture(bin_.writers[0].fh.getvalue())[0]
    want = decode(records).messages
    rng = random.Random(11)
    same = sum(decode(_rechunk(records, rng)).messages == want for _ in range(50))
    verdict(11, "decoder independent of read chunking", same == 50 and len(want) > 100,
            f"{same}/50 chunkings identical, {len(want)} messages")


def test_12_overhead(verdict):
    # display-server-like exchange: 1 ms of server work per round trip
    r = overhead_probe(payload_size=1024, repetitions=500, service_time=0.001)
    raw = overhead_probe(payload_size=1024, repetitions=300, service_time=0.0)
    verdict(12, "relay overhead at 1 ms server service time", r.ratio <= 1.10,
            f"direct {r.direct_median * 1e3:.3f} ms, interposed {r.interposed_median * 1e3:.3f} ms, "
            f"ratio {r.ratio:.3f} (zero-work echo, informational: ratio {raw.ratio:.2f})")


def test_13_vfstat_golden(verdict):
    samples, problems = read_log(GOLDEN / "appA.log")
    rendered = vfstat(samples, "AppA", "bench.log.x")
    golden = (GOLDEN / "appA.vfstat").read_text(encoding="utf-8")
    lines = golden.splitlines()
    layout = (lines[0] == 'AppA Stats for 728 samples in "bench.log.x"' and lines[1] == "====="
              and lines[2].startswith("Minm:") and lines[3].startswith("Var:")
              and lines[4].startswith("GamA:") and "GamB:" in lines[4]
              and any(l.strip().startswith("3- 6 | *") for l in lines))
    # cross-check the headline numbers with the standard library
    ok_xs = [s.duration for s in samples if s.status == "ok"]
    mean_ok = f"Mean: {statistics.mean(ok_xs):6.2f}" in lines[2]
    var_ok = f"Var: {statistics.variance(ok_xs):8.2f}" in lines[3]
    ok = rendered == golden and layout and mean_ok and var_ok and not problems
    verdict(13, "vfstat golden rendering", ok,
            "byte-identical" if rendered == golden else "rendering differs from golden file")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
