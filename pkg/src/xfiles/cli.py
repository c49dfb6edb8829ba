"""``xfiles`` command line: probe, stats, font, load and xtrace subcommands.

Exit status is 0 on success, 2 for invalid input or usage, 1 for runtime
failures. Results go to stdout or the files named by flags; diagnostics go
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from . import fontmodel, load, probe, stats
from .xtrace import capture as xcap
from .xtrace.decode import DecodeError, DecodeResult, decode as decode_records
from .xtrace import relay as xrelay
from .xtrace import report as xreport

log = logging.getLogger("xfiles")


class UsageError(ValueError):
    pass


def _default_log(args) -> Path:
    if args.log:
        return Path(args.log)
    base = os.environ.get("XFILES_LOG_DIR")
    if not base:
        raise UsageError("--log is required (or set XFILES_LOG_DIR)")
    return Path(base) / "bench.log"


def _warn(msg: str) -> None:
    print(f"xfiles: {msg}", file=sys.stderr)


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.readlines()


# probe

def cmd_probe_run(args) -> int:
    if args.config:
        cfg = probe.parse_schedule_config(Path(args.config).read_text(encoding="utf-8"))
        sched = cfg.schedule
        if args.interval is not None:
            sched.interval = args.interval
        if args.cycles is not None:
            sched.cycles = None if args.cycles < 0 else args.cycles
        logpath = Path(args.log) if args.log else cfg.log
        extra = [probe.ProbeSpec.parse(p, order=len(sched.probes) + i) for i, p in enumerate(args.probe)]
        sched = probe.Schedule(sched.interval, sched.probes + extra, sched.cycles)
    else:
        if args.interval is None:
            raise UsageError("--interval is required without --config")
        specs = [probe.ProbeSpec.parse(p, order=i) for i, p in enumerate(args.probe)]
        cycles = None if args.cycles is None or args.cycles < 0 else args.cycles
        sched = probe.Schedule(args.interval, specs, cycles)
        logpath = None
    logpath = logpath or _default_log(args)
    with open(logpath, "a", encoding="utf-8") as sink:
        try:
            n = probe.run_schedule(sched, sink)
        except KeyboardInterrupt:
            _warn("interrupted")
            return 1
    log.info("%d cycles written to %s", n, logpath)
    return 0


def cmd_probe_synth(args) -> int:
    samples = probe.synth_samples(args.shape, args.scale, args.n, args.seed, args.app,
                                  step=args.step)
    text = probe.render_log(samples)
    if args.log:
        with open(args.log, "a", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# stats

def _load_samples(path: Path):
    samples, problems = probe.read_log(path)
    for lineno, msg in problems:
        _warn(f"{path}:{lineno}: {msg} (skipped)")
    return samples


def cmd_stats_vfstat(args) -> int:
    path = _default_log(args)
    samples = _load_samples(path)
    report = stats.vfstat(samples, args.app, args.source or path.name, args.bucket,
                          include_failed=args.include_failed)
    _emit(report, args.out)
    return 0


def cmd_stats_series(args) -> int:
    path = _default_log(args)
    written = stats.write_series(stats.split_series(_load_samples(path)), args.outdir)
    for p in written:
        print(p)
    return 0


# font

def cmd_font_model(args) -> int:
    model = fontmodel.FontModel.parse(args.baseline)
    rows = fontmodel.parse_rows(_read_lines(args.rows))
    if args.baseline_label:
        rows = [fontmodel.TableRow(r.label, r.fonts, r.measured, r.baseline or r.label == args.baseline_label)
                for r in rows]
    sys.stdout.write(fontmodel.table_report(model, rows))
    return 0


def cmd_font_total(args) -> int:
    inv = fontmodel.FontPathInventory.read(args.inventory)
    if args.by_kind:
        for kind in fontmodel.KINDS:
            n = sum(e.count for e in inv.by_kind(kind))
            if n:
                print(f"{kind}\t{n}")
    print(fontmodel.inventory_total(inv))
    return 0


# load

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def cmd_load_mva(args) -> int:
    threshold, penalty = None, 0.0
    if args.paging:
        a, sep, b = args.paging.partition(":")
        if not sep:
            raise UsageError("--paging must look like THRESHOLD:PENALTY")
        threshold, penalty = int(a), float(b)
    model = load.MvaModel(_floats(args.demands), args.think, threshold, penalty)
    asym = load.asymptotes(model)
    n_opt, _ = load.knee(asym)
    lines = [f"# Rmin={asym.r_min:g} Dmax={asym.d_max:g} Z={asym.z:g} knee={n_opt:.4g}",
             "# n response throughput floor high_load"]
    for p in load.mva(model, args.users):
        lines.append(f"{p.n} {p.response:.6f} {p.throughput:.6f} {asym.r_min:.6f} "
                     f"{asym.high_load(p.n):.6f}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_load_fit(args) -> int:
    curve = load.LoadCurve.parse(_read_lines(args.curve))
    res = load.analyze(curve, args.think, args.tail, args.factor, args.exclude_from)
    for note in res.notes:
        _warn(note)
    fit = res.fit
    n_max = "none" if res.n_max is None else str(res.n_max)
    lines = [f"# Rmin={fit.r_min:g} Dmax={fit.d_max:.6g} Z={fit.z:g}",
             f"# optimal load n_opt={res.knee[0]:.4g} ({res.knee[1]} users)",
             f"# maximal load exceedance n_max={n_max}",
             "# n response floor high_load"]
    asym = load.asymptotes(fit)
    for n, r in curve.points:
        lines.append(f"{n} {r:.6f} {asym.r_min:.6f} {asym.high_load(n):.6f}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_load_headroom(args) -> int:
    rates = load.parse_rates(_read_lines(args.rates))
    h = load.nfs_headroom(rates, load.parse_capacity(args.capacity))
    print(f"total {h.total:.2f} calls/s")
    print(f"capacity {h.capacity:g} calls/s")
    print(f"utilization {100 * h.utilization:.2f}%")
    return 0


def cmd_load_escalate(args) -> int:
    series: dict[str, list] = {}
    for lineno, raw in enumerate(_read_lines(args.series), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise UsageError(f"{args.series}:{lineno}: expected '<op> <n_users> <response>'")
        series.setdefault(fields[0], []).append((float(fields[1]), float(fields[2])))
    flags, notes = load.escalation_detect(series, args.factor)
    for note in notes:
        _warn(note)
    for op, n in flags:
        print(f"{op}\t{n:g}")
    return 0


# xtrace

def _capture_factory(path: Path):
    def make(i: int) -> xcap.CaptureWriter:
        target = path if i == 0 else path.with_name(f"{path.name}.{i}")
        return xcap.CaptureWriter.open(target)
    return make


def cmd_xtrace_proxy(args) -> int:
    relay = xrelay.Relay(xrelay.parse_endpoint(args.listen), xrelay.parse_endpoint(args.upstream),
                         _capture_factory(Path(args.capture)), args.sessions)
    host, port = relay.address
    _warn(f"relaying {host}:{port} -> {args.upstream}, capture {args.capture}")
    try:
        relay.serve_forever()
        for s in relay.sessions:
            s.wait()
    except KeyboardInterrupt:
        pass
    finally:
        relay.close()
    failed = [s for s in relay.sessions if s.error]
    for s in failed:
        _warn(s.error)
    return 1 if failed else 0


def _decode_capture(path) -> tuple[DecodeResult, int]:
    records, truncated = xcap.read_capture(path)
    if truncated:
        _warn(f"{path}: capture ends mid-record")
    res = decode_records(records)
    for p in res.problems:
        _warn(p)
    span = records[-1].timestamp - records[0].timestamp if records else 0
    return res, span


def cmd_xtrace_decode(args) -> int:
    records, truncated = xcap.read_capture(args.capture)
    if truncated:
        _warn(f"{args.capture}: capture ends mid-record")
    res = decode_records(records, full_payload=args.full)
    for p in res.problems:
        _warn(p)
    out = sys.stdout
    for m in res.messages:
        out.write(json.dumps(m.to_json(), sort_keys=True) + "\n")
    return 0


def cmd_xtrace_report(args) -> int:
    res, span = _decode_capture(args.capture)
    match = xreport.match_latencies(res.messages)
    wall = int(args.wall_time * 1e6) if args.wall_time else span
    report = xreport.font_report(res.messages, match.latencies, wall)
    sys.stdout.write(xreport.render_report(report, match))
    return 0


def cmd_xtrace_overhead(args) -> int:
    r = xrelay.overhead_probe(args.payload, args.repetitions, args.service_time)
    print(f"direct median     {r.direct_median * 1e3:.4f} ms")
    print(f"interposed median {r.interposed_median * 1e3:.4f} ms")
    print(f"overhead          {100 * r.overhead:.2f}%")
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xfiles", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    groups = p.add_subparsers(dest="group", metavar="{probe,stats,font,load,xtrace}")
    groups.required = True

    def group(name, help):
        g = groups.add_parser(name, help=help)
        sub = g.add_subparsers(dest="verb")
        sub.required = True
        return sub

    pr = group("probe", "injection benchmark harness")
    s = pr.add_parser("run", help="run probes on a schedule")
    s.add_argument("--config", help="schedule file (key = value lines)")
    s.add_argument("--interval", type=float, help="seconds between cycle starts")
    s.add_argument("--cycles", type=int, help="number of cycles (negative: run forever)")
    s.add_argument("--log", help="probe log to append to")
    s.add_argument("--probe", action="append", default=[], metavar="NAME=COMMAND,TIMEOUT")
    s.set_defaults(func=cmd_probe_run)
    s = pr.add_parser("synth", help="write gamma-distributed synthetic samples")
    s.add_argument("--shape", type=float, required=True)
    s.add_argument("--scale", type=float, required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--app", default="synth")
    s.add_argument("--step", type=float, default=900.0, help="seconds between timestamps")
    s.add_argument("--log", help="append here instead of stdout")
    s.set_defaults(func=cmd_probe_synth)

    st = group("stats", "launch-time statistics")
    s = st.add_parser("vfstat", help="summary, gamma fit and histogram for one app")
    s.add_argument("--log")
    s.add_argument("--app", required=True)
    s.add_argument("--bucket", type=float, default=3.0)
    s.add_argument("--source", help="name shown in the title (default: log file name)")
    s.add_argument("--include-failed", action="store_true", help="also count timeout/fail samples")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats_vfstat)
    s = st.add_parser("series", help="per-app time-series plot data")
    s.add_argument("--log")
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_stats_series)

    fo = group("font", "font-path latency model")
    s = fo.add_parser("model", help="compare measurements against the log model")
    s.add_argument("--baseline", required=True, metavar="SECONDS:FONTS")
    s.add_argument("--rows", required=True, help="label fonts measured [baseline] per line")
    s.add_argument("--baseline-label", help="row label to treat as the baseline")
    s.set_defaults(func=cmd_font_model)
    s = fo.add_parser("total", help="total fonts in an inventory")
    s.add_argument("--inventory", required=True)
    s.add_argument("--by-kind", action="store_true")
    s.set_defaults(func=cmd_font_total)

    lo = group("load", "load curves and headroom")
    s = lo.add_parser("mva", help="exact MVA curve with asymptotes")
    s.add_argument("--demands", required=True, help="comma-separated service demands")
    s.add_argument("--think", type=float, default=0.0)
    s.add_argument("--users", type=int, required=True)
    s.add_argument("--paging", metavar="THRESHOLD:PENALTY")
    s.add_argument("--out")
    s.set_defaults(func=cmd_load_mva)
    s = lo.add_parser("fit", help="fit asymptotes, knee and exceedance to a curve")
    s.add_argument("--curve", required=True)
    s.add_argument("--think", type=float, default=0.0)
    s.add_argument("--tail", type=float, default=0.3)
    s.add_argument("--factor", type=float, default=load.DEFAULT_THRESHOLD_FACTOR)
    s.add_argument("--exclude-from", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_load_fit)
    s = lo.add_parser("headroom", help="NFS call-rate utilization")
    s.add_argument("--rates", required=True)
    s.add_argument("--capacity", required=True, help="calls/s or ethernet|fddi|css")
    s.set_defaults(func=cmd_load_headroom)
    s = lo.add_parser("escalate", help="flag order-of-magnitude jumps in interactive times")
    s.add_argument("--series", required=True, help="'<op> <n_users> <response>' per line")
    s.add_argument("--factor", type=float, default=load.DEFAULT_ESCALATION_FACTOR)
    s.set_defaults(func=cmd_load_escalate)

    xt = group("xtrace", "interposing X11 tracer")
    s = xt.add_parser("proxy", help="relay and capture X11 traffic")
    s.add_argument("--listen", required=True, metavar="HOST:PORT")
    s.add_argument("--upstream", required=True, metavar="HOST:PORT")
    s.add_argument("--capture", required=True)
    s.add_argument("--sessions", type=int, help="exit after this many client sessions")
    s.set_defaults(func=cmd_xtrace_proxy)
    s = xt.add_parser("decode", help="decoded messages as JSON lines")
    s.add_argument("--capture", required=True)
    s.add_argument("--full", action="store_true", help="keep whole payloads")
    s.set_defaults(func=cmd_xtrace_decode)
    s = xt.add_parser("report", help="per-opcode latency and font share")
    s.add_argument("--capture", required=True)
    s.add_argument("--wall-time", type=float, help="seconds (default: capture span)")
    s.set_defaults(func=cmd_xtrace_report)
    s = xt.add_parser("overhead", help="loopback relay overhead probe")
    s.add_argument("--payload", type=int, default=1024)
    s.add_argument("--repetitions", type=int, default=500)
    s.add_argument("--service-time", type=float, default=0.001)
    s.set_defaults(func=cmd_xtrace_overhead)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (DecodeError, xcap.CaptureFormatError) as exc:
        _warn(str(exc))
        return 1
    except ValueError as exc:
        _warn(str(exc))
        return 2
    except OSError as exc:
        _warn(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
