"""Command-line front end: ``bladelink <command> ...``.

Machine-readable results (CSV, containers, captures) go to ``--output`` or
stdout; human summaries and errors go to stderr.  Every failure exits with
a nonzero status.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import energy as en
from .capture import Capture, format_csv, join_blocks, read_capture, split_blocks, write_capture
from .codecs import CODEC_NAMES, decode_packet, encode_block
from .container import MAGIC as CONTAINER_MAGIC
from .container import Container, read_container, write_container
from .core import SensorEntry, SensorSuite, compute_raw_bandwidth, default_suite
from .errors import CodecError, ConfigError
from .kvconfig import check_keys, load_kv
from .metrics import compare_blocks, mean_report, reports_to_csv
from .rtpc import load_scenario, scenario_from_mapping, simulate

log = logging.getLogger("bladelink")

_COMPRESS_KEYS = {
    "pressure-ll": {"predictor_order": int, "f": float},
    "fft-hpf": {"cr_target": float, "cutoff": float, "band_size": int},
    "adpcm": {"shift": int},
    "raw": {},
}


def _status(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _encode_one(args):
    block, codec, options = args
    return encode_block(block, codec, **options)


def _codec_options(args, codec: str) -> dict:
    opts = {}
    if args.config:
        values = load_kv(args.config)
        values.pop("codec", None)
        allowed = _COMPRESS_KEYS[codec]
        check_keys(values, set(allowed) | {"block_size"}, args.config)
        for k, v in values.items():
            if k != "block_size":
                opts[k] = allowed[k](v)
    flags = {"pressure-ll": {"predictor_order": args.order}, "fft-hpf": {"cr_target": args.cr, "cutoff": args.cutoff,
             "band_size": args.band_size}, "adpcm": {"shift": args.shift}}.get(codec, {})
    for k, v in flags.items():
        if v is not None:
            opts[k] = v
    other = {"cr": args.cr, "cutoff": args.cutoff, "band_size": args.band_size, "order": args.order, "shift": args.shift}
    used = {"pressure-ll": {"order"}, "fft-hpf": {"cr", "cutoff", "band_size"}, "adpcm": {"shift"}}.get(codec, set())
    bad = sorted(k for k, v in other.items() if v is not None and k not in used)
    if bad:
        raise ConfigError(f"options {', '.join('--' + b.replace('_', '-') for b in bad)} do not apply to codec {codec}")
    return opts


def cmd_compress(args) -> int:
    cap = read_capture(args.input)
    codec = args.codec
    if codec is None and args.config:
        codec = load_kv(args.config).get("codec")
    codec = codec or ("fft-hpf" if cap.kind == "audio" else "pressure-ll")
    if codec not in CODEC_NAMES:
        raise ConfigError(f"unknown codec {codec!r}")
    if codec == "pressure-ll" and cap.kind == "audio" or codec in ("fft-hpf", "adpcm") and cap.kind == "pressure":
        log.warning("codec %s is intended for %s data", codec, "audio" if codec != "pressure-ll" else "pressure")
    opts = _codec_options(args, codec)
    block_size = args.block_size
    if block_size is None and args.config:
        bs = load_kv(args.config).get("block_size")
        block_size = int(bs) if bs else None
    blocks, pad = split_blocks(cap, block_size)
    work = [(b, codec, opts) for b in blocks]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            packets = list(pool.map(_encode_one, work))
    else:
        packets = [_encode_one(w) for w in work]
    cont = Container(packets, cap.kind, cap.sample_rate, cap.samples, pad)
    out = args.output or str(Path(args.input).with_suffix(".asns"))
    write_container(cont, out)
    crs = [p.compression_ratio for p in packets]
    _status(f"{codec}: {len(packets)} blocks, mean CR {sum(crs) / len(crs):.4f}, "
            f"overall CR {cont.original_size / cont.stored_size:.4f} -> {out}")
    _status("block CRs: " + " ".join(f"{c:.4f}" for c in crs))
    return 0


def _decode_container(cont: Container) -> Capture:
    blocks = [decode_packet(p, cont.sample_rate, cont.kind) for p in cont.packets]
    cap = join_blocks(blocks, cont.pad, cont.kind)
    if cap.samples != cont.total_samples:
        raise CodecError(f"container records {cont.total_samples} samples but packets hold {cap.samples}")
    return cap


def cmd_decompress(args) -> int:
    cont = read_container(args.input)
    cap = _decode_container(cont)
    if args.output:
        write_capture(cap, args.output, args.format)
        _status(f"{len(cont.packets)} packets -> {args.output}")
    else:
        sys.stdout.write(format_csv(cap))
    return 0


def _load_any(path: str) -> tuple[Capture, Container | None]:
    """A capture file, or a container decoded to its reconstruction."""
    if Path(path).read_bytes()[:4] == CONTAINER_MAGIC:
        cont = read_container(path)
        return _decode_container(cont), cont
    return read_capture(path), None


def cmd_metrics(args) -> int:
    (a, _), (b, cont) = _load_any(args.original), _load_any(args.reconstructed)
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    kind = args.kind or a.kind
    cutoff = args.cutoff if args.cutoff is not None else (100.0 if kind == "audio" else None)
    ba, _ = split_blocks(a, args.block_size)
    bb, _ = split_blocks(Capture(b.data, a.sample_rate, a.bit_depth, a.kind), args.block_size)
    crs = [p.compression_ratio for p in cont.packets] if cont is not None and len(cont.packets) == len(ba) \
        else [math.nan] * len(ba)
    codec = args.codec or (cont.packets[0].codec_id.name.lower().replace("_", "-") if cont and cont.packets else "")
    reports = [compare_blocks(x, y, dataset=f"block{i}", codec=codec, cr=cr, cutoff=cutoff)
               for i, (x, y, cr) in enumerate(zip(ba, bb, crs))]
    reports.append(mean_report(reports))
    _emit(reports_to_csv(reports), args.output)
    return 0


def _profile_from_config(path: str):
    values = load_kv(path)
    check_keys(values, {"p_cpr", "th_cpr", "p_tx", "th_tx", "cr", "name"}, path)
    try:
        prof = en.EnergyProfile(*(float(values[k]) for k in ("p_cpr", "th_cpr", "p_tx", "th_tx")))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc.args[0]}") from None
    return values.get("name", Path(path).stem), prof, float(values["cr"]) if "cr" in values else None


def cmd_energy(args) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.config:
        name, prof, cfg_cr = _profile_from_config(args.config)
        codec = args.codec or ""
    else:
        codec = args.codec or "pressure"
        name, prof, cfg_cr = args.preset, en.preset_profile(args.preset, codec), None
    cr = args.cr if args.cr is not None else cfg_cr
    if args.container:
        cont = read_container(args.container)
        cr = cont.original_size / cont.stored_size
    if cr is None:
        cr = en.PRESET_CR.get(codec, 1.0)
    becr = en.becr(prof)
    pes = en.pes(prof, cr)
    ok = en.is_beneficial(prof, cr)
    w.writerow(["profile", "codec", "cr", "overhead", "becr", "pes_pct", "beneficial"])
    w.writerow([name, codec, f"{cr:.6g}", f"{prof.overhead:.6g}", "" if becr is None else f"{becr:.6g}",
                f"{pes:.4f}", "yes" if ok else "no"])
    if becr is None:
        _status(f"warning: {name}: compression never pays off (overhead {prof.overhead:.3f} >= 1)")
    elif not ok:
        _status(f"warning: CR {cr:.3f} is below the break-even ratio {becr:.3f}; compressing costs energy")
    if args.lifetime:
        w.writerow([])
        w.writerow(["turbine", "active_power_w", "average_power_w", "lifetime_days",
                    "sustainable_median", "area_median_cm2", "sustainable_p95", "area_p95_cm2"])
        for t in en.TURBINES.values():
            budget = en.PowerBudget(en.BATTERY_WH, args.duty_cycle, t.active_power_w)
            med = en.self_sustainable(en.SolarModel(irradiance=en.P_MEDIAN_W_CM2), budget)
            p95 = en.self_sustainable(en.SolarModel(irradiance=en.P_95_W_CM2), budget)
            w.writerow([t.name, t.active_power_w, f"{en.average_power(budget):.6g}",
                        f"{en.estimate_lifetime(budget):.2f}", "yes" if med[0] else "no", f"{med[1]:.0f}",
                        "yes" if p95[0] else "no", f"{p95[1]:.0f}"])
    _emit(buf.getvalue(), args.output)
    _status(f"{name}/{codec}: CR {cr:.3f}, PES {pes:.2f}%"
            + ("" if becr is None else f", BECR {becr:.3f}"))
    return 0


def cmd_simulate(args) -> int:
    scenario, config = load_scenario(args.scenario, args.seed)
    if args.config:
        values = load_kv(args.config)
        base = {k: str(v) for k, v in asdict(scenario).items()}
        base.update({k: str(v) for k, v in asdict(config).items() if k != "power_map"})
        base.update(values)
        scenario, config = scenario_from_mapping(base, args.config, args.seed)
    runs = [("rtpc", args.output)]
    if args.baseline:
        if not args.output:
            raise ConfigError("--baseline needs --output so the two traces go to separate files")
        out = Path(args.output)
        runs.append((args.baseline, str(out.with_name(f"{out.stem}-{args.baseline}{out.suffix}"))))
    for policy, out in runs:
        result = simulate(scenario, config, args.duration, policy)
        s = result.summary()
        _emit(result.to_csv(), out)
        _status(f"{policy}: mean goodput {s['mean_goodput_bps'] / 1e3:.1f} kbps, mean tx {s['mean_tx_power_dbm']:.2f} dBm, "
                f"mean PER {s['mean_per'] * 100:.2f}%, radio energy {s['total_radio_energy_j']:.4f} J, "
                f"{s['energy_per_byte_j'] * 1e9:.1f} nJ/byte" + (f" -> {out}" if out else ""))
    return 0


def _suite_from_config(path: str) -> SensorSuite:
    entries = []
    for name, value in load_kv(path).items():
        try:
            count, rate, depth = (p.strip() for p in value.split(","))
            entries.append(SensorEntry(name, int(count), float(rate), int(depth)))
        except ValueError:
            raise ConfigError(f"{path}: {name} must be 'count, rate, depth'") from None
    return SensorSuite(tuple(entries))


def cmd_bandwidth(args) -> int:
    suite = _suite_from_config(args.config) if args.config else default_suite()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sensor", "count", "rate_hz", "bit_depth", "bps"])
    for e in suite:
        w.writerow([e.kind, e.count, f"{e.sample_rate:g}", e.bit_depth, f"{e.bandwidth:.0f}"])
    total = compute_raw_bandwidth(suite)
    w.writerow(["total", "", "", "", f"{total:.0f}"])
    _emit(buf.getvalue(), args.output)
    _status(f"raw bandwidth {total / 1e6:.4f} Mbps")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="key = value configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed override")
    common.add_argument("--output", "-o", metavar="PATH", default=argparse.SUPPRESS, help="output file (default stdout)")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="bladelink", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", parents=[common], help="compress a capture file into a container")
    c.add_argument("input")
    c.add_argument("--codec", choices=sorted(CODEC_NAMES))
    c.add_argument("--cr", type=float, help="fft-hpf target compression ratio")
    c.add_argument("--cutoff", type=float, help="fft-hpf high-pass cutoff, Hz")
    c.add_argument("--band-size", type=int, help="fft-hpf values per quantization band")
    c.add_argument("--order", type=int, choices=(0, 1, 2), help="pressure-ll temporal predictor order")
    c.add_argument("--shift", type=int, help="adpcm right shift into the 16-bit domain")
    c.add_argument("--block-size", type=int)
    c.add_argument("--jobs", type=int, default=1, help="parallel encoder processes")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", parents=[common], help="decode a container back to a capture file")
    d.add_argument("input")
    d.add_argument("--format", choices=("csv", "binary"))
    d.set_defaults(func=cmd_decompress)

    m = sub.add_parser("metrics", parents=[common], help="distortion report between two captures or containers")
    m.add_argument("original")
    m.add_argument("reconstructed")
    m.add_argument("--kind", choices=("pressure", "audio"))
    m.add_argument("--cutoff", type=float, help="spectral high-pass cutoff for MAPE and peaks, Hz")
    m.add_argument("--block-size", type=int)
    m.add_argument("--codec", help="label for the codec column")
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("energy", parents=[common], help="compression energy trade-off and lifetime")
    e.add_argument("--preset", choices=sorted(en.PRESET_OVERHEADS), default="aventa")
    e.add_argument("--codec", choices=("pressure", "fft-hpf", "adpcm"))
    e.add_argument("--cr", type=float)
    e.add_argument("--container", help="take the CR from a compressed container")
    e.add_argument("--lifetime", action="store_true", help="add battery lifetime and solar rows")
    e.add_argument("--duty-cycle", type=float, default=en.DUTY_CYCLE)
    e.set_defaults(func=cmd_energy)

    s = sub.add_parser("simulate", parents=[common], help="run the transmission power control simulation")
    s.add_argument("scenario", help="scenario file or bundled name (aventa, dtu10mw, static-200m)")
    s.add_argument("--duration", type=float, default=30.0)
    s.add_argument("--baseline", choices=("fixed-max",), help="also run a baseline policy")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bandwidth", parents=[common], help="raw sensor data-rate budget")
    b.set_defaults(func=cmd_bandwidth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("output", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, OverflowError) as exc:
        _status(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
