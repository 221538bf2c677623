"""Command-line front end: ``impnet <command> --config net.toml``.

Commands
--------
sweep      impedance tables at named buses (and dc-side tables), with/without IO
nyquist    eigen-loci samples and winding at the analysis bus
zeros      SC2 and SC3 zero lists
verdict    SC1/SC2/SC3 verdicts plus a consistency flag
weakpoint  margin ranking of the converter terminals
partition  open-loop poles and verdicts over partition factors
verify     oracle comparison (closed-loop eigenvalues, dc-port admittances)

Every command writes one JSON document (sorted keys, complex numbers as
``[re, im]``, floats rounded to 12 significant digits) so identical inputs
give byte-identical output.  ``--format tables`` additionally writes one CSV
per frequency table into the ``--out`` directory.

Exit status: 0 on success, 2 when ``--gate`` is given and a verdict is not
stable (or ``verify`` finds a mismatch), 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, AnalysisSettings, load_config
from .errors import ConfigError, ImpnetError
from .lti import FrequencyGrid, classify_half_plane, freqresp, transmission_zeros
from .network import (
    assemble_ysys,
    dc_reduce,
    dc_side_partition,
    load_subsystem,
    loop_impedance,
    partition,
    PartitionSpec,
    source_impedance,
)
from .stability import (
    nyquist_samples,
    partition_sweep,
    sc1_nyquist,
    sc2_loop_zeros,
    sc3_system_zeros,
    weak_point_scan,
)

log = logging.getLogger("impnet")

COMMANDS = ("sweep", "nyquist", "zeros", "verdict", "weakpoint", "partition", "verify")
RESULT_SCHEMA = 1
_SIG = 12


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return None
    if x == 0.0:
        return 0.0
    return float(f"{x:.{_SIG}g}")


def to_jsonable(obj):
    """Recursively convert results to JSON types; complex -> [re, im]."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), sort_keys=True, indent=2) + "\n"


def _sorted_values(vals):
    """Complex values in a reproducible order (rounded before sorting)."""
    vals = [complex(v) for v in vals]
    return sorted(vals, key=lambda v: (_num(v.real), _num(v.imag)))


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = table["columns"]
    w.writerow(cols)
    for row in table["rows"]:
        w.writerow(["" if v is None else repr(v) for v in to_jsonable(row)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------

def _grid(settings: AnalysisSettings):
    n = int(round((settings.freq_max - settings.freq_min) / settings.freq_step))
    f = settings.freq_min + settings.freq_step * np.arange(n + 1)
    return FrequencyGrid.from_hz(f[f <= settings.freq_max * (1 + 1e-12)])


def _block_table(name, block, grid, labels):
    H = freqresp(block, grid.points)
    cols = ["f_hz"]
    for lab in labels:
        cols += [f"{lab}_re", f"{lab}_im"]
    rows = []
    for f, h in zip(grid.hz, H):
        row = [float(f)]
        for v in h.reshape(-1):
            row += [float(v.real), float(v.imag)]
        rows.append(row)
    return {"name": name, "columns": cols, "rows": rows}


_MSD_LABELS = ("Z11", "Z12", "Z21", "Z22")


def _ac_buses(net):
    return [b.name for b in net.buses]


def cmd_sweep(cfg, args):
    s = cfg.analysis
    grid = _grid(s)
    buses = list(s.sweep_buses) or [s.bus]
    tables = []
    for io_flag in _io_modes(args):
        tag = "with_io" if io_flag else "without_io"
        asm = assemble_ysys(cfg.network, with_io=io_flag)
        for bus in buses:
            z = load_subsystem(asm, bus, s.source).inverse()
            tables.append(_block_table(f"{bus}.{tag}", z.block, grid, _MSD_LABELS))
        for link in cfg.network.dc_links:
            for term in (link.sending, link.receiving):
                z = dc_reduce(asm, term, io_flag).inv()
                tables.append(_block_table(f"{term}.dc.{tag}", z, grid, ("Zdc",)))
    return {"tables": tables}, True


def _io_modes(args):
    modes = []
    if args.with_io:
        modes.append(True)
    if args.without_io:
        modes.append(False)
    return modes or [True]


def _split(cfg, args, asm):
    s = cfg.analysis
    k = args.kpart[0] if args.kpart else 0.0
    return partition(asm, PartitionSpec(s.bus, k, s.source))


def _verdict_doc(v):
    d = {"criterion": v.criterion, "verdict": v.verdict,
         "critical_frequencies_hz": list(v.critical_frequencies),
         "rhp_zeros": _sorted_values(v.rhp_zeros)}
    if v.criterion == "SC1":
        d["rhp_open_loop_poles"] = v.rhp_open_loop_poles
        d["winding"] = v.winding
        for key in ("min_distance", "min_distance_hz", "loci_winding", "loci_consistent"):
            if key in v.details:
                d[key] = v.details[key]
    elif "least_damped" in v.details:
        d["least_damped"] = v.details["least_damped"]
        d["least_damped_ratio"] = v.details["least_damped_ratio"]
    return d


def cmd_nyquist(cfg, args):
    s = cfg.analysis
    grid = _grid(s)
    out = {}
    ok = True
    for io_flag in _io_modes(args):
        asm = assemble_ysys(cfg.network, with_io=io_flag)
        zs, yl = _split(cfg, args, asm)
        v = sc1_nyquist(zs, yl, density=s.density)
        full = FrequencyGrid.from_hz(np.concatenate([-grid.hz[::-1], grid.hz]))
        loci = nyquist_samples(zs, yl, full)
        cols = ["f_hz"] + [c for k in range(loci.shape[1]) for c in (f"l{k + 1}_re", f"l{k + 1}_im")]
        rows = [[float(f)] + [x for lam in row for x in (float(lam.real), float(lam.imag))]
                for f, row in zip(full.hz, loci)]
        tag = "with_io" if io_flag else "without_io"
        out[tag] = {"verdict": _verdict_doc(v),
                    "loci": {"name": f"loci.{tag}", "columns": cols, "rows": rows}}
        ok &= v.stable
    return {"nyquist": out, "tables": [o["loci"] for o in out.values()]}, ok


def cmd_zeros(cfg, args):
    asm = assemble_ysys(cfg.network)
    zs, yl = _split(cfg, args, asm)
    s2 = sc2_loop_zeros(loop_impedance(zs, yl.inverse()))
    s3 = sc3_system_zeros(asm)
    doc = {
        "SC2": {"zeros": _sorted_values(s2.details["zeros"]), "verdict": _verdict_doc(s2)},
        "SC3": {"zeros": _sorted_values(s3.details["zeros"]), "verdict": _verdict_doc(s3)},
    }
    return doc, s2.stable and s3.stable


def _all_verdicts(cfg, args, net=None):
    net = net or cfg.network
    asm = assemble_ysys(net)
    s = cfg.analysis
    k = args.kpart[0] if args and args.kpart else 0.0
    zs, yl = partition(asm, PartitionSpec(s.bus, k, s.source))
    v1 = sc1_nyquist(zs, yl, density=s.density)
    v2 = sc2_loop_zeros(loop_impedance(zs, yl.inverse()))
    v3 = sc3_system_zeros(asm)
    res = {"SC1": v1, "SC2": v2, "SC3": v3}
    if net.dc_links and s.dc_link:
        res["SC1_dc"] = sc1_nyquist(*dc_side_partition(asm, s.dc_link, True), density=s.density)
    return res


def cmd_verdict(cfg, args):
    res = _all_verdicts(cfg, args)
    verdicts = {k: v.verdict for k, v in res.items()}
    consistent = len(set(verdicts.values())) == 1
    doc = {"verdicts": {k: _verdict_doc(v) for k, v in res.items()},
           "consistent": consistent,
           "overall": res["SC3"].verdict}
    return doc, all(v.stable for v in res.values())


def cmd_weakpoint(cfg, args):
    s = cfg.analysis
    cands = list(s.candidates) or [d.name for d in cfg.network.devices if d.kind == "vsc"]
    rep = weak_point_scan(assemble_ysys(cfg.network), cands)
    entries = [{"name": e.name, "bus": e.bus, "margin": e.margin,
                "frequency_hz": e.frequency_hz, "verdict": e.verdict,
                "rhp_open_loop_poles": e.rhp_poles, "pole_adjusted": e.pole_adjusted}
               for e in rep.entries]
    return {"entries": entries, "ranking": list(rep.ranking)}, True


def cmd_partition(cfg, args):
    s = cfg.analysis
    ks = list(args.kpart) if args.kpart else list(s.kpart)
    sw = partition_sweep(assemble_ysys(cfg.network), ks, s.bus, s.source)
    pts = []
    for p in sw.points:
        pts.append({"k_part": p.k_part, "rhp_open_loop_poles": p.rhp_poles,
                    "dominant_pair": p.dominant_pair, "load_poles": _sorted_values(p.load_poles),
                    "verdict": _verdict_doc(p.verdict)})
    same = len(set(sw.verdicts)) == 1
    return {"bus": sw.bus, "points": pts, "first_rhp_k": sw.first_rhp_k,
            "verdict_invariant": same}, all(p.verdict.stable for p in sw.points)


def _match_rhp(zeros, eigs, rtol=1e-6):
    """Compare RHP subsets (marginal band excluded) as multisets."""
    _, _, za = classify_half_plane(np.asarray(zeros))
    _, _, eb = classify_half_plane(np.asarray(eigs))
    if za.size != eb.size:
        return False, float("inf")
    worst = 0.0
    left = list(eb)
    for z in za:
        d = [abs(z - e) / max(1.0, abs(e)) for e in left]
        j = int(np.argmin(d))
        worst = max(worst, d[j])
        left.pop(j)
    return worst <= rtol, worst


def _verify_network(net, label, settings):
    from .oracle import closed_loop_eigenvalues, dc_port_admittance

    asm = assemble_ysys(net)
    z = transmission_zeros(asm.Y_sys)
    ev = closed_loop_eigenvalues(net)
    ok, err = _match_rhp(z, ev)
    v3 = sc3_system_zeros(asm)
    checks = [{"check": "sc3_rhp_zeros_vs_oracle", "ok": ok, "max_rel_error": err,
               "rhp_count": int(len(v3.rhp_zeros))}]
    # verdict unanimity at the analysis bus
    zs, yl = partition(asm, PartitionSpec(settings.bus, 0.0, settings.source))
    verdicts = {
        "SC1": sc1_nyquist(zs, yl).verdict,
        "SC2": sc2_loop_zeros(loop_impedance(zs, yl.inverse())).verdict,
        "SC3": v3.verdict,
    }
    checks.append({"check": "verdict_unanimity", "ok": len(set(verdicts.values())) == 1,
                   "verdicts": verdicts})
    pts = 2j * np.pi * np.asarray(settings.verify_freq)
    for link in net.dc_links:
        for term in (link.sending, link.receiving):
            ref = dc_port_admittance(net, term, pts)
            got = freqresp(dc_reduce(asm, term, True), pts)[:, 0, 0]
            rel = float(np.max(np.abs(got - ref) / np.abs(ref)))
            checks.append({"check": f"dc_port_admittance:{term}", "ok": rel < 1e-6,
                           "max_rel_error": rel})
    return {"network": label, "checks": checks, "ok": all(c["ok"] for c in checks)}


def cmd_verify(cfg, args):
    from .topologies import random_twin_vsc_network

    reports = []
    settings = cfg.analysis if cfg is not None else AnalysisSettings()
    if cfg is not None:
        reports.append(_verify_network(cfg.network, cfg.name, settings))
    n_random = args.random if args.random is not None else (settings.random if cfg else 0)
    seed = args.seed if args.seed is not None else settings.seed
    for k in range(n_random):
        net = random_twin_vsc_network(seed + k)
        reports.append(_verify_network(net, f"random:{seed + k}", AnalysisSettings()))
    mismatches = sum(1 for r in reports for c in r["checks"] if not c["ok"])
    return {"reports": reports, "mismatches": mismatches, "networks": len(reports)}, mismatches == 0


HANDLERS = {
    "sweep": cmd_sweep,
    "nyquist": cmd_nyquist,
    "zeros": cmd_zeros,
    "verdict": cmd_verdict,
    "weakpoint": cmd_weakpoint,
    "partition": cmd_partition,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _float_list(text):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not vals or any(not 0.0 <= v < 1.0 for v in vals):
        raise argparse.ArgumentTypeError("partition factors must lie in [0, 1)")
    return vals


def _positive(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError("expected a positive number")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="impnet", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"impnet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} analysis")
        sp.add_argument("--config", required=name != "verify", help="TOML network description")
        sp.add_argument("--out", help="output file (document) or directory (tables); stdout if omitted")
        sp.add_argument("--format", choices=("document", "tables"), default="document")
        sp.add_argument("--with-io", dest="with_io", action="store_true",
                        help="re-reference devices to the common frame (default)")
        sp.add_argument("--without-io", dest="without_io", action="store_true",
                        help="also/only evaluate with devices left in their local frames")
        sp.add_argument("--kpart", type=_float_list, help="comma-separated partition factors")
        sp.add_argument("--gate", action="store_true",
                        help="exit with status 2 unless everything is stable/consistent")
        sp.add_argument("--seed", type=int, help="base seed for random networks")
        sp.add_argument("--random", type=int, help="number of random networks (verify)")
        sp.add_argument("--freq-min", type=_positive)
        sp.add_argument("--freq-max", type=_positive)
        sp.add_argument("--freq-step", type=_positive)
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _settings_with_flags(cfg, args):
    from dataclasses import replace

    s = cfg.analysis
    kw = {}
    for key in ("freq_min", "freq_max", "freq_step"):
        val = getattr(args, key)
        if val is not None:
            kw[key] = val
    s = replace(s, **kw)
    if s.freq_min >= s.freq_max:
        raise ConfigError("--freq-min must be below --freq-max")
    return replace(cfg, analysis=s)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None
        if args.config:
            cfg = _settings_with_flags(load_config(args.config), args)
            net = cfg.network if cfg.network.solved else cfg.network.solve()
            from dataclasses import replace
            cfg = replace(cfg, network=net)
        result, ok = HANDLERS[args.command](cfg, args)
        doc = {
            "schema": RESULT_SCHEMA,
            "config_schema": SCHEMA_VERSION,
            "tool": "impnet",
            "version": __version__,
            "command": args.command,
            "config": None if cfg is None else {"name": cfg.name, "sha256": cfg.sha256},
            "flags": {"with_io": args.with_io, "without_io": args.without_io,
                      "kpart": args.kpart, "seed": args.seed, "random": args.random,
                      "freq": None if cfg is None else [cfg.analysis.freq_min,
                                                        cfg.analysis.freq_max,
                                                        cfg.analysis.freq_step]},
            "result": result,
            "ok": ok,
        }
        _emit(doc, args)
    except ConfigError as exc:
        print(f"impnet: config error: {exc}", file=sys.stderr)
        return 1
    except (ImpnetError, KeyError, ValueError, OSError) as exc:
        print(f"impnet: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.gate and not ok:
        return 2
    return 0


def _emit(doc, args):
    text = dumps(doc)
    if args.format == "tables":
        if not args.out:
            raise ConfigError("--format tables needs --out DIRECTORY")
        out = Path(args.out)
        atomic_write(out / "result.json", text)
        for t in doc["result"].get("tables", []):
            atomic_write(out / f"{t['name']}.csv", table_csv(t))
    elif args.out:
        atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)


def main():  # console-script entry point
    sys.exit(run())


if __name__ == "__main__":
    main()
