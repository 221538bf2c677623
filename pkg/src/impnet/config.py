"""TOML network descriptions.

A config file declares the base frequency, areas, buses, branches,
devices and dc links of a network plus the analysis settings used by the
command-line tool.  Every table is validated against a fixed schema before
any model object is built; unknown keys are rejected with the key name and
its line in the file.

Layout::

    schema = 1
    [system]
    f1 = 50.0                      # base frequency, Hz

    [vsc_defaults]                 # optional, merged into every converter
    xf = 0.05

    [[area]]
    name = "ac"
    reference = "grid"

    [[bus]]
    name = "B1"
    area = "ac"

    [[branch]]
    name = "Z1"
    from = "B1"
    to = "PCC"
    x = 0.1                        # p.u. reactance at f1 (also r, b)

    [[device]]
    name = "VSC1"
    type = "vsc"                   # vsc | grid | shunt | hvdc
    bus = "B1"
    P = 1.0
    pll_bw = 10.0

    [[dc_link]]
    name = "dc"
    sending = "HVDC1"
    receiving = "HVDC2"

    [analysis]
    bus = "PCC"
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .components import DcLink, OperatingPoint, PassiveBranch, VscDevice
from .errors import ConfigError, ImpnetError
from .network import Area, Branch, Bus, DcLinkSpec, Device, GridSource, NetworkModel

__all__ = ["SCHEMA_VERSION", "AnalysisSettings", "NetworkConfig", "load_config", "parse_config"]

SCHEMA_VERSION = 1

_SYSTEM_KEYS = {"f1"}
_AREA_KEYS = {"name", "reference"}
_BUS_KEYS = {"name", "area"}
_BRANCH_KEYS = {"name", "from", "to", "r", "x", "b"}
_VSC_KEYS = {"P", "Q", "cc_bw", "pll_bw", "outer_bw", "q_bw", "mode", "xf", "rf",
             "dc_capacitance", "feedforward", "ff_bw", "decoupling", "vf_kp", "Udc"}
_DEVICE_KEYS = {
    "vsc": {"name", "type", "bus"} | _VSC_KEYS,
    "hvdc": {"name", "type", "bus", "role"} | _VSC_KEYS,
    "grid": {"name", "type", "bus", "r", "x", "voltage"},
    "shunt": {"name", "type", "bus", "r", "x", "b"},
}
_DC_LINK_KEYS = {"name", "sending", "receiving", "C", "Udc"}
_ANALYSIS_KEYS = {"bus", "source", "kpart", "candidates", "dc_link", "freq_min", "freq_max",
                  "freq_step", "sweep_buses", "seed", "random", "verify_freq", "density"}
_TOP_KEYS = {"schema", "name", "description", "system", "vsc_defaults", "area", "bus",
             "branch", "device", "dc_link", "analysis"}


@dataclass(frozen=True)
class AnalysisSettings:
    """Defaults for the command-line analyses (all overridable by flags)."""

    bus: str = "PCC"
    source: tuple | None = None
    kpart: tuple = (0.0, 0.2, 0.4, 0.6, 0.8)
    candidates: tuple = ()
    dc_link: str | None = None
    freq_min: float = 2.0
    freq_max: float = 100.0
    freq_step: float = 2.0
    sweep_buses: tuple = ()
    seed: int = 0
    random: int = 0
    verify_freq: tuple = (2.0, 10.0, 50.0, 100.0)
    density: int = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Validated config: the network model, analysis settings and source hash."""

    network: NetworkModel
    analysis: AnalysisSettings
    name: str
    sha256: str
    path: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)


class _Locator:
    """Map (table, index, key) to a 1-based line number in the source text."""

    def __init__(self, text):
        self.lines = text.splitlines()

    def _header(self, table, index):
        if table is None:
            return 0, len(self.lines)
        pat_arr = re.compile(rf"^\s*\[\[\s*{re.escape(table)}\s*\]\]")
        pat_tab = re.compile(rf"^\s*\[\s*{re.escape(table)}\s*\]")
        hits = [k for k, ln in enumerate(self.lines) if (pat_arr if index is not None else pat_tab).match(ln)]
        pos = index or 0
        if pos >= len(hits):
            return None, None
        start = hits[pos] + 1
        end = start
        while end < len(self.lines) and not re.match(r"^\s*\[", self.lines[end]):
            end += 1
        return start, end

    def line(self, table=None, index=None, key=None):
        start, end = self._header(table, index)
        if start is None:
            return None
        if key is None:
            return start  # header line (1-based is start because start = idx + 1)
        pat = re.compile(rf"^\s*[\"']?{re.escape(key)}[\"']?\s*=")
        for k in range(start, end):
            if pat.match(self.lines[k]):
                return k + 1
        return start


class _Reader:
    def __init__(self, text):
        self.loc = _Locator(text)

    def fail(self, msg, table=None, index=None, key=None):
        name = key if table is None else (f"{table}.{key}" if key else table)
        if index is not None and table is not None:
            name = f"{table}[{index}]" + (f".{key}" if key else "")
        raise ConfigError(msg, name, self.loc.line(table, index, key))

    def check_keys(self, d, allowed, table=None, index=None):
        if not isinstance(d, dict):
            self.fail("expected a table", table, index)
        for k in d:
            if k not in allowed:
                self.fail(f"unknown key {k!r}", table, index, k)

    def number(self, d, key, default=None, table=None, index=None, positive=False,
               nonneg=False):
        if key not in d:
            if default is None:
                self.fail("missing required key", table, index, key)
            return default
        val = d[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail("expected a number", table, index, key)
        val = float(val)
        if not math.isfinite(val):
            self.fail("value must be finite", table, index, key)
        if positive and not val > 0:
            self.fail("value must be positive", table, index, key)
        if nonneg and val < 0:
            self.fail("value must be non-negative", table, index, key)
        return val

    def string(self, d, key, table=None, index=None, default=None, choices=None):
        if key not in d:
            if default is None:
                self.fail("missing required key", table, index, key)
            return default
        val = d[key]
        if not isinstance(val, str):
            self.fail("expected a string", table, index, key)
        if choices is not None and val not in choices:
            self.fail(f"expected one of {sorted(choices)}", table, index, key)
        return val

    def boolean(self, d, key, default, table=None, index=None):
        if key not in d:
            return default
        if not isinstance(d[key], bool):
            self.fail("expected true or false", table, index, key)
        return d[key]


def _vsc_device(rd, d, table, index, omega1, role=None):
    kw = {}
    mode_default = "PQ" if role is None else ("VF" if role == "sending" else "DCV")
    mode = rd.string(d, "mode", table, index, default=mode_default, choices={"PQ", "DCV", "VF"})
    if role == "sending" and mode != "VF":
        rd.fail("a sending HVDC terminal must use mode 'VF'", table, index, "mode")
    if role == "receiving" and mode != "DCV":
        rd.fail("a receiving HVDC terminal must use mode 'DCV'", table, index, "mode")
    if role is None and mode != "PQ":
        rd.fail("ac-only converters support mode 'PQ'", table, index, "mode")
    for key in ("cc_bw", "pll_bw", "outer_bw", "ff_bw", "vf_kp"):
        if key in d:
            kw[key] = rd.number(d, key, table=table, index=index, nonneg=True)
    if "q_bw" in d:
        kw["q_bw"] = rd.number(d, "q_bw", table=table, index=index, nonneg=True)
    if "dc_capacitance" in d:
        kw["dc_capacitance"] = rd.number(d, "dc_capacitance", table=table, index=index,
                                         positive=True)
    if "xf" in d:
        kw["Lf"] = rd.number(d, "xf", table=table, index=index, positive=True) / omega1
    if "rf" in d:
        kw["Rf"] = rd.number(d, "rf", table=table, index=index, nonneg=True)
    for key in ("feedforward", "decoupling"):
        if key in d:
            kw[key] = rd.boolean(d, key, True, table, index)
    P = rd.number(d, "P", 0.0, table, index)
    Q = rd.number(d, "Q", 0.0, table, index)
    udc = rd.number(d, "Udc", 1.0, table, index, positive=True)
    if mode == "PQ":
        op = OperatingPoint(P0=P, Q0=Q)
    else:
        if "P" in d:
            rd.fail("the power of an HVDC terminal follows from the network", table, index, "P")
        op = OperatingPoint(Q0=Q, Udc0=udc)
    try:
        return VscDevice(mode=mode, op=op, omega1=omega1, **kw)
    except (ValueError, ImpnetError) as exc:
        rd.fail(str(exc), table, index)


def parse_config(text: str, path: str | None = None) -> NetworkConfig:
    """Parse and validate a TOML network description given as text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"invalid TOML: {exc}", None, int(m.group(1)) if m else None) from None
    rd = _Reader(text)
    rd.check_keys(data, _TOP_KEYS)
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        rd.fail(f"unsupported schema version {schema!r}", key="schema")
    system = data.get("system", {})
    rd.check_keys(system, _SYSTEM_KEYS, "system")
    f1 = rd.number(system, "f1", 50.0, "system", positive=True)
    omega1 = 2 * math.pi * f1

    defaults = data.get("vsc_defaults", {})
    rd.check_keys(defaults, _VSC_KEYS - {"P", "Q", "mode", "Udc"}, "vsc_defaults")

    def arr(name):
        val = data.get(name, [])
        if not isinstance(val, list):
            rd.fail("expected an array of tables ([[...]])", key=name)
        return val

    areas = []
    for k, a in enumerate(arr("area")):
        rd.check_keys(a, _AREA_KEYS, "area", k)
        areas.append(Area(rd.string(a, "name", "area", k), rd.string(a, "reference", "area", k)))
    buses = []
    for k, b in enumerate(arr("bus")):
        rd.check_keys(b, _BUS_KEYS, "bus", k)
        default_area = areas[0].name if len(areas) == 1 else None
        buses.append(Bus(rd.string(b, "name", "bus", k),
                         rd.string(b, "area", "bus", k, default=default_area)))
    branches = []
    for k, b in enumerate(arr("branch")):
        rd.check_keys(b, _BRANCH_KEYS, "branch", k)
        try:
            pb = PassiveBranch.from_reactance(
                rd.number(b, "x", 0.0, "branch", k, nonneg=True),
                rd.number(b, "r", 0.0, "branch", k, nonneg=True),
                rd.number(b, "b", 0.0, "branch", k, nonneg=True), omega1=omega1)
        except ImpnetError as exc:
            rd.fail(str(exc), "branch", k)
        branches.append(Branch(rd.string(b, "name", "branch", k), rd.string(b, "from", "branch", k),
                               rd.string(b, "to", "branch", k), pb))
    devices = []
    for k, d in enumerate(arr("device")):
        if not isinstance(d, dict):
            rd.fail("expected a table", "device", k)
        kind = rd.string(d, "type", "device", k, choices=set(_DEVICE_KEYS))
        rd.check_keys(d, _DEVICE_KEYS[kind], "device", k)
        name = rd.string(d, "name", "device", k)
        bus = rd.string(d, "bus", "device", k)
        role = None
        if kind in ("vsc", "hvdc"):
            merged = {**defaults, **d}
            if kind == "hvdc":
                role = rd.string(d, "role", "device", k, choices={"sending", "receiving"})
            model = _vsc_device(rd, merged, "device", k, omega1, role)
        else:
            try:
                pb = PassiveBranch.from_reactance(rd.number(d, "x", 0.0, "device", k, nonneg=True),
                                                  rd.number(d, "r", 0.0, "device", k, nonneg=True),
                                                  rd.number(d, "b", 0.0, "device", k, nonneg=True)
                                                  if kind == "shunt" else 0.0, omega1=omega1)
            except ImpnetError as exc:
                rd.fail(str(exc), "device", k)
            if kind == "grid":
                model = GridSource(pb, rd.number(d, "voltage", 1.0, "device", k, positive=True))
            else:
                model = pb
        devices.append(Device(name, bus, kind, model, role))
    links = []
    for k, lk in enumerate(arr("dc_link")):
        rd.check_keys(lk, _DC_LINK_KEYS, "dc_link", k)
        link = DcLink(rd.number(lk, "C", 0.02, "dc_link", k, positive=True),
                      rd.number(lk, "Udc", 1.0, "dc_link", k, positive=True))
        links.append(DcLinkSpec(rd.string(lk, "name", "dc_link", k),
                                rd.string(lk, "sending", "dc_link", k),
                                rd.string(lk, "receiving", "dc_link", k), link))

    an = data.get("analysis", {})
    rd.check_keys(an, _ANALYSIS_KEYS, "analysis")
    settings = _analysis(rd, an, links)
    try:
        net = NetworkModel(areas, buses, branches, devices, links, omega1=omega1)
    except ImpnetError as exc:
        raise ConfigError(f"invalid network: {exc}") from exc
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    name = data.get("name", Path(path).stem if path else "network")
    if not isinstance(name, str):
        rd.fail("expected a string", key="name")
    return NetworkConfig(net, settings, name, digest, path, data)


def _analysis(rd, an, links):
    t = "analysis"

    def str_list(key):
        val = an.get(key, [])
        if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
            rd.fail("expected a list of strings", t, key=key)
        return tuple(val)

    def num_list(key, default):
        if key not in an:
            return default
        val = an[key]
        if not isinstance(val, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
                for v in val):
            rd.fail("expected a list of finite numbers", t, key=key)
        return tuple(float(v) for v in val)

    kw = {}
    if "bus" in an:
        kw["bus"] = rd.string(an, "bus", t)
    if "source" in an:
        kw["source"] = str_list("source")
    kw["kpart"] = num_list("kpart", AnalysisSettings.kpart)
    if any(not 0.0 <= k < 1.0 for k in kw["kpart"]):
        rd.fail("partition factors must lie in [0, 1)", t, key="kpart")
    kw["candidates"] = str_list("candidates")
    kw["sweep_buses"] = str_list("sweep_buses")
    kw["verify_freq"] = num_list("verify_freq", AnalysisSettings.verify_freq)
    if "dc_link" in an:
        kw["dc_link"] = rd.string(an, "dc_link", t)
    elif links:
        kw["dc_link"] = links[0].name
    for key in ("freq_min", "freq_max", "freq_step"):
        if key in an:
            kw[key] = rd.number(an, key, table=t, positive=True)
    for key in ("seed", "random", "density"):
        if key in an:
            val = an[key]
            if isinstance(val, bool) or not isinstance(val, int) or val < 0:
                rd.fail("expected a non-negative integer", t, key=key)
            kw[key] = val
    s = AnalysisSettings(**kw)
    if s.freq_min >= s.freq_max:
        rd.fail("freq_min must be below freq_max", t, key="freq_min")
    if s.density < 1:
        rd.fail("density must be at least 1", t, key="density")
    return s


def load_config(path) -> NetworkConfig:
    """Read and validate a TOML network description from ``path``."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text, str(p))
