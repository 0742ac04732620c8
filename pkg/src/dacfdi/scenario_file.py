"""Scenario files: TOML with the sections graph, estimator, signals, faults,
events, observer, initial and run.

All coefficient lists are ascending powers, ``[c0, c1, c2]`` = c0 + c1 s + c2 s^2.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .consensus import EstimatorDesign, Kind, ReferenceSignal, default_design, staggered_sinusoids
from .fdi import FaultModel
from .graph import Graph, nine_node_graph
from .lti import Polynomial, TransferFunction
from .sim import Scenario, TopologyEvent

SECTIONS = ("graph", "estimator", "signals", "faults", "events", "observer", "initial", "run")


class ScenarioError(ValueError):
    """Configuration problem, carrying the offending line when it is known."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


class _Locator:
    """Maps (section, occurrence, key) to a 1-based line number in the source."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def find(self, section: str, key: str | None = None, index: int = 0) -> int | None:
        header = re.compile(r"^\s*\[\[?\s*([A-Za-z0-9_.]+)\s*\]\]?")
        current, seen, hit_section = None, -1, None
        for no, line in enumerate(self.lines, start=1):
            m = header.match(line)
            if m:
                current = m.group(1)
                if current == section:
                    seen += 1
                    if seen == index:
                        hit_section = no
                continue
            if key and current == section and seen == index and re.match(rf"^\s*{re.escape(key)}\s*=", line):
                return no
        return hit_section


class _Reader:
    def __init__(self, doc: dict, loc: _Locator):
        self.doc, self.loc = doc, loc

    def fail(self, section, key, msg, index=0):
        raise ScenarioError(f"[{section}] {key}: {msg}" if key else f"[{section}] {msg}",
                            self.loc.find(section, key, index))

    def get(self, table: dict, section: str, key: str, kind, default=..., index=0):
        if key not in table:
            if default is ...:
                self.fail(section, key, "missing", index)
            return default
        v = table[key]
        try:
            return kind(v)
        except (TypeError, ValueError) as exc:
            self.fail(section, key, str(exc) or f"bad value {v!r}", index)


def _num(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    return v


def _bool(v) -> bool:
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def _str(v) -> str:
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _nums(v) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise ValueError(f"expected a list of numbers, got {v!r}")
    return tuple(_num(x) for x in v)


def _matrix(v) -> tuple[tuple[float, ...], ...]:
    if not isinstance(v, list):
        raise ValueError(f"expected a list of lists, got {v!r}")
    return tuple(_nums(r) for r in v)


def _pair(v) -> tuple[int, int]:
    if not isinstance(v, list) or len(v) != 2:
        raise ValueError(f"expected a pair [i, j], got {v!r}")
    return _int(v[0]), _int(v[1])


def _pairs(v) -> tuple[tuple[int, int], ...]:
    if not isinstance(v, list):
        raise ValueError(f"expected a list of [i, j] pairs, got {v!r}")
    return tuple(_pair(x) for x in v)


def _complex(v) -> complex:
    if isinstance(v, list):
        if len(v) != 2:
            raise ValueError(f"complex value must be [re, im], got {v!r}")
        return complex(_num(v[0]), _num(v[1]))
    return complex(_num(v), 0.0)


def parse_scenario(text: str, name: str = "") -> Scenario:
    loc = _Locator(text)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"syntax error: {exc}", int(m.group(1)) if m else None) from None
    for key in doc:
        if key not in SECTIONS:
            raise ScenarioError(f"unknown section [{key}]", loc.find(key))
    rd = _Reader(doc, loc)

    g = doc.get("graph", {})
    if g.get("builtin") is not None:
        if rd.get(g, "graph", "builtin", _str) != "paper9":
            rd.fail("graph", "builtin", "only 'paper9' is built in")
        graph = nine_node_graph()
    else:
        n = rd.get(g, "graph", "nodes", _int)
        edges = rd.get(g, "graph", "edges", _pairs, ())
        try:
            graph = Graph(n, edges)
        except ValueError as exc:
            rd.fail("graph", "edges", str(exc))

    est = doc.get("estimator", {})
    omega = rd.get(est, "estimator", "omega", _num, 1.5)
    if omega <= 0:
        rd.fail("estimator", "omega", "must be positive")
    kind_s = rd.get(est, "estimator", "kind", _str, "isac")
    if kind_s not in ("isac", "rac"):
        rd.fail("estimator", "kind", "must be 'isac' or 'rac'")
    base = default_design(Kind.ISAC, omega)
    defaults = {"h_num": base.h_tf.num.coeffs, "h_den": base.h_tf.den.coeffs,
                "g_num": base.g_tf.num.coeffs, "g_den": base.g_tf.den.coeffs, "d": base.d.coeffs}
    co = {k: rd.get(est, "estimator", k, _nums, v) for k, v in defaults.items()}
    tfs = {}
    for which in ("h", "g"):
        try:
            tfs[which] = TransferFunction.from_coeffs(co[f"{which}_num"], co[f"{which}_den"])
        except ValueError as exc:
            rd.fail("estimator", f"{which}_den", str(exc))
    try:
        design = EstimatorDesign(tfs["h"], tfs["g"], Polynomial(co["d"]), Kind(kind_s))
    except ValueError as exc:
        rd.fail("estimator", "kind", str(exc))

    sig = doc.get("signals", {"builtin": "eq23"})
    if "builtin" in sig:
        if rd.get(sig, "signals", "builtin", _str) != "eq23":
            rd.fail("signals", "builtin", "only 'eq23' is built in")
        if graph.n != 9:
            rd.fail("signals", "builtin", "eq23 signals need 9 nodes")
        signals = staggered_sinusoids(omega)
    else:
        amp = rd.get(sig, "signals", "amplitude", _nums)
        phase = rd.get(sig, "signals", "phase", _nums, (0.0,) * len(amp))
        wave = rd.get(sig, "signals", "waveform", lambda v: tuple(_str(x) for x in v), ("sin",) * len(amp))
        freq = rd.get(sig, "signals", "frequency", _nums, (omega,) * len(amp))
        if not len(amp) == len(phase) == len(wave) == len(freq) == graph.n:
            rd.fail("signals", "amplitude", f"need one entry per node ({graph.n})")
        try:
            signals = tuple(ReferenceSignal(*args) for args in zip(amp, phase, freq, wave))
        except ValueError as exc:
            rd.fail("signals", "waveform", str(exc))

    faults = []
    raw = doc.get("faults", [])
    if not isinstance(raw, list):
        rd.fail("faults", None, "use [[faults]] tables")
    for k, f in enumerate(raw):
        args = dict(
            source=rd.get(f, "faults", "from", _int, index=k),
            target=rd.get(f, "faults", "to", _int, index=k),
            onset=rd.get(f, "faults", "onset", _num, 0.0, index=k),
            waveform=rd.get(f, "faults", "waveform", _str, "cos", index=k),
            amplitude=rd.get(f, "faults", "amplitude", _num, 1.0, index=k),
            frequency=rd.get(f, "faults", "frequency", _num, 0.0, index=k),
            phase=rd.get(f, "faults", "phase", _num, 0.0, index=k),
            symmetric=rd.get(f, "faults", "symmetric", _bool, False, index=k),
        )
        try:
            fm = FaultModel(**args)
        except ValueError as exc:
            rd.fail("faults", "waveform", str(exc), k)
        for a, b in fm.links():
            if not graph.has_edge(a, b):
                rd.fail("faults", "from", f"link {a}->{b} is not an edge", k)
        faults.append(fm)

    events = []
    raw = doc.get("events", [])
    if not isinstance(raw, list):
        rd.fail("events", None, "use [[events]] tables")
    for k, e in enumerate(raw):
        action = rd.get(e, "events", "action", _str, "remove_edge", index=k)
        if action != "remove_edge":
            rd.fail("events", "action", f"unsupported action {action!r}", k)
        events.append(TopologyEvent(rd.get(e, "events", "time", _num, index=k),
                                    rd.get(e, "events", "i", _int, index=k),
                                    rd.get(e, "events", "j", _int, index=k)))

    ob = doc.get("observer", {})
    poles = rd.get(ob, "observer", "poles", lambda v: tuple(_complex(x) for x in v), None)
    k1 = rd.get(ob, "observer", "k1", _nums, None)
    if poles is not None and k1 is not None:
        rd.fail("observer", "k1", "give poles or k1, not both")
    monitored: Any = ob.get("monitored", "all")
    if monitored != "all":
        monitored = rd.get(ob, "observer", "monitored", _pairs)

    ini = doc.get("initial", {})
    x1 = rd.get(ini, "initial", "x1", _matrix, None)
    x2 = rd.get(ini, "initial", "x2", _matrix, None)
    z_init = []
    for k, z in enumerate(ini.get("z", [])):
        z_init.append(((rd.get(z, "initial.z", "from", _int, index=k),
                        rd.get(z, "initial.z", "to", _int, index=k)),
                       rd.get(z, "initial.z", "value", _nums, index=k)))

    run = doc.get("run", {})
    kw = dict(
        dt=rd.get(run, "run", "dt", _num, 1e-3),
        t_end=rd.get(run, "run", "t_end", _num, 50.0),
        accommodation=rd.get(run, "run", "accommodation", _bool, False),
        record_stride=rd.get(run, "run", "record_stride", _int, 10),
        window=rd.get(run, "run", "window", _nums, (40.0, 50.0)),
    )
    if len(kw["window"]) != 2:
        rd.fail("run", "window", "must be [t_a, t_b]")
    try:
        return Scenario(
            graph=graph, design=design, signals=signals, omega=omega,
            faults=tuple(faults), events=tuple(events), monitored=monitored,
            observer_poles=poles, observer_k1=k1,
            x1_init=x1, x2_init=x2, z_init=tuple(z_init),
            name=rd.get(run, "run", "name", _str, name), **kw,
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from None


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("cannot serialize non-finite number")
        return repr(v)
    if isinstance(v, complex):
        return f"[{_fmt(v.real)}, {_fmt(v.imag)}]"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def dump_scenario(sc: Scenario) -> str:
    """TOML text that parses back to an equal Scenario."""
    d = sc.design
    out = ["# coefficient lists are ascending powers: [c0, c1, c2] = c0 + c1*s + c2*s^2", ""]

    def table(header, items):
        out.append(header)
        out.extend(f"{k} = {_fmt(v)}" for k, v in items)
        out.append("")

    table("[graph]", [("nodes", sc.graph.n), ("edges", [list(e) for e in sc.graph.sorted_edges()])])
    table("[estimator]", [
        ("kind", d.kind.value), ("omega", sc.omega),
        ("h_num", list(d.h_tf.num.coeffs)), ("h_den", list(d.h_tf.den.coeffs)),
        ("g_num", list(d.g_tf.num.coeffs)), ("g_den", list(d.g_tf.den.coeffs)),
        ("d", list(d.d.coeffs)),
    ])
    table("[signals]", [
        ("amplitude", [s.amplitude for s in sc.signals]),
        ("phase", [s.phase for s in sc.signals]),
        ("frequency", [s.frequency for s in sc.signals]),
        ("waveform", [s.waveform for s in sc.signals]),
    ])
    for f in sc.faults:
        table("[[faults]]", [
            ("from", f.source), ("to", f.target), ("onset", float(f.onset)),
            ("waveform", f.waveform), ("amplitude", float(f.amplitude)),
            ("frequency", float(f.frequency)), ("phase", float(f.phase)),
            ("symmetric", f.symmetric),
        ])
    for e in sc.events:
        table("[[events]]", [("time", float(e.time)), ("action", e.action), ("i", e.i), ("j", e.j)])
    obs = []
    if sc.observer_poles is not None:
        obs.append(("poles", [complex(p) for p in sc.observer_poles]))
    if sc.observer_k1 is not None:
        obs.append(("k1", list(sc.observer_k1)))
    obs.append(("monitored", "all" if sc.monitored == "all" else [list(l) for l in sc.monitored]))
    table("[observer]", obs)
    ini = []
    if sc.x1_init is not None:
        ini.append(("x1", [list(r) for r in sc.x1_init]))
    if sc.x2_init is not None:
        ini.append(("x2", [list(r) for r in sc.x2_init]))
    if ini:
        table("[initial]", ini)
    for (a, b), z in sc.z_init:
        table("[[initial.z]]", [("from", a), ("to", b), ("value", list(z))])
    table("[run]", [
        ("dt", float(sc.dt)), ("t_end", float(sc.t_end)), ("accommodation", sc.accommodation),
        ("record_stride", sc.record_stride), ("window", [float(w) for w in sc.window]),
        ("name", sc.name),
    ])
    return "\n".join(out)
