"""Command line: ``dacfdi run|check|design|export``.

Exit codes: 0 success, 1 usage or configuration error, 2 divergence,
3 failed design check.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .consensus import verify_lemma1
from .fdi import build_extended, uio_existence_check
from .graph import laplacian
from .lti import is_hurwitz
from .scenario_file import ScenarioError, dump_scenario, load_scenario
from .scenarios import BUILTINS, VARIANTS, builtin
from .sim import DivergenceError, Scenario, TimeSeries, metrics, run

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("dacfdi")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def resolve_scenario(ref: str, dt: float | None = None, t_end: float | None = None) -> Scenario:
    """A scenario file path, or a builtin name such as ``example1_isac/accommodated``."""
    path = Path(ref)
    if path.exists():
        sc = load_scenario(path)
    elif ref.partition("/")[0] in BUILTINS:
        try:
            sc = builtin(ref)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    else:
        raise ScenarioError(f"no such scenario file or builtin: {ref}")
    kw = {}
    if dt is not None:
        kw["dt"] = dt
    if t_end is not None:
        kw["t_end"] = t_end
        a, b = sc.window
        kw["window"] = (min(a, t_end), min(b, t_end))
        kept = tuple(ev for ev in sc.events if ev.time <= t_end)
        if kept != sc.events:
            log.info("dropping %d topology event(s) after t_end=%g", len(sc.events) - len(kept), t_end)
            kw["events"] = kept
    if kw:
        try:
            sc = replace(sc, **kw)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    return sc


def fmt(x: float) -> str:
    return "%.9g" % x


def metric_windows(sc: Scenario) -> list[tuple[float, float]]:
    wins = [tuple(sc.window)]
    if sc.t_end >= 10:
        wins.append((0.0, 10.0))
    if sc.faults:
        a = max(f.onset for f in sc.faults) + 10.0
        if a < sc.t_end:
            wins.append((a, sc.t_end))
    seen = []
    for w in wins:
        if w not in seen:
            seen.append(w)
    return seen


def metrics_document(sc: Scenario, ts: TimeSeries) -> dict[str, float]:
    wins = metric_windows(sc)
    rep = metrics(ts, wins)
    doc = rep.as_dict()
    if (0.0, 10.0) in rep.max_x2_norm and tuple(sc.window) != (0.0, 10.0):
        base = rep.max_x2_norm[(0.0, 10.0)]
        late = rep.max_x2_norm[tuple(sc.window)]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(base > 0, late / base, np.where(late > 0, np.inf, 1.0))
        doc["x2norm_growth"] = float(np.max(ratio))
    doc["conditions_ok"] = float(ts.conditions_ok)
    return doc


def write_trajectory(ts: TimeSeries, path: Path) -> None:
    n = ts.n
    comp = ts.component_targets()
    header = ["t"] + [f"nu_{i}" for i in range(1, n + 1)] + [f"err_{i}" for i in range(1, n + 1)]
    header += [f"phibar_{k}" for k in range(1, comp.shape[1] + 1)]
    header += [f"fhat_{a}_{b}" for a, b in ts.obs_links]
    header += [f"x2norm_{i}" for i in range(1, n + 1)]
    data = np.hstack([ts.times[:, None], ts.nu, ts.err, comp, ts.fhat, ts.x2_norm])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([fmt(v) for v in row])


def cmd_run(args) -> int:
    sc = resolve_scenario(args.scenario, args.dt, args.t_end)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        ts = run(sc)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_trajectory(ts, out / "trajectory.csv")
    doc = metrics_document(sc, ts)
    with open(out / "metrics.txt", "w", encoding="utf-8") as fh:
        for k, v in doc.items():
            fh.write(f"{k} = {fmt(v)}\n")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'metrics.txt'}")
    a, b = sc.window
    print(f"max steady-state RMS error over [{a:g}, {b:g}]: {fmt(doc[f'max_rms_err_{a:g}_{b:g}'])}")
    return EXIT_OK


def check_report(sc: Scenario) -> tuple[bool, list[str]]:
    d = sc.design
    lap = laplacian(sc.graph)
    rep = verify_lemma1(d.h_tf, d.g_tf, d.d, lap.eigenvalues, sc.signals)
    lines = [f"scenario: {sc.name or '(unnamed)'}  kind={d.kind.value}  nodes={sc.n}",
             "laplacian eigenvalues: " + ", ".join(fmt(v) for v in lap.eigenvalues),
             f"lambda_2 = {fmt(lap.algebraic_connectivity)}"]
    for which, tf in (("h", d.h_tf), ("g", d.g_tf)):
        if not tf.is_coprime():
            lines.append(f"warning: {which}(s) numerator and denominator share a root")
    lines += rep.lines()
    ext = build_extended(d)
    uio = uio_existence_check(ext)
    lines.append(f"UIO rank(CE) = rank(E): {'PASS' if uio.rank_ok else 'FAIL'} (CE = {fmt(uio.CE)})")
    zs = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in uio.zeros) or "none"
    lines.append(f"UIO invariant zeros strictly stable: {'PASS' if uio.zeros_ok else 'FAIL'} ({zs})")
    ok = rep.overall and rep.premises_ok and uio.ok
    lines.append(f"all checks: {'PASS' if ok else 'FAIL'}")
    return ok, lines


def cmd_check(args) -> int:
    sc = resolve_scenario(args.scenario)
    ok, lines = check_report(sc)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_CHECK


def _mat(name: str, M: np.ndarray) -> list[str]:
    rows = ["  [" + ", ".join("%.6g" % (v + 0.0) for v in r) + "]" for r in np.atleast_2d(M)]
    return [f"{name} ="] + rows


def cmd_design(args) -> int:
    sc = resolve_scenario(args.scenario)
    ext = build_extended(sc.design)
    uio = uio_existence_check(ext)
    if not uio.rank_ok:
        print("existence check failed: rank(CE) != rank(E)", file=sys.stderr)
        return EXIT_CHECK
    if not uio.zeros_ok:
        print(f"existence check failed: invariant zeros not strictly stable {uio.zeros}", file=sys.stderr)
        return EXIT_CHECK
    try:
        obs = sc.observer()
    except ValueError as exc:
        print(f"observer design failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    lines = [f"extended system ({ext.kind.value}):"]
    lines += _mat("A", ext.A) + _mat("B", ext.B.T) + _mat("C", ext.C) + _mat("E", ext.E.T)
    lines.append("observer:")
    for name in ("H", "T", "F", "K1", "K2", "K"):
        M = getattr(obs, name)
        lines += _mat(name + ("^T" if M.shape[1] == 1 else ""), M.T if M.shape[1] == 1 else M)
    ev = np.linalg.eigvals(obs.F)
    lines.append("eig(F) = " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in ev))
    ok, worst = is_hurwitz(obs.F)
    lines.append(f"F Hurwitz: {'yes' if ok else 'no'} (max real part {worst:.6g})")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_export(args) -> int:
    sc = resolve_scenario(args.scenario)
    text = dump_scenario(sc)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    names = ", ".join(f"{b}[/{'|'.join(VARIANTS)}]" for b in sorted(BUILTINS))
    p = _Parser(prog="dacfdi", description="Fault detection and accommodation for dynamic average consensus.",
                epilog=f"SCENARIO is a TOML file or a builtin: {names}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate and write trajectory.csv and metrics.txt")
    r.add_argument("scenario")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--dt", type=float)
    r.add_argument("--t-end", type=float, dest="t_end")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="verify the consensus design conditions and UIO existence")
    c.add_argument("scenario")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("design", help="print the observer matrices")
    d.add_argument("scenario")
    d.set_defaults(func=cmd_design)

    e = sub.add_parser("export", help="write a scenario (e.g. a builtin) as a TOML file")
    e.add_argument("scenario")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
