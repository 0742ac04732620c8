"""Fixed-step RK4 simulation of a consensus network with link faults and observers.

The network derivative is assembled from the agent-level functions in
:mod:`dacfdi.consensus` and :mod:`dacfdi.fdi`.  Because every piece is linear
in (state, inputs, faults), the assembled derivative is compiled once per
topology into matrices by probing it with unit vectors; the RK4 loop then
runs on those matrices.  The stage-wise recomputation of communicated values
is therefore exact, only cheaper.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .consensus import (
    AgentState,
    EstimatorDesign,
    Kind,
    ReferenceSignal,
    isac_derivative,
    rac_derivative,
    verify_lemma1,
)
from .fdi import (
    FaultModel,
    ObserverMatrices,
    accommodate_isac,
    accommodate_rac,
    build_extended,
    default_observer_poles,
    observer_derivative,
    uio_design,
)
from .graph import Graph, components, laplacian, remove_edge

log = logging.getLogger(__name__)

Link = tuple[int, int]


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TopologyEvent:
    time: float
    i: int
    j: int
    action: str = "remove_edge"

    def __post_init__(self):
        if self.action != "remove_edge":
            raise ValueError(f"unsupported topology action {self.action!r}")


@dataclass(frozen=True)
class Scenario:
    graph: Graph
    design: EstimatorDesign
    signals: tuple[ReferenceSignal, ...]
    omega: float = 1.5
    faults: tuple[FaultModel, ...] = ()
    events: tuple[TopologyEvent, ...] = ()
    monitored: str | tuple[Link, ...] = "all"
    accommodation: bool = False
    observer_poles: tuple[complex, ...] | None = None
    observer_k1: tuple[float, ...] | None = None
    x1_init: tuple[tuple[float, ...], ...] | None = None
    x2_init: tuple[tuple[float, ...], ...] | None = None
    z_init: tuple[tuple[Link, tuple[float, ...]], ...] = ()
    dt: float = 1e-3
    t_end: float = 50.0
    record_stride: int = 10
    window: tuple[float, float] = (40.0, 50.0)
    name: str = ""

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if len(self.signals) != self.graph.n:
            raise ValueError(f"{len(self.signals)} signals for {self.graph.n} nodes")
        if self.observer_poles is not None and self.observer_k1 is not None:
            raise ValueError("give observer poles or k1, not both")
        _steps(self.t_end, self.dt, "t_end")
        for ev in self.events:
            if not 0 <= ev.time <= self.t_end:
                raise ValueError(f"event time {ev.time} outside [0, {self.t_end}]")
            _steps(ev.time, self.dt, "event time")
        for f in self.faults:
            for a, b in f.links():
                if not self.graph.has_edge(a, b):
                    raise ValueError(f"fault on missing link {a}->{b}")
        for name, init, m in (("x1", self.x1_init, self.design.m1), ("x2", self.x2_init, self.design.m2)):
            if init is not None and (len(init) != self.graph.n or any(len(r) != m for r in init)):
                raise ValueError(f"{name} initial condition must be {self.graph.n} rows of length {m}")
        links = set(self.monitored_links())
        for link, z in self.z_init:
            if tuple(link) not in links:
                raise ValueError(f"initial observer state for unmonitored link {link}")

    @property
    def n(self) -> int:
        return self.graph.n

    def monitored_links(self) -> list[Link]:
        if self.monitored == "all":
            return self.graph.directed_links()
        out = sorted(tuple(l) for l in self.monitored)
        for a, b in out:
            if not self.graph.has_edge(a, b):
                raise ValueError(f"monitored link {a}->{b} is not an edge")
        return out

    def fault_links(self) -> list[Link]:
        out = []
        for f in self.faults:
            out.extend(f.links())
        if len(set(out)) != len(out):
            raise ValueError("two faults on the same directed link")
        return out

    def observer(self) -> ObserverMatrices:
        ext = build_extended(self.design)
        if self.observer_k1 is not None:
            return uio_design(ext, explicit_K1=self.observer_k1)
        poles = self.observer_poles or tuple(default_observer_poles(ext.n, self.omega))
        return uio_design(ext, observer_poles=poles)


def _steps(t: float, dt: float, what: str) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what} {t} is not a multiple of dt={dt}")
    return int(k)


class NetworkModel:
    """Stacked network state ``[X1 (n*m1), X2 (n*m2), z (n_obs*(m+1))]``.

    Inputs are ``[phi (n), f (one per faulty directed link)]``.  Observers
    whose link has been removed are frozen.
    """

    def __init__(self, sc: Scenario, graph: Graph, obs: ObserverMatrices,
                 obs_links: list[Link], fault_links: list[Link]):
        self.sc, self.graph, self.obs = sc, graph, obs
        self.design = sc.design
        self.obs_links = obs_links
        self.fault_links = fault_links
        self.fault_index = {l: k for k, l in enumerate(fault_links)}
        self.obs_index = {l: k for k, l in enumerate(obs_links)}
        self.n = graph.n
        self.m1, self.m2, self.mo = self.design.m1, self.design.m2, obs.n
        self.nx = self.n * (self.m1 + self.m2) + len(obs_links) * self.mo
        self.nu = self.n + len(fault_links)
        self.neighbors = {i: graph.neighbors(i) for i in range(1, self.n + 1)}
        self.live = [graph.has_edge(*l) for l in obs_links]

    def split(self, x):
        n, m1, m2 = self.n, self.m1, self.m2
        X1 = x[: n * m1].reshape(n, m1)
        X2 = x[n * m1: n * (m1 + m2)].reshape(n, m2)
        Z = x[n * (m1 + m2):].reshape(len(self.obs_links), self.mo)
        return X1, X2, Z

    def _f(self, u, link):
        k = self.fault_index.get(link)
        return 0.0 if k is None else u[self.n + k]

    def evaluate(self, x, u):
        """Returns ``(dx, nu, fhat, xtilde)`` built from the per-agent functions."""
        design, obs = self.design, self.obs
        n = self.n
        X1, X2, Z = self.split(x)
        phi = u[:n]
        isac = design.kind is Kind.ISAC
        h, g = design.h, design.g
        states = [AgentState(X1[i], X2[i]) for i in range(n)]

        # variable used in the consensus coupling, as sent by each agent
        if isac:
            shared = [float(h.C[0] @ X1[i]) for i in range(n)]
        else:
            shared = [float(g.C[0] @ X2[i]) for i in range(n)]

        def received(j, i):
            return shared[j - 1] + self._f(u, (j, i))

        fhat = np.full(len(self.obs_links), np.nan)
        xhat = np.zeros((len(self.obs_links), self.mo))
        for k, (l, i) in enumerate(self.obs_links):
            if self.live[k]:
                xhat[k] = Z[k] + obs.H[:, 0] * received(l, i)
                fhat[k] = xhat[k, -1]

        dX1 = np.zeros_like(X1)
        dX2 = np.zeros_like(X2)
        nu = np.zeros(n)
        second = np.zeros(n)  # mu (ISAC) or nu (RAC): the detection companion variable
        for i in range(1, n + 1):
            clean, pairs = [], []
            for j in self.neighbors[i]:
                k = self.obs_index.get((j, i))
                if self.sc.accommodation and k is not None:
                    pairs.append((received(j, i), fhat[k]))
                else:
                    clean.append(received(j, i))
            st = states[i - 1]
            if isac:
                if self.sc.accommodation:
                    out = accommodate_isac(design, st, phi[i - 1], shared[i - 1], clean, pairs)
                else:
                    out = isac_derivative(design, st, phi[i - 1], shared[i - 1], clean)
                dX1[i - 1], dX2[i - 1], nu[i - 1], second[i - 1] = out
            else:
                if self.sc.accommodation:
                    out = accommodate_rac(design, st, phi[i - 1], shared[i - 1], clean, pairs)
                else:
                    out = rac_derivative(design, st, phi[i - 1], shared[i - 1], clean)
                dX1[i - 1], dX2[i - 1], nu[i - 1], _ = out
                second[i - 1] = nu[i - 1]

        dZ = np.zeros_like(Z)
        xtilde = np.full((len(self.obs_links), self.mo), np.nan)
        for k, (l, i) in enumerate(self.obs_links):
            if not self.live[k]:
                continue
            f = self._f(u, (l, i))
            if isac:
                u_tilde = second[l - 1] + f
                x_true = np.append(X1[l - 1], f)
            else:
                u_tilde = -second[l - 1] + f
                x_true = np.append(X2[l - 1], f)
            dZ[k], _, _ = observer_derivative(obs, Z[k], u_tilde, received(l, i))
            xtilde[k] = x_true - xhat[k]
        dx = np.concatenate([dX1.ravel(), dX2.ravel(), dZ.ravel()])
        return dx, nu, fhat, xtilde.ravel()

    def compile(self):
        """Matrices with ``dx = M x + N u`` and ``out = P x + Q u``."""
        nx, nu = self.nx, self.nu

        def probe(x, u):
            dx, nu_, fh, xt = self.evaluate(x, u)
            return dx, np.concatenate([nu_, np.nan_to_num(fh), np.nan_to_num(xt)])

        dx0, out0 = probe(np.zeros(nx), np.zeros(nu))
        if np.any(dx0 != 0) or np.any(out0 != 0):
            raise RuntimeError("network derivative is not linear")
        cols_x = [probe(e, np.zeros(nu)) for e in np.eye(nx)]
        cols_u = [probe(np.zeros(nx), e) for e in np.eye(nu)]
        M = np.array([c[0] for c in cols_x]).T.reshape(nx, nx)
        N = np.array([c[0] for c in cols_u]).T.reshape(nx, nu)
        P = np.array([c[1] for c in cols_x]).T.reshape(-1, nx)
        Q = np.array([c[1] for c in cols_u]).T.reshape(-1, nu)
        return M, N, P, Q


@dataclass
class TimeSeries:
    times: np.ndarray
    nu: np.ndarray  # (T, n)
    phi: np.ndarray  # (T, n)
    target: np.ndarray  # (T, n): average over each node's current component
    obs_links: list[Link]
    fhat: np.ndarray  # (T, n_obs), NaN once a link is removed
    f_true: np.ndarray  # (T, n_obs)
    xtilde_norm: np.ndarray  # (T, n_obs)
    x2_norm: np.ndarray  # (T, n)
    final_components: list[list[int]]
    final_state: np.ndarray = field(repr=False)
    conditions_ok: bool = True

    @property
    def err(self) -> np.ndarray:
        return self.nu - self.target

    @property
    def n(self) -> int:
        return self.nu.shape[1]

    def component_targets(self) -> np.ndarray:
        """One column per final component, taken at its smallest node."""
        return np.column_stack([self.target[:, comp[0] - 1] for comp in self.final_components])


def _component_average(phi: np.ndarray, comps: list[list[int]]) -> np.ndarray:
    out = np.empty_like(phi)
    for comp in comps:
        idx = [c - 1 for c in comp]
        out[..., idx] = phi[..., idx].mean(axis=-1, keepdims=True)
    return out


def _initial_state(sc: Scenario, net: NetworkModel) -> np.ndarray:
    n = sc.n
    X1 = np.zeros((n, sc.design.m1)) if sc.x1_init is None else np.array(sc.x1_init, dtype=float)
    X2 = np.zeros((n, sc.design.m2)) if sc.x2_init is None else np.array(sc.x2_init, dtype=float)
    Z = np.zeros((len(net.obs_links), net.mo))
    for link, z in sc.z_init:
        Z[net.obs_index[tuple(link)]] = z
    return np.concatenate([X1.ravel(), X2.ravel(), Z.ravel()])


def linear_model(sc: Scenario, graph: Graph | None = None) -> tuple[NetworkModel, tuple]:
    """The assembled network and its matrices ``(M, N, P, Q)`` for ``graph`` (default: initial)."""
    net = NetworkModel(sc, graph or sc.graph, sc.observer(), sc.monitored_links(), sc.fault_links())
    return net, net.compile()


def rk4_step(M, x, b0, bh, b1, dt):
    """One classical RK4 step of ``x' = M x + b(t)``; works on vectors or column stacks."""
    k1 = M @ x + b0
    k2 = M @ (x + 0.5 * dt * k1) + bh
    k3 = M @ (x + 0.5 * dt * k2) + bh
    k4 = M @ (x + dt * k3) + b1
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_propagator(M, N, dt):
    """``(Phi, W0, Wh, W1)`` with ``rk4_step(x) = Phi x + W0 u(t) + Wh u(t+dt/2) + W1 u(t+dt)``."""
    nx, nu = N.shape
    I, Zx, Zu = np.eye(nx), np.zeros((nx, nx)), np.zeros((nx, nu))
    Phi = rk4_step(M, I, Zx, Zx, Zx, dt)
    W0 = rk4_step(M, Zu, N, Zu, Zu, dt)
    Wh = rk4_step(M, Zu, Zu, N, Zu, dt)
    W1 = rk4_step(M, Zu, Zu, Zu, N, dt)
    return Phi, W0, Wh, W1


_CHUNK = 4096


def run(sc: Scenario) -> TimeSeries:
    graph = sc.graph
    spectrum = laplacian(graph).eigenvalues
    report = verify_lemma1(sc.design.h_tf, sc.design.g_tf, sc.design.d, spectrum, sc.signals)
    if not (report.overall and report.premises_ok):
        log.warning("design conditions not met for %s; running anyway", sc.name or "scenario")

    obs = sc.observer()
    obs_links = sc.monitored_links()
    fault_links = sc.fault_links()
    dt = sc.dt
    nsteps = _steps(sc.t_end, dt, "t_end")
    event_steps: dict[int, list[TopologyEvent]] = {}
    for ev in sorted(sc.events, key=lambda e: e.time):
        event_steps.setdefault(_steps(ev.time, dt, "event time"), []).append(ev)

    # Step k is faulty iff t_k >= onset, so a jump never falls inside an RK4 step.
    link_faults = [f for f in sc.faults for _ in f.links()]
    onset_steps = np.array([math.ceil(f.onset / dt - 1e-9) for f in link_faults], dtype=int)

    def inputs(t: np.ndarray, k: np.ndarray) -> np.ndarray:
        """Rows of ``[phi, f]`` at times ``t`` under the gates of steps ``k``."""
        cols = [np.broadcast_to(s(t), t.shape) for s in sc.signals]
        for ft, ks in zip(link_faults, onset_steps):
            cols.append(np.where(k >= ks, ft.shape(t), 0.0))
        return np.column_stack(cols)

    n, nobs = sc.n, len(obs_links)
    obs_fault = np.array([fault_links.index(l) if l in fault_links else -1 for l in obs_links], dtype=int)

    rec_idx = list(range(0, nsteps + 1, sc.record_stride))
    if rec_idx[-1] != nsteps:
        rec_idx.append(nsteps)
    rec_set = set(rec_idx)
    T = len(rec_idx)
    times = np.array(rec_idx) * dt
    nu_rec = np.zeros((T, n))
    phi_rec = np.zeros((T, n))
    tgt_rec = np.zeros((T, n))
    fhat_rec = np.zeros((T, nobs))
    ftrue_rec = np.zeros((T, nobs))
    xt_rec = np.zeros((T, nobs))
    x2_rec = np.zeros((T, n))
    r = 0

    net = NetworkModel(sc, graph, obs, obs_links, fault_links)
    x = _initial_state(sc, net)
    comps = components(graph)

    def record(k, x, u):
        nonlocal r
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"divergence at t={k * dt:.6g}")
        with np.errstate(over="ignore", invalid="ignore"):
            out = P @ x + Q @ u
        if not np.all(np.isfinite(out)):
            raise DivergenceError(f"divergence at t={k * dt:.6g} (non-finite output)")
        dead = ~np.array(net.live, dtype=bool)
        fh = out[n: n + nobs].copy()
        xtn = np.linalg.norm(out[n + nobs:].reshape(nobs, net.mo), axis=1)
        ftrue = np.where(obs_fault >= 0, u[n + np.maximum(obs_fault, 0)] if fault_links else 0.0, 0.0)
        for arr in (fh, xtn, ftrue):
            arr[dead] = np.nan
        nu_rec[r] = out[:n]
        fhat_rec[r] = fh
        xt_rec[r] = xtn
        ftrue_rec[r] = ftrue
        phi_rec[r] = u[:n]
        tgt_rec[r] = _component_average(u[:n], comps)
        x2_rec[r] = np.linalg.norm(net.split(x)[1], axis=1)
        r += 1

    bounds = sorted({0, nsteps, *[k for k in event_steps if k < nsteps]})
    for seg_start, seg_end in zip(bounds[:-1], bounds[1:]):
        for ev in event_steps.get(seg_start, []):
            graph = remove_edge(graph, ev.i, ev.j)
        if seg_start in event_steps:
            comps = components(graph)
            net = NetworkModel(sc, graph, obs, obs_links, fault_links)
        M, N, P, Q = net.compile()
        Phi, W0, Wh, W1 = rk4_propagator(M, N, dt)
        for c0 in range(seg_start, seg_end, _CHUNK):
            ks = np.arange(c0, min(c0 + _CHUNK, seg_end))
            t = ks * dt
            U0 = inputs(t, ks)
            drive = U0 @ W0.T + inputs(t + 0.5 * dt, ks) @ Wh.T + inputs(t + dt, ks) @ W1.T
            for row, k in enumerate(ks):
                if k in rec_set:
                    record(k, x, U0[row])
                x = Phi @ x + drive[row]
    for ev in event_steps.get(nsteps, []):
        graph = remove_edge(graph, ev.i, ev.j)
        comps = components(graph)
    if nsteps in event_steps:
        net = NetworkModel(sc, graph, obs, obs_links, fault_links)
        _, _, P, Q = net.compile()
    record(nsteps, x, inputs(np.array([nsteps * dt]), np.array([nsteps]))[0])

    return TimeSeries(
        times=times, nu=nu_rec, phi=phi_rec, target=tgt_rec, obs_links=obs_links,
        fhat=fhat_rec, f_true=ftrue_rec, xtilde_norm=xt_rec, x2_norm=x2_rec,
        final_components=comps, final_state=x,
        conditions_ok=bool(report.overall and report.premises_ok),
    )


@dataclass
class MetricsReport:
    windows: list[tuple[float, float]]
    rms_err: dict[tuple[float, float], np.ndarray]
    max_x2_norm: dict[tuple[float, float], np.ndarray]
    fhat_rms_err: dict[tuple[float, float], np.ndarray]
    obs_links: list[Link]

    def as_dict(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for a, b in self.windows:
            tag = f"{a:g}_{b:g}"
            for i, v in enumerate(self.rms_err[(a, b)], start=1):
                out[f"rms_err_node{i}_{tag}"] = float(v)
            out[f"max_rms_err_{tag}"] = float(np.max(self.rms_err[(a, b)]))
            for i, v in enumerate(self.max_x2_norm[(a, b)], start=1):
                out[f"max_x2norm_node{i}_{tag}"] = float(v)
            for (l, i), v in zip(self.obs_links, self.fhat_rms_err[(a, b)]):
                out[f"rms_fhat_err_{l}_{i}_{tag}"] = float(v)
        return out


def _window(ts: TimeSeries, a: float, b: float) -> np.ndarray:
    if a > b:
        raise ValueError(f"window [{a}, {b}] is reversed")
    eps = 1e-9 * max(1.0, abs(b))
    mask = (ts.times >= a - eps) & (ts.times <= b + eps)
    if not mask.any():
        raise ValueError(f"no samples in window [{a}, {b}]")
    return mask


def rms(x: np.ndarray, axis=0) -> np.ndarray:
    return np.sqrt(np.mean(np.square(x), axis=axis))


def metrics(ts: TimeSeries, windows: Sequence[tuple[float, float]]) -> MetricsReport:
    windows = [(float(a), float(b)) for a, b in windows]
    rep = MetricsReport(windows, {}, {}, {}, list(ts.obs_links))
    for a, b in windows:
        m = _window(ts, a, b)
        rep.rms_err[(a, b)] = rms(ts.err[m])
        rep.max_x2_norm[(a, b)] = np.max(ts.x2_norm[m], axis=0)
        rep.fhat_rms_err[(a, b)] = rms(ts.fhat[m] - ts.f_true[m]) if ts.fhat.size else np.zeros(0)
    return rep


def step_convergence_check(sc: Scenario, dt_list: Sequence[float]) -> float:
    """Observed order from successive final-state differences (Richardson ratio)."""
    if len(dt_list) < 3:
        raise ValueError("need at least three step sizes")
    if sc.events or sc.faults:
        raise ValueError("convergence check needs a smooth scenario (no events or faults)")
    dts = sorted(dt_list, reverse=True)
    finals = []
    for dt in dts:
        s = replace(sc, dt=dt, record_stride=_steps(sc.t_end, dt, "t_end"))
        finals.append(run(s).final_state)
    diffs = [np.linalg.norm(finals[k] - finals[k + 1]) for k in range(len(finals) - 1)]
    slope = np.polyfit(np.log(dts[:-1]), np.log(diffs), 1)[0]
    return float(slope)
