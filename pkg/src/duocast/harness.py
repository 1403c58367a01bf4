"""Scenario-driven simulation: engines, stability diagnostics, sweeps.

A Scenario bundles a channel, arrival rates, a policy choice, and run
parameters.  Two engines execute it: a fast counts engine (`kernel`) that
tracks queue lengths only, and a reference packets engine (`queuenet` +
`policies`) that moves identified packets and supports the decodability
audit.  Both consume the same per-slot random matrix in the same order, so
a scenario produces the identical trace under either engine.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernel
from .channel import (
    ChannelModel,
    ErasureStats,
    cond_erasure_visible,
    load_channel,
    stationary_distribution,
)
from .lp import LinearProgram, solve
from .policies import (
    ACTION_SETS,
    Observation,
    maxweight_decide,
    per_state_memoryless_decide,
    probabilistic_decide,
)
from .queuenet import QueueNetwork, apply_slot, audit_decodability
from .regions import (
    LINKS,
    RatePoint,
    hidden_window_stats,
    region_membership,
    region_memoryless_fb,
    synthesize_policy,
)

__all__ = [
    "Scenario",
    "SimTrace",
    "StabilityVerdict",
    "SplitAllocation",
    "run",
    "stability_verdict",
    "throughput_check",
    "sweep",
    "sweep_to_csv",
    "per_state_split",
    "prediction_gap",
]

_POLICY_KINDS = ("maxweight", "probabilistic", "per_state")
_ENGINES = ("counts", "packets")


def _default_policy() -> dict:
    return {"kind": "maxweight", "action_set": "A5"}


@dataclass
class Scenario:
    """One reproducible simulation setup.

    ``channel`` is a `load_channel` document.  ``policy`` is one of
    {"kind": "maxweight", "action_set": "A2"|"A3"|"A5"},
    {"kind": "probabilistic", "target": [r1, r2], "window_len": L}, or
    {"kind": "per_state"} (visible state, packets engine only).
    """

    channel: dict
    rates: tuple[float, float]
    horizon: int
    seed: int = 0
    visible: bool = True
    delay: int = 1
    policy: dict = field(default_factory=_default_policy)
    stride: int | None = None
    engine: str = "counts"
    movement_log: str | None = None

    def __post_init__(self) -> None:
        self.rates = (float(self.rates[0]), float(self.rates[1]))
        if not (0 <= self.rates[0] <= 1 and 0 <= self.rates[1] <= 1):
            raise ValueError("arrival rates must lie in [0, 1]")
        self.horizon = int(self.horizon)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        self.delay = int(self.delay)
        if self.delay < 1:
            raise ValueError("delay must be at least 1")
        if self.engine not in _ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.stride is not None and int(self.stride) < 1:
            raise ValueError("stride must be positive")
        kind = self.policy.get("kind")
        if kind not in _POLICY_KINDS:
            raise ValueError(f"unknown policy kind {kind!r}")
        if kind == "maxweight":
            if self.policy.get("action_set", "A5") not in ACTION_SETS:
                raise ValueError("action_set must be A2, A3, or A5")
        elif kind == "probabilistic":
            if not self.visible and self.delay != 1:
                raise ValueError(
                    "probabilistic policy on a hidden model requires delay 1"
                )
        elif kind == "per_state":
            if self.engine != "packets":
                raise ValueError("per_state policy needs the packets engine")
            if not self.visible:
                raise ValueError("per_state policy needs a visible state")

    def model(self) -> ChannelModel:
        return load_channel(self.channel)

    @classmethod
    def from_json(cls, source: str | Path | dict, **overrides) -> "Scenario":
        doc = dict(
            json.loads(Path(source).read_text())
            if isinstance(source, (str, Path))
            else source
        )
        doc.update({k: v for k, v in overrides.items() if v is not None})
        doc["rates"] = tuple(doc["rates"])
        return cls(**doc)

    def to_json(self) -> str:
        doc = {
            "channel": self.channel,
            "rates": list(self.rates),
            "horizon": self.horizon,
            "seed": self.seed,
            "visible": self.visible,
            "delay": self.delay,
            "policy": self.policy,
            "engine": self.engine,
        }
        if self.stride is not None:
            doc["stride"] = self.stride
        if self.movement_log is not None:
            doc["movement_log"] = self.movement_log
        return json.dumps(doc, indent=2)


@dataclass
class SimTrace:
    """Recorded queue history of one run.

    ``record`` rows: q1/q2/q3 for receiver 1, q1/q2/q3 for receiver 2,
    cumulative arrivals (both receivers), cumulative exits (both),
    sampled every ``stride`` slots after arrivals join.
    """

    horizon: int
    stride: int
    times: np.ndarray
    record: np.ndarray
    final_queues: np.ndarray
    arrivals: np.ndarray
    exits: np.ndarray
    audit_passed: bool | None = None

    @property
    def backlog(self) -> np.ndarray:
        return self.record[:, :6].sum(axis=1)

    @property
    def cumulative_exits(self) -> np.ndarray:
        return self.record[:, 8:10]

    def delivered_rate(self, j: int) -> float:
        return float(self.exits[j - 1]) / self.horizon

    def check_conservation(self) -> None:
        backlog = self.backlog
        inflow = self.record[:, 6] + self.record[:, 7]
        outflow = self.record[:, 8] + self.record[:, 9]
        if not np.array_equal(inflow, backlog + outflow):
            raise AssertionError("arrivals != backlog + exits at a recorded slot")
        if int(self.arrivals.sum()) != int(self.final_queues.sum()) + int(
            self.exits.sum()
        ):
            raise AssertionError("final conservation identity violated")
        if (np.diff(self.record[:, 6:10], axis=0) < 0).any():
            raise AssertionError("cumulative counters must be nondecreasing")

    def to_csv(self) -> str:
        header = (
            "t,q1_rx1,q2_rx1,q3_rx1,q1_rx2,q2_rx2,q3_rx2,"
            "arrivals_rx1,arrivals_rx2,exits_rx1,exits_rx2"
        )
        lines = [header]
        for t, row in zip(self.times, self.record):
            lines.append(f"{int(t)}," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    final_backlog_over_n: float
    tail_slope: float


def stability_verdict(
    trace: SimTrace,
    *,
    ratio_threshold: float = 1e-3,
    slope_threshold: float = 1e-3,
    min_horizon: int = 100_000,
) -> StabilityVerdict:
    """Empirical stability call from the backlog trajectory.

    Stable iff final backlog over n stays under ``ratio_threshold`` and the
    least-squares slope over the last half of the recorded points stays
    under ``slope_threshold`` packets/slot.
    """

    if trace.horizon < min_horizon:
        raise ValueError(
            f"horizon {trace.horizon} too short for a stability call "
            f"(need {min_horizon})"
        )
    backlog = trace.backlog
    if len(backlog) < 4:
        raise ValueError("need at least four recorded points")
    ratio = float(backlog[-1]) / trace.horizon
    half = len(backlog) // 2
    t = trace.times[half:].astype(float)
    y = backlog[half:].astype(float)
    slope = float(np.polyfit(t, y, 1)[0])
    return StabilityVerdict(
        stable=ratio < ratio_threshold and slope < slope_threshold,
        final_backlog_over_n=ratio,
        tail_slope=slope,
    )


def throughput_check(trace: SimTrace, scenario: Scenario) -> tuple[float, float]:
    """Delivered packets per slot for each receiver."""

    del scenario
    return trace.delivered_rate(1), trace.delivered_rate(2)


# -- probabilistic-policy synthesis ------------------------------------------


def _window_code(window: tuple[tuple[int, int], ...]) -> int:
    code = 0
    for z1, z2 in window:
        code = code * 4 + 2 * z1 + z2
    return code


@dataclass(frozen=True)
class _ProbTables:
    action_table: np.ndarray
    ratio_table: np.ndarray
    dist_by_code: dict
    ratios: dict
    window_len: int


def _probabilistic_tables(scenario: Scenario, model: ChannelModel) -> _ProbTables:
    policy = scenario.policy
    target = RatePoint(*policy.get("target", scenario.rates))
    if scenario.visible:
        stats = {
            s: cond_erasure_visible(model, s, scenario.delay)
            for s in range(model.num_states)
        }
        weights = stationary_distribution(model)
        kind = "visible"
        window_len = 0
        n_rows = model.num_states
        code = int
    else:
        window_len = int(policy.get("window_len", 1))
        stats, weights = hidden_window_stats(model, window_len)
        kind = "hidden_L"
        n_rows = 4**window_len
        code = _window_code
    witness = region_membership(kind, stats, weights, target)
    if witness is None:
        raise ValueError(
            f"target ({target.r1}, {target.r2}) lies outside the {kind} region"
        )
    dist, ratios = synthesize_policy(witness, target, stats, weights)
    table = np.full((n_rows, 6), np.nan)
    dist_by_code = {}
    for key, row in dist.probs.items():
        table[code(key)] = row
        dist_by_code[code(key)] = row
    ratio_table = np.array([[ratios[j][l] for l in LINKS] for j in (1, 2)])
    return _ProbTables(table, ratio_table, dist_by_code, ratios, window_len)


# -- per-state dispatch -------------------------------------------------------


@dataclass(frozen=True)
class SplitAllocation:
    """Arrival shares routed to each state's subsystem, with the LP margin.

    margin > 0 certifies that every subsystem receives rates strictly
    inside its share of the corresponding single-state feedback region.
    """

    x: np.ndarray
    y: np.ndarray
    margin: float


def per_state_split(
    model: ChannelModel, rates: tuple[float, float], delay: int = 1
) -> SplitAllocation:
    """Split arrivals across per-state subsystems by a margin-maximizing LP.

    Subsystem s is served only when the delayed state reads s (a fraction
    pi_s of slots), so its allocation must sit inside pi_s times the
    single-state region built from that state's conditional erasure stats.
    """

    pi = stationary_distribution(model)
    n = model.num_states
    facets: list[list[tuple[float, float, float]]] = []
    for s in range(n):
        st = cond_erasure_visible(model, s, delay)
        region = region_memoryless_fb(st.eps1, st.eps2, st.eps12)
        rows = []
        boundary = region.boundary
        for p, q in zip(boundary, boundary[1:]):
            a, b = q.r2 - p.r2, p.r1 - q.r1
            if abs(a) < 1e-15 and abs(b) < 1e-15:
                continue
            rows.append((a, b, a * p.r1 + b * p.r2))
        if not rows:
            rows = [(1.0, 0.0, boundary[0].r1), (0.0, 1.0, boundary[-1].r2)]
        facets.append(rows)

    # Variables: x_0..x_{n-1}, y_0..y_{n-1}, margin.
    m = 2 * n + 1
    objective = np.zeros(m)
    objective[-1] = 1.0
    constraints = []
    row = np.zeros(m)
    row[:n] = 1.0
    row[-1] = -1.0
    constraints.append((row.copy(), "=", rates[0]))
    row = np.zeros(m)
    row[n : 2 * n] = 1.0
    row[-1] = -1.0
    constraints.append((row.copy(), "=", rates[1]))
    for s in range(n):
        for a, b, h in facets[s]:
            row = np.zeros(m)
            row[s] = a
            row[n + s] = b
            constraints.append((row, "<=", pi[s] * h))
    bounds = [(0.0, 1.0)] * (2 * n) + [(-2.0, 1.0)]
    sol = solve(LinearProgram(objective=objective, constraints=constraints, bounds=bounds))
    if sol.status != "optimal":
        raise RuntimeError(f"per-state split LP ended {sol.status}")
    x = np.asarray(sol.witness[:n])
    y = np.asarray(sol.witness[n : 2 * n])
    return SplitAllocation(x=x, y=y, margin=float(sol.value))


def _arrival_bins(shares: np.ndarray, rate: float) -> np.ndarray:
    """Cumulative coin thresholds that route an arrival coin u < rate."""

    total = float(shares.sum())
    if total <= 1e-15 or rate <= 0.0:
        n = len(shares)
        return rate * np.arange(1, n + 1) / n
    return rate * np.cumsum(shares) / total


# -- engines -------------------------------------------------------------------


class _RowCursor:
    """Serves one slot's policy randomness positionally: action, then coins."""

    __slots__ = ("row", "pos")

    def __init__(self, row: np.ndarray, pos: int) -> None:
        self.row = row
        self.pos = pos

    def random(self) -> float:
        value = float(self.row[self.pos])
        self.pos += 1
        return value


def _fold_belief(
    belief: np.ndarray, emission: np.ndarray, transition: np.ndarray, outcome: int
) -> np.ndarray:
    # Mirrors the compiled kernel's operation order so both engines agree
    # to the last bit.
    n = belief.shape[0]
    scratch = np.empty(n)
    total = 0.0
    for k in range(n):
        scratch[k] = belief[k] * emission[k, outcome]
        total += scratch[k]
    if total <= 0.0:
        raise ValueError("feedback pair has probability zero under the belief")
    out = np.empty(n)
    for k in range(n):
        acc = 0.0
        for k2 in range(n):
            acc += scratch[k2] * transition[k2, k]
        out[k] = acc / total
    return out


def _predict_stats(
    belief: np.ndarray, pd1: np.ndarray, evecs: np.ndarray
) -> ErasureStats:
    n = belief.shape[0]
    e1 = e2 = e12 = 0.0
    for k in range(n):
        acc = 0.0
        for k2 in range(n):
            acc += belief[k2] * pd1[k2, k]
        e1 += acc * evecs[0, k]
        e2 += acc * evecs[1, k]
        e12 += acc * evecs[2, k]
    return ErasureStats(
        eps1=e1,
        eps2=e2,
        eps12=e12,
        eps1_not2=e1 - e12,
        eps_not1_2=e2 - e12,
        eps_not1_not2=1.0 - e1 - e2 + e12,
    )


def _effective_stride(scenario: Scenario) -> int:
    if scenario.stride is not None:
        return int(scenario.stride)
    return max(1, scenario.horizon // 512)


def _run_counts(scenario: Scenario, model: ChannelModel, stride: int) -> SimTrace:
    kind = scenario.policy["kind"]
    if kind == "per_state":
        raise ValueError("per_state policy needs the packets engine")
    if kind == "probabilistic":
        tables = _probabilistic_tables(scenario, model)
        counts = kernel.run_counts(
            model,
            rates=scenario.rates,
            horizon=scenario.horizon,
            seed=scenario.seed,
            visible=scenario.visible,
            delay=scenario.delay,
            policy="probabilistic",
            action_table=tables.action_table,
            ratio_table=tables.ratio_table,
            window_len=tables.window_len,
            stride=stride,
        )
    else:
        counts = kernel.run_counts(
            model,
            rates=scenario.rates,
            horizon=scenario.horizon,
            seed=scenario.seed,
            visible=scenario.visible,
            delay=scenario.delay,
            policy="maxweight",
            action_set=scenario.policy.get("action_set", "A5"),
            stride=stride,
        )
    return SimTrace(
        horizon=counts.horizon,
        stride=counts.stride,
        times=counts.record_times,
        record=counts.record,
        final_queues=counts.queues,
        arrivals=counts.arrivals,
        exits=counts.exits,
    )


def _run_packets(scenario: Scenario, model: ChannelModel, stride: int) -> SimTrace:
    horizon, delay = scenario.horizon, scenario.delay
    n_states = model.num_states
    p_cdf = np.cumsum(model.transition, axis=1)
    e_cdf = np.cumsum(model.emission, axis=1)
    pi = stationary_distribution(model)
    emission, transition = model.emission, model.transition
    pd1 = np.linalg.matrix_power(transition, delay - 1)
    evecs = np.vstack(
        [
            emission[:, 2] + emission[:, 3],
            emission[:, 1] + emission[:, 3],
            emission[:, 3],
        ]
    )

    policy = scenario.policy
    kind = policy["kind"]
    action_set = policy.get("action_set", "A5")
    window_len = 0
    four_l = 1
    stats_tab: dict[int, ErasureStats] = {}
    dist_by_code: dict = {}
    ratios: dict = {}
    if scenario.visible and kind in ("maxweight", "per_state"):
        stats_tab = {
            s: cond_erasure_visible(model, s, delay) for s in range(n_states)
        }
    if kind == "probabilistic":
        tables = _probabilistic_tables(scenario, model)
        dist_by_code = tables.dist_by_code
        ratios = tables.ratios
        window_len = tables.window_len
        four_l = 4**window_len

    nets: dict[int, QueueNetwork]
    if kind == "per_state":
        split = per_state_split(model, scenario.rates, delay)
        bins1 = _arrival_bins(split.x, scenario.rates[0])
        bins2 = _arrival_bins(split.y, scenario.rates[1])
        nets = {s: QueueNetwork() for s in range(n_states)}
    else:
        bins1 = bins2 = np.zeros(0)
        nets = {0: QueueNetwork()}
    net = nets[0]

    rng = np.random.default_rng(scenario.seed)
    state = min(int(np.searchsorted(np.cumsum(pi), rng.random())), n_states - 1)
    ring = [state if scenario.visible else -1] * delay
    belief = pi.copy()
    wcode = 0
    folds = 0

    n_records = horizon // stride
    record = np.zeros((n_records, 10), dtype=np.int64)
    rec_idx = 0
    r1, r2 = scenario.rates
    log_fh = open(scenario.movement_log, "w") if scenario.movement_log else None

    try:
        t0 = 0
        while t0 < horizon:
            m = min(kernel.CHUNK_SLOTS, horizon - t0)
            matrix = rng.random((m, kernel.RNG_COLUMNS))
            for i in range(m):
                t = t0 + i
                row = matrix[i]
                u = row[2]
                cdf = p_cdf[state]
                ns = 0
                while ns < n_states - 1 and u >= cdf[ns]:
                    ns += 1
                state = ns
                u = row[3]
                cdf = e_cdf[ns]
                zi = 0
                while zi < 3 and u >= cdf[zi]:
                    zi += 1
                z = (zi >> 1, zi & 1)

                pos = t % delay
                ready = True
                if scenario.visible:
                    obs_key = ring[pos]
                    ring[pos] = ns
                else:
                    old = ring[pos]
                    ring[pos] = zi
                    if old >= 0:
                        if kind == "maxweight":
                            belief = _fold_belief(belief, emission, transition, old)
                        else:
                            wcode = (wcode * 4 + old) % four_l
                        folds += 1
                    if kind == "probabilistic" and folds < window_len:
                        ready = False
                    obs_key = wcode

                serving = net
                if not ready:
                    action, intents = 0, {}
                elif kind == "maxweight":
                    stats = (
                        stats_tab[obs_key]
                        if scenario.visible
                        else _predict_stats(belief, pd1, evecs)
                    )
                    decision = maxweight_decide(net, stats, action_set)
                    action, intents = decision.action, decision.intents
                elif kind == "probabilistic":
                    decision = probabilistic_decide(
                        dist_by_code, ratios, Observation(key=obs_key), _RowCursor(row, 4)
                    )
                    action, intents = decision.action, decision.intents
                else:
                    serving = nets[obs_key]
                    decision = per_state_memoryless_decide(
                        nets, stats_tab, Observation(key=obs_key)
                    )
                    action, intents = decision.action, decision.intents

                _, moves, slot_exits = apply_slot(serving, action, z, intents)
                if log_fh is not None:
                    log_fh.write(
                        json.dumps(
                            {
                                "t": t,
                                "action": action,
                                "z": list(z),
                                "moves": moves,
                                "exits": [[p.pid, j] for p, j in slot_exits],
                            }
                        )
                        + "\n"
                    )

                if row[0] < r1:
                    target = net
                    if kind == "per_state":
                        target = nets[
                            min(
                                int(np.searchsorted(bins1, row[0], side="right")),
                                n_states - 1,
                            )
                        ]
                    target.new_arrival(1)
                if row[1] < r2:
                    target = net
                    if kind == "per_state":
                        target = nets[
                            min(
                                int(np.searchsorted(bins2, row[1], side="right")),
                                n_states - 1,
                            )
                        ]
                    target.new_arrival(2)

                if (t + 1) % stride == 0:
                    for j in (1, 2):
                        base = 3 * (j - 1)
                        record[rec_idx, base] = sum(nn.q1_len(j) for nn in nets.values())
                        record[rec_idx, base + 1] = sum(
                            nn.q2_len(j) for nn in nets.values()
                        )
                        record[rec_idx, base + 2] = sum(
                            nn.q3_len(j) for nn in nets.values()
                        )
                        record[rec_idx, 5 + j] = sum(
                            nn.arrivals[j] for nn in nets.values()
                        )
                        record[rec_idx, 7 + j] = sum(
                            nn.exit_counts[j] for nn in nets.values()
                        )
                    rec_idx += 1
            t0 += m
    finally:
        if log_fh is not None:
            log_fh.close()

    for nn in nets.values():
        nn.check_invariants()
    audit = all(audit_decodability(nn) for nn in nets.values())

    final_queues = np.zeros((2, 3), dtype=np.int64)
    arrivals = np.zeros(2, dtype=np.int64)
    exits = np.zeros(2, dtype=np.int64)
    for j in (1, 2):
        final_queues[j - 1] = (
            sum(nn.q1_len(j) for nn in nets.values()),
            sum(nn.q2_len(j) for nn in nets.values()),
            sum(nn.q3_len(j) for nn in nets.values()),
        )
        arrivals[j - 1] = sum(nn.arrivals[j] for nn in nets.values())
        exits[j - 1] = sum(nn.exit_counts[j] for nn in nets.values())

    times = stride * np.arange(1, rec_idx + 1, dtype=np.int64)
    return SimTrace(
        horizon=horizon,
        stride=stride,
        times=times,
        record=record[:rec_idx],
        final_queues=final_queues,
        arrivals=arrivals,
        exits=exits,
        audit_passed=audit,
    )


def run(scenario: Scenario) -> SimTrace:
    """Execute a scenario with its configured engine and verify conservation."""

    model = scenario.model()
    stride = _effective_stride(scenario)
    if scenario.engine == "counts":
        trace = _run_counts(scenario, model, stride)
    else:
        trace = _run_packets(scenario, model, stride)
    trace.check_conservation()
    if trace.audit_passed is False:
        raise AssertionError("a delivered packet was not decodable")
    return trace


# -- sweeps --------------------------------------------------------------------


def _policy_label(policy: dict) -> str:
    kind = policy["kind"]
    if kind == "maxweight":
        return f"maxweight:{policy.get('action_set', 'A5')}"
    return kind


def _sweep_job(scenario: Scenario) -> dict:
    trace = run(scenario)
    verdict = stability_verdict(trace)
    return {
        "r1": scenario.rates[0],
        "r2": scenario.rates[1],
        "policy": _policy_label(scenario.policy),
        "stable": verdict.stable,
        "slope": verdict.tail_slope,
    }


def sweep(
    template: Scenario,
    points: Sequence[tuple[float, float]],
    policies: Sequence[dict] | None = None,
    workers: int = 1,
) -> list[dict]:
    """Stability map over a grid of rate points times policies."""

    policy_list = list(policies) if policies else [template.policy]
    jobs = [
        replace(template, rates=(float(r1), float(r2)), policy=policy)
        for policy in policy_list
        for r1, r2 in points
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_job, jobs))
    return [_sweep_job(job) for job in jobs]


def sweep_to_csv(rows: Sequence[dict]) -> str:
    lines = ["r1,r2,policy,stable,slope"]
    for row in rows:
        lines.append(
            f"{row['r1']:.12g},{row['r2']:.12g},{row['policy']},"
            f"{str(bool(row['stable'])).lower()},{row['slope']:.6g}"
        )
    return "\n".join(lines) + "\n"


# -- hidden-state prediction quality --------------------------------------------


def prediction_gap(
    model: ChannelModel, window_len: int, horizon: int, seed: int
) -> float:
    """Max total-variation gap between erasure-pattern predictions.

    Compares, along one sampled trace, the outcome distribution predicted
    from the full feedback history against the one predicted from only the
    last ``window_len`` feedback pairs (filter restarted from stationarity).
    """

    if (model.emission <= 0).any():
        raise ValueError("prediction comparison requires strictly positive emissions")
    if window_len < 1 or horizon < 1:
        raise ValueError("window_len and horizon must be positive")
    rng = np.random.default_rng(seed)
    pi = stationary_distribution(model)
    n = model.num_states
    state = int(rng.choice(n, p=pi))
    p_cdf = np.cumsum(model.transition, axis=1)
    e_cdf = np.cumsum(model.emission, axis=1)
    bank = np.tile(pi, (window_len + 1, 1))
    worst = 0.0
    for _ in range(horizon):
        state = min(int(np.searchsorted(p_cdf[state], rng.random(), side="right")), n - 1)
        zi = min(int(np.searchsorted(e_cdf[state], rng.random(), side="right")), 3)
        bank *= model.emission[:, zi]
        bank /= bank.sum(axis=1, keepdims=True)
        bank = bank @ model.transition
        gap = 0.5 * float(np.abs((bank[0] - bank[-1]) @ model.emission).sum())
        worst = max(worst, gap)
        bank[1:] = bank[:-1].copy()
        bank[1] = pi
    return worst
