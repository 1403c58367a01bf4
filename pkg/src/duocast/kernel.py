"""Counts-level simulation kernel for long stability runs.

The kernel tracks queue lengths only; packet identities are left to the
reference engine in `queuenet`.  Both consume the same per-slot random
matrix, so their queue trajectories match slot for slot, which is tested.
The hot loop is compiled with numba when available; setting the environment
variable DUOCAST_NO_NUMBA=1 selects the pure-Python fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, cond_erasure_visible, stationary_distribution

__all__ = [
    "COL_ARRIVAL_1",
    "COL_ARRIVAL_2",
    "COL_STATE",
    "COL_EMISSION",
    "COL_ACTION",
    "COL_COINS",
    "RNG_COLUMNS",
    "CHUNK_SLOTS",
    "SimCounts",
    "jit_enabled",
    "run_counts",
]

# Per-slot random matrix layout.  Positional columns keep the stream aligned
# between engines no matter which action a policy picks.
COL_ARRIVAL_1 = 0
COL_ARRIVAL_2 = 1
COL_STATE = 2
COL_EMISSION = 3
COL_ACTION = 4
COL_COINS = 5  # 5..10 receiver-1 links 12,13,14,24,32,34; 11..16 receiver 2
RNG_COLUMNS = 17

CHUNK_SLOTS = 65536

_DISABLED = os.environ.get("DUOCAST_NO_NUMBA", "") == "1"
if not _DISABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - exercised via the env flag
        _DISABLED = True
if _DISABLED:
    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def jit_enabled() -> bool:
    return not _DISABLED


@_njit(cache=True)
def _chunk(rng, t0,
           p_cdf, e_cdf,
           visible, delay, wlen, four_l,
           ring, belief, scratch, predicted,
           pd1, trans, emis, evecs,
           mode, amax, action_cdf, ratios, eps_tab,
           rates, q, tot, intents, istate,
           stride, record, rec_meta):
    m = rng.shape[0]
    num_states = p_cdf.shape[0]
    for i in range(m):
        t = t0 + i
        # Channel: advance the state, then emit an erasure pair from it.
        u = rng[i, 2]
        s = istate[0]
        ns = 0
        while ns < num_states - 1 and u >= p_cdf[s, ns]:
            ns += 1
        istate[0] = ns
        u = rng[i, 3]
        zi = 0
        while zi < 3 and u >= e_cdf[ns, zi]:
            zi += 1
        z1 = zi >> 1
        z2 = zi & 1

        # Observation bookkeeping with feedback delay.
        pos = t % delay
        ready = 1
        key = 0
        if visible == 1:
            key = ring[pos]
            ring[pos] = ns
        else:
            old = ring[pos]
            ring[pos] = zi
            if old >= 0:
                if mode == 1:
                    total = 0.0
                    for k in range(num_states):
                        scratch[k] = belief[k] * emis[k, old]
                        total += scratch[k]
                    if total <= 0.0:
                        istate[3] = 1
                        return
                    for k in range(num_states):
                        acc = 0.0
                        for k2 in range(num_states):
                            acc += scratch[k2] * trans[k2, k]
                        predicted[k] = acc / total
                    for k in range(num_states):
                        belief[k] = predicted[k]
                else:
                    istate[1] = (istate[1] * 4 + old) % four_l
                istate[2] += 1
            if mode == 0 and istate[2] < wlen:
                ready = 0
            key = istate[1]

        # Decide.
        action = 0
        if ready == 1:
            if mode == 0:
                if not (action_cdf[key, 5] >= 0.0):
                    istate[3] = 2
                    return
                u = rng[i, 4]
                action = 0
                while action < 5 and u >= action_cdf[key, action]:
                    action += 1
                for j in range(2):
                    for l in range(6):
                        intents[j, l] = 1 if rng[i, 5 + 6 * j + l] < ratios[j, l] else 0
            else:
                if visible == 1:
                    e1 = eps_tab[key, 0]
                    e2 = eps_tab[key, 1]
                    e12 = eps_tab[key, 2]
                else:
                    for k in range(num_states):
                        acc = 0.0
                        for k2 in range(num_states):
                            acc += belief[k2] * pd1[k2, k]
                        predicted[k] = acc
                    e1 = 0.0
                    e2 = 0.0
                    e12 = 0.0
                    for k in range(num_states):
                        e1 += predicted[k] * evecs[0, k]
                        e2 += predicted[k] * evecs[1, k]
                        e12 += predicted[k] * evecs[2, k]
                q11 = q[0, 0]
                q21 = q[0, 1]
                q31 = q[0, 2]
                q12 = q[1, 0]
                q22 = q[1, 1]
                q32 = q[1, 2]
                d1 = q11 - q21
                if d1 < 0:
                    d1 = 0
                d2 = q12 - q22
                if d2 < 0:
                    d2 = 0
                w1 = (1.0 - e1) * q11 + (e1 - e12) * d1
                w2 = (1.0 - e2) * q12 + (e2 - e12) * d2
                w3 = (1.0 - e1) * q21 + (1.0 - e2) * q22
                d1 = q11 - q31
                if d1 < 0:
                    d1 = 0
                d2 = q12 - q32
                if d2 < 0:
                    d2 = 0
                w4 = (1.0 - e12) * (d1 + d2)
                d1 = q31 - q21
                if d1 < 0:
                    d1 = 0
                d2 = q32 - q22
                if d2 < 0:
                    d2 = 0
                w5 = ((e1 - e12) * d1 + (1.0 - e1) * q31
                      + (e2 - e12) * d2 + (1.0 - e2) * q32)
                action = 0
                best = 0.0
                if w1 > best:
                    best = w1
                    action = 1
                if w2 > best:
                    best = w2
                    action = 2
                if amax >= 3 and w3 > best:
                    best = w3
                    action = 3
                if amax >= 5:
                    if w4 > best:
                        best = w4
                        action = 4
                    if w5 > best:
                        best = w5
                        action = 5
                for j in range(2):
                    intents[j, 0] = 1 if q[j, 0] > q[j, 1] else 0
                    intents[j, 1] = 1 if q[j, 0] > q[j, 2] else 0
                    intents[j, 2] = 1 if q[j, 0] > 0 else 0
                    intents[j, 3] = 1 if q[j, 1] > 0 else 0
                    intents[j, 4] = 1 if q[j, 2] > q[j, 1] else 0
                    intents[j, 5] = 1 if q[j, 2] > 0 else 0

        # Move counts along the activated admissible links.
        if action == 1 or action == 2:
            j = action - 1
            own = z1 if action == 1 else z2
            oth = z2 if action == 1 else z1
            if q[j, 0] > 0:
                if own == 0:
                    if intents[j, 2] == 1:
                        q[j, 0] -= 1
                        tot[j, 1] += 1
                elif oth == 0 and intents[j, 0] == 1:
                    q[j, 0] -= 1
                    q[j, 1] += 1
        elif action == 3:
            if z1 == 0 and intents[0, 3] == 1 and q[0, 1] > 0:
                q[0, 1] -= 1
                tot[0, 1] += 1
            if z2 == 0 and intents[1, 3] == 1 and q[1, 1] > 0:
                q[1, 1] -= 1
                tot[1, 1] += 1
        elif action == 4:
            if z1 == 0 or z2 == 0:
                if intents[0, 1] == 1 and q[0, 0] > 0:
                    q[0, 0] -= 1
                    q[0, 2] += 1
                if intents[1, 1] == 1 and q[1, 0] > 0:
                    q[1, 0] -= 1
                    q[1, 2] += 1
        elif action == 5:
            if q[0, 2] > 0:
                if z1 == 0:
                    if intents[0, 5] == 1:
                        q[0, 2] -= 1
                        tot[0, 1] += 1
                elif z2 == 0 and intents[0, 4] == 1:
                    q[0, 2] -= 1
                    q[0, 1] += 1
            if q[1, 2] > 0:
                if z2 == 0:
                    if intents[1, 5] == 1:
                        q[1, 2] -= 1
                        tot[1, 1] += 1
                elif z1 == 0 and intents[1, 4] == 1:
                    q[1, 2] -= 1
                    q[1, 1] += 1

        # Arrivals join at the end of the slot.
        if rng[i, 0] < rates[0]:
            q[0, 0] += 1
            tot[0, 0] += 1
        if rng[i, 1] < rates[1]:
            q[1, 0] += 1
            tot[1, 0] += 1

        if (t + 1) % stride == 0:
            idx = rec_meta[0]
            for j in range(2):
                for l in range(3):
                    record[idx, 3 * j + l] = q[j, l]
            record[idx, 6] = tot[0, 0]
            record[idx, 7] = tot[1, 0]
            record[idx, 8] = tot[0, 1]
            record[idx, 9] = tot[1, 1]
            rec_meta[0] = idx + 1


@dataclass
class SimCounts:
    """Result of a counts-level run.

    ``record`` has one row per recorded slot with columns q1/q2/q3 for
    receiver 1, q1/q2/q3 for receiver 2, cumulative arrivals (both
    receivers), cumulative exits (both receivers).
    """

    horizon: int
    stride: int
    queues: np.ndarray          # (2, 3) final queue lengths
    arrivals: np.ndarray        # (2,)
    exits: np.ndarray           # (2,)
    record_times: np.ndarray
    record: np.ndarray          # (len(record_times), 10)

    @property
    def backlog(self) -> int:
        return int(self.queues.sum())

    def throughput(self, j: int) -> float:
        return float(self.exits[j - 1]) / self.horizon


_ERRORS = {
    1: "feedback pair has probability zero under the current belief",
    2: "no action distribution for an observed key",
}


def run_counts(
    model: ChannelModel,
    *,
    rates: tuple[float, float],
    horizon: int,
    seed: int,
    visible: bool = True,
    delay: int = 1,
    policy: str = "maxweight",
    action_set: str = "A5",
    action_table: np.ndarray | None = None,
    ratio_table: np.ndarray | None = None,
    window_len: int = 0,
    stride: int | None = None,
    chunk: int = CHUNK_SLOTS,
) -> SimCounts:
    """Simulate the queue counts of a coding scheme over `horizon` slots.

    ``policy`` is "maxweight" (with ``action_set``) or "probabilistic" (with
    ``action_table`` rows indexed by observation key and ``ratio_table`` of
    per-link activation probabilities).  For a hidden model, the observation
    key of the probabilistic policy is the base-4 code of the last
    ``window_len`` feedback pairs, oldest pair in the highest digit.
    """

    if horizon < 1:
        raise ValueError("horizon must be positive")
    if delay < 1:
        raise ValueError("delay must be at least 1")
    if not (0 <= rates[0] <= 1 and 0 <= rates[1] <= 1):
        raise ValueError("arrival rates must lie in [0, 1]")
    if policy not in ("maxweight", "probabilistic"):
        raise ValueError(f"unknown policy {policy!r}")

    num_states = model.num_states
    p_cdf = np.cumsum(model.transition, axis=1)
    e_cdf = np.cumsum(model.emission, axis=1)
    pi = stationary_distribution(model)

    mode = 0 if policy == "probabilistic" else 1
    amax = {"A2": 2, "A3": 3, "A5": 5}[action_set]

    if mode == 0:
        if action_table is None:
            raise ValueError("probabilistic policy needs an action table")
        table = np.asarray(action_table, dtype=float)
        if table.ndim != 2 or table.shape[1] != 6:
            raise ValueError("action table must have six columns")
        action_cdf = np.cumsum(table, axis=1)
        ratios = np.zeros((2, 6)) if ratio_table is None else \
            np.asarray(ratio_table, dtype=float)
        if ratios.shape != (2, 6):
            raise ValueError("ratio table must be 2x6")
    else:
        action_cdf = np.full((1, 6), np.nan)
        ratios = np.zeros((2, 6))

    if visible and mode == 1:
        eps_tab = np.empty((num_states, 3))
        for s in range(num_states):
            st = cond_erasure_visible(model, s, delay)
            eps_tab[s] = (st.eps1, st.eps2, st.eps12)
    else:
        eps_tab = np.zeros((1, 3))

    pd1 = np.linalg.matrix_power(model.transition, delay - 1)
    evecs = np.empty((3, num_states))
    evecs[0] = model.emission[:, 2] + model.emission[:, 3]
    evecs[1] = model.emission[:, 1] + model.emission[:, 3]
    evecs[2] = model.emission[:, 3]

    if stride is None:
        stride = max(1, horizon // 512)
    if stride < 1:
        raise ValueError("stride must be positive")

    rng = np.random.default_rng(seed)
    s0 = int(np.searchsorted(np.cumsum(pi), rng.random()))
    s0 = min(s0, num_states - 1)

    ring = np.full(delay, s0 if visible else -1, dtype=np.int64)
    belief = pi.copy()
    scratch = np.empty(num_states)
    predicted = np.empty(num_states)
    q = np.zeros((2, 3), dtype=np.int64)
    tot = np.zeros((2, 2), dtype=np.int64)
    intents = np.zeros((2, 6), dtype=np.int64)
    istate = np.array([s0, 0, 0, 0], dtype=np.int64)
    n_records = horizon // stride
    record = np.zeros((n_records, 10), dtype=np.int64)
    rec_meta = np.zeros(1, dtype=np.int64)
    rates_arr = np.array(rates, dtype=float)

    t0 = 0
    while t0 < horizon:
        m = min(chunk, horizon - t0)
        matrix = rng.random((m, RNG_COLUMNS))
        _chunk(matrix, t0,
               p_cdf, e_cdf,
               1 if visible else 0, delay, window_len, 4 ** window_len,
               ring, belief, scratch, predicted,
               pd1, model.transition, model.emission, evecs,
               mode, amax, action_cdf, ratios, eps_tab,
               rates_arr, q, tot, intents, istate,
               stride, record, rec_meta)
        if istate[3] != 0:
            raise ValueError(_ERRORS[int(istate[3])])
        t0 += m

    stored = int(q.sum())
    if int(tot[:, 0].sum()) != stored + int(tot[:, 1].sum()):
        raise AssertionError("conservation violated in counts kernel")

    times = stride * np.arange(1, rec_meta[0] + 1, dtype=np.int64)
    return SimCounts(
        horizon=horizon,
        stride=stride,
        queues=q,
        arrivals=tot[:, 0].copy(),
        exits=tot[:, 1].copy(),
        record_times=times,
        record=record[: int(rec_meta[0])].copy(),
    )
