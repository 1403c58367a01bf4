"""Compare the compiled slot kernel against its pure-numpy fallback.

Runs the same scenarios in two subprocesses, one with DUOCAST_NO_NUMBA=1,
and reports slots/second for each.  The two paths produce bit-identical
traces; this script only measures speed.

    python3 benchmarks/kernel_benchmark.py --horizon 2000000 --repeats 3
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

SCENARIOS = {
    "visible maxweight A5": {
        "channel": {
            "gilbert_elliot": {
                "kind": "visible",
                "eps1": 0.6,
                "g1": 0.1,
                "eps2": 0.5,
                "g2": 0.2,
            }
        },
        "rates": [0.31, 0.335],
        "visible": True,
        "policy": {"kind": "maxweight", "action_set": "A5"},
    },
    "hidden maxweight A5": {
        "channel": {
            "gilbert_elliot": {
                "kind": "hidden",
                "eps1": 0.6,
                "g1": 0.1,
                "eps2": 0.5,
                "g2": 0.2,
                "eps1_good": 0.2,
                "eps1_bad": 0.866,
                "eps2_good": 0.2,
                "eps2_bad": 0.8,
            }
        },
        "rates": [0.2, 0.2],
        "visible": False,
        "policy": {"kind": "maxweight", "action_set": "A5"},
    },
    "visible probabilistic": {
        "channel": {
            "gilbert_elliot": {
                "kind": "visible",
                "eps1": 0.6,
                "g1": 0.1,
                "eps2": 0.5,
                "g2": 0.2,
            }
        },
        "rates": [0.25, 0.25],
        "visible": True,
        "policy": {"kind": "probabilistic"},
    },
}


def child(horizon: int, repeats: int) -> None:
    from duocast.harness import Scenario, run
    from duocast.kernel import jit_enabled

    results = {}
    for name, doc in SCENARIOS.items():
        scenario = Scenario(
            channel=doc["channel"],
            rates=tuple(doc["rates"]),
            horizon=horizon,
            seed=7,
            visible=doc["visible"],
            policy=doc["policy"],
        )
        run(scenario)  # warm-up: jit compile, table synthesis
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            run(scenario)
            times.append(time.perf_counter() - t0)
        results[name] = horizon / statistics.median(times)
    json.dump({"jit": jit_enabled(), "slots_per_s": results}, sys.stdout)


def measure(no_numba: bool, horizon: int, repeats: int) -> dict:
    env = os.environ | {
        "DUOCAST_NO_NUMBA": "1" if no_numba else "0",
        "DUOCAST_BENCH_CHILD": "1",
    }
    out = subprocess.run(
        [sys.executable, __file__, "--horizon", str(horizon), "--repeats", str(repeats)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizon", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if os.environ.get("DUOCAST_BENCH_CHILD") == "1":
        child(args.horizon, args.repeats)
        return 0

    jit = measure(False, args.horizon, args.repeats)
    plain = measure(True, args.horizon, args.repeats)
    if not jit["jit"]:
        print("note: numba unavailable, both columns run the fallback")

    width = max(len(name) for name in SCENARIOS)
    print(f"{args.horizon} slots per run, median of {args.repeats}")
    print(f"{'scenario':<{width}}  {'jit slots/s':>12}  {'numpy slots/s':>13}  {'speedup':>7}")
    for name in SCENARIOS:
        fast = jit["slots_per_s"][name]
        slow = plain["slots_per_s"][name]
        print(f"{name:<{width}}  {fast:>12.3g}  {slow:>13.3g}  {fast / slow:>6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
