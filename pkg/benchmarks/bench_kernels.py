"""Time the numba kernels against the interpreted/numpy fallback.

Each backend runs in its own subprocess because the backend is fixed at
import time by HIOPT_DISABLE_NUMBA.  Compilation (or loading from the
on-disk cache) happens in an untimed warm-up call.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from hiopt import _accel
from hiopt.analysis import packing_number, xi_event_holds
from hiopt.objectives import get_objective
from hiopt.optimizers import SooParams, default_params, soo_run, stosoo_run
from hiopt.partition import SemiMetric

repeat, quick = int(sys.argv[1]), sys.argv[2] == "1"
n_sto = 10**4 if quick else 10**5
noisy = get_objective("two-sine", 0.1)
garland = get_objective("garland")
xi_params = default_params(2000)
_, xi_trace = stosoo_run(noisy, xi_params, 1)

cases = {
    ("stosoo n=1e4" if quick else "stosoo n=1e5"): lambda: stosoo_run(noisy, default_params(n_sto), 1),
    "soo n=1e4 (garland)": lambda: soo_run(garland, SooParams.default(10**4)),
    "xi replay n=2000": lambda: xi_event_holds(xi_trace, noisy, xi_params),
    "packing 1e6 grid": lambda: packing_number(garland, SemiMetric(1.0, 0.5), 0.001, 1 / 3, 10**6),
}
out = {}
for name, fn in cases.items():
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    out[name] = min(times)
print(json.dumps({"backend": _accel.backend_name(), "times": out}))
"""


def run_backend(disable, repeat, quick):
    env = dict(os.environ)
    env.pop("HIOPT_DISABLE_NUMBA", None)
    if disable:
        env["HIOPT_DISABLE_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeat), "1" if quick else "0"],
        capture_output=True,
        text=True,
        env=env,
        check=False,
    )
    if proc.returncode != 0:
        sys.exit(proc.stderr)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="StoSOO at n=1e4 instead of 1e5")
    args = ap.parse_args()
    fast = run_backend(False, args.repeat, args.quick)
    slow = run_backend(True, args.repeat, args.quick)
    print(f"{'workload':<24}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<24}{t_fast * 1e3:>10.1f}ms{t_slow * 1e3:>10.1f}ms{t_slow / t_fast:>9.0f}x")


if __name__ == "__main__":
    main()
