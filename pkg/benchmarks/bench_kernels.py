"""Compare the numba kernels with their numpy fallbacks.

Two parts:

* per-kernel timings on the shapes the experiment uses (5 issues x 5 values),
  with a bit-equality check of the outputs;
* an end-to-end batch run once per backend in a fresh interpreter
  (``ACOP_DISABLE_NUMBA`` toggled), checking the result CSVs are identical.

    python3 benchmarks/bench_kernels.py --configs 200
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
import timeit
from pathlib import Path

import numpy as np

from acop import NegotiationSpace, kernels
from acop.scenario import generate_scenario


def kernel_cases(rng):
    space = NegotiationSpace.uniform(5, 5)
    sc = generate_scenario(space, 100, rng)
    W = sc.utility_a.weighted
    sizes = space.size_array
    ua = kernels.offer_utilities_numpy(W, sizes)
    ub = kernels.offer_utilities_numpy(sc.utility_b.weighted, sizes)
    cum = np.cumsum(np.full((5, 5), 0.2), axis=1)
    cum[:, -1] = 1.0
    uniforms = rng.random((50, 5))
    out = np.empty(5, dtype=np.int64)
    # a threshold no row reaches, so the sampler scans the whole chunk
    high = float(W.max(axis=1).sum()) + 1.0
    return {
        "offer_utilities": lambda f: f(W, sizes),
        "count_joint": lambda f: f(ua, ub, 50.0, 50.0),
        "sample_acceptable": lambda f: f(cum, W, uniforms, high, out),
        "completion_bounds": lambda f: f(W, sizes),
    }


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    print(f"{'kernel':<20}{'numba us':>12}{'numpy us':>12}{'speedup':>10}  equal")
    for name, call in cases.items():
        jit = getattr(kernels, f"{name}_jit")
        ref = getattr(kernels, f"{name}_numpy")
        a, b = call(jit), call(ref)  # also compiles
        equal = np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
        n = max(1, repeat)
        t_jit = min(timeit.repeat(lambda: call(jit), number=n, repeat=5)) / n
        t_ref = min(timeit.repeat(lambda: call(ref), number=n, repeat=5)) / n
        print(f"{name:<20}{t_jit * 1e6:12.2f}{t_ref * 1e6:12.2f}{t_ref / t_jit:10.1f}  {equal}")


def run_backend(manifest, out, disable):
    env = dict(os.environ, ACOP_DISABLE_NUMBA="1" if disable else "0")
    started = time.perf_counter()
    subprocess.run(
        [sys.executable, "-m", "acop.cli", "run", str(manifest), "--out", str(out)],
        env=env,
        check=True,
        stdout=subprocess.DEVNULL,
    )
    return time.perf_counter() - started


def bench_batch(n_configs, seed):
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        subprocess.run(
            [sys.executable, "-m", "acop.cli", "generate", "--seed", str(seed), "--scenarios", "1",
             "--constraint-counts", "0-12", "--out", str(tmp / "batch")],
            check=True,
            stdout=subprocess.DEVNULL,
        )
        manifest = tmp / "batch" / "manifest.json"
        if n_configs:
            data = json.loads(manifest.read_text())
            data["configurations"] = data["configurations"][::max(1, len(data["configurations"]) // n_configs)][:n_configs]
            data["n_configurations"] = len(data["configurations"])
            manifest.write_text(json.dumps(data))
        t_jit = run_backend(manifest, tmp / "jit.csv", disable=False)
        t_ref = run_backend(manifest, tmp / "ref.csv", disable=True)
        same = (tmp / "jit.csv").read_bytes() == (tmp / "ref.csv").read_bytes()
        n = json.loads(manifest.read_text())["n_configurations"]
        print(f"\nbatch of {n} configurations ({4 * n} sessions), wall time incl. start-up:")
        print(f"  numba {t_jit:7.1f}s   numpy {t_ref:7.1f}s   speedup {t_ref / t_jit:4.1f}x   identical CSV: {same}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=2000, help="calls per timing sample")
    parser.add_argument("--configs", type=int, default=300, help="batch size, 0 for a full 1300-config base")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-batch", action="store_true")
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    bench_kernels(args.repeat)
    if not args.skip_batch:
        bench_batch(args.configs, args.seed)


if __name__ == "__main__":
    main()
