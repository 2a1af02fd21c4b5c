"""Compiled vs pure-Python kernels, plus one end-to-end benchmark run.

    python benchmarks/bench_kernels.py [--dims 1000,100000,1000000] [--repeat 50]

The end-to-end timing runs each backend in a subprocess because the backend
is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pfedsop import _kernels_py as pure
from pfedsop.numkit import ZERO_NORM

try:
    from pfedsop import _kernels as compiled
except ImportError:
    compiled = None

E2E = """
import time
from pfedsop import cli, numkit
from pfedsop.config import ExperimentConfig
cfg = ExperimentConfig(method="pfedsop", dataset="synthetic", clients=20, rounds=50,
                       partition="pathological", participation_fraction=0.2)
t = time.perf_counter()
cli.run_config(cfg)
print(numkit.BACKEND, time.perf_counter() - t)
"""


def bench_kernels(dims, repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12}{'d':>10}{'python us':>12}{'compiled us':>13}{'speedup':>9}")
    for d in dims:
        x, a, b = rng.standard_normal((3, d))
        calls = {
            "cosine": lambda m: m.cosine(a, b, ZERO_NORM),
            "fim_step": lambda m: m.fim_step(a, 0.1),
            "personalize": lambda m: m.personalize(x, a, b, 1.0, 1.0, 1.0, ZERO_NORM),
        }
        for name, call in calls.items():
            tp = min(timeit.repeat(lambda: call(pure), number=repeat, repeat=3)) / repeat * 1e6
            if compiled is None:
                print(f"{name:<12}{d:>10}{tp:>12.1f}{'n/a':>13}{'':>9}")
                continue
            tc = min(timeit.repeat(lambda: call(compiled), number=repeat, repeat=3)) / repeat * 1e6
            print(f"{name:<12}{d:>10}{tp:>12.1f}{tc:>13.1f}{tp / tc:>8.2f}x")


def bench_end_to_end():
    for forced in ("1", ""):
        env = dict(os.environ, PFEDSOP_PURE_PYTHON=forced)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"end-to-end benchmark config, backend {backend:<8}: {float(secs):.3f}s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", default="1000,100000,1000000")
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()
    bench_kernels([int(d) for d in args.dims.split(",")], args.repeat)
    bench_end_to_end()


if __name__ == "__main__":
    main()
