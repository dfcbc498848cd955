"""Benchmark the propagation search: compiled kernel vs numpy fallback.

Synthesizes token maps at several realistic sizes, times both kernel
paths on the same inputs, and checks they pick identical sources.

    python3 benchmarks/bench_fmp.py [--repeats 7]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from framebank import kernels
from framebank.memory import FeatureTokenMap, MemoryBank
from framebank.propagation import PropagationConfig, propagate

CASES = [
    # (n_tokens, bank entries, tokens per entry, dim)
    (64, 5, 64, 320),
    (256, 5, 256, 320),
    (1024, 5, 1024, 320),
    (4096, 5, 4096, 64),
]


def bench_case(n, entries, per_entry, dim, repeats):
    rng = np.random.default_rng(42)
    bank = MemoryBank(capacity=entries)
    for f in range(entries):
        bank.insert(
            FeatureTokenMap(frame_index=f, layer_id="bench", tokens=rng.standard_normal((per_entry, dim)))
        )
    current = FeatureTokenMap(frame_index=entries, layer_id="bench", tokens=rng.standard_normal((n, dim)))
    cfg = PropagationConfig(lam=0.5)
    bank.concat_arrays()  # concat outside the timed region for both paths

    timings = {}
    results = {}
    impls = ["python"] + (["compiled"] if kernels.have_compiled_kernel() else [])
    for impl in impls:
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            results[impl] = propagate(current, bank, cfg, impl=impl)
            best = min(best, time.perf_counter() - t0)
        timings[impl] = best
    if len(results) == 2:
        assert np.array_equal(
            results["compiled"].source_frame, results["python"].source_frame
        ), "kernel paths disagree"
    return timings


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if not kernels.have_compiled_kernel():
        print("note: compiled kernel not built; timing the numpy fallback only")
    print(f"{'tokens':>7} {'memory rows':>12} {'dim':>5} {'numpy ms':>10} {'compiled ms':>12} {'ratio':>7}")
    for n, entries, per_entry, dim in CASES:
        t = bench_case(n, entries, per_entry, dim, args.repeats)
        numpy_ms = t["python"] * 1e3
        if "compiled" in t:
            compiled_ms = t["compiled"] * 1e3
            ratio = f"{numpy_ms / compiled_ms:6.2f}x"
            print(f"{n:>7} {entries * per_entry:>12} {dim:>5} {numpy_ms:>10.3f} {compiled_ms:>12.3f} {ratio:>7}")
        else:
            print(f"{n:>7} {entries * per_entry:>12} {dim:>5} {numpy_ms:>10.3f} {'-':>12} {'-':>7}")


if __name__ == "__main__":
    main()
