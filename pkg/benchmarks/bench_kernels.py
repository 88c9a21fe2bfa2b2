"""Compare the compiled and pure-numpy sequence kernels.

Times the raw LSTM forward/backward kernels on training-like shapes and
a full question-encoding pass through the tape.  Run:

    python benchmarks/bench_kernels.py
"""

import os
import time

import numpy as np


def time_fn(fn, repeat=5, warmup=2):
    for _ in range(warmup):
        fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_raw_kernels(backends, shapes):
    rng = np.random.default_rng(0)
    print(f"{'shape (T,B,Din,H)':24s} {'backend':10s} {'fwd ms':>9s} {'bwd ms':>9s}")
    for T, B, Din, H in shapes:
        x = rng.normal(size=(T, B, Din)).astype(np.float32)
        wx = rng.normal(size=(Din, 4 * H)).astype(np.float32) * 0.1
        wh = rng.normal(size=(H, 4 * H)).astype(np.float32) * 0.1
        b = np.zeros(4 * H, dtype=np.float32)
        g = rng.normal(size=(T, B, H)).astype(np.float32)
        baseline = {}
        for name, mod in backends.items():
            h, gates, c = mod.lstm_forward(x, wx, wh, b, False)
            fwd = time_fn(lambda: mod.lstm_forward(x, wx, wh, b, False))
            bwd = time_fn(lambda: mod.lstm_backward(x, wx, wh, b, h, gates, c, g, False))
            baseline[name] = (fwd, bwd)
            print(f"{str((T, B, Din, H)):24s} {name:10s} "
                  f"{fwd * 1e3:9.3f} {bwd * 1e3:9.3f}")
        if len(baseline) == 2:
            py = baseline["python"]
            cc = baseline["compiled"]
            print(f"{'':24s} {'speedup':10s} {py[0] / cc[0]:8.2f}x {py[1] / cc[1]:8.2f}x")


def bench_question_encode():
    """End-to-end tape pass (embed + BiLSTM) per backend."""
    import importlib

    import memqa.kernels as kernels
    results = {}
    for backend in ("python", "compiled"):
        os.environ["MEMQA_KERNELS"] = backend
        importlib.reload(kernels)
        if kernels.BACKEND != backend:
            continue
        import memqa.nn as nn
        importlib.reload(nn)
        from memqa.autodiff import Tensor, sum_reduce
        from memqa.params import ParamStore
        store = ParamStore(seed=0)
        nn.init_bilstm(store, "enc", 300, 128)
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(12, 300)).astype(np.float32))

        def step():
            states, final = nn.bilstm_encode(x, store, "enc")
            sum_reduce(states).backward()

        results[backend] = time_fn(step, repeat=10, warmup=3)
    print(f"\n{'question encode + backward (L=12, d=128)':44s}")
    for name, dt in results.items():
        print(f"  {name:10s} {dt * 1e3:9.3f} ms")
    if len(results) == 2:
        print(f"  {'speedup':10s} {results['python'] / results['compiled']:8.2f}x")
    os.environ.pop("MEMQA_KERNELS", None)


def main():
    from memqa.kernels import available_backends
    backends = available_backends()
    print("available backends:", ", ".join(backends))
    shapes = [
        (8, 1, 300, 64),    # one question
        (4, 64, 300, 64),   # batched aspect encoding
        (16, 32, 300, 64),  # long sequences, wide batch
    ]
    bench_raw_kernels(backends, shapes)
    bench_question_encode()


if __name__ == "__main__":
    main()
