"""Compare the compiled and pure-numpy kernel backends.

Times two workloads on each importable backend:

* ``macro``: the parallel storage encoder applied to every exact input branch;
* ``gates``: the same encoder expanded to primitive gates and run on a smaller block.

Usage::

    python3 benchmarks/bench_kernels.py [--n 8] [--gate-n 4] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time
from contextlib import contextmanager

from qhuff.circuit import kernels, make_layout
from qhuff.circuit.network import run, run_gates
from qhuff.circuit.prepare import exact_inputs, prepare_batch
from qhuff.ensembles import builtin
from qhuff.qmath import source_model
from qhuff.storage import build_parallel_encoder

KERNEL_NAMES = ("rotate_rows", "controlled_rotate", "register_values", "add_rows", "apply_gates")


@contextmanager
def use_backend(impl):
    saved = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        for name in KERNEL_NAMES:
            setattr(kernels, name, getattr(impl, name))
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workload(model, n):
    layout = make_layout(n, model.code)
    net = build_parallel_encoder(layout, model.code)
    state = prepare_batch(model, exact_inputs(model, n), layout)
    return net, state


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ensemble", default="e2")
    p.add_argument("--n", type=int, default=8, help="signals for the macro workload (power of two)")
    p.add_argument("--gate-n", type=int, default=4, help="signals for the gate workload (power of two)")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    model = source_model(builtin(args.ensemble))
    macro_net, macro_state = workload(model, args.n)
    gate_net, gate_state = workload(model, args.gate_n)
    print(f"macro: N={args.n}, {macro_state.n_rows} branches, {sum(1 for _ in macro_net.ops())} ops")
    print(f"gates: N={args.gate_n}, {gate_state.n_rows} branches, "
          f"{gate_net.depth_metrics().gate_count} gates")

    results = {}
    for name, impl in sorted(kernels.backends().items()):
        with use_backend(impl):
            t_macro = best_of(lambda: run(macro_net, macro_state), args.repeat)
            t_gates = best_of(lambda: run_gates(gate_net, gate_state.bits), args.repeat)
        results[name] = (t_macro, t_gates)
        print(f"{name:>8}: macro {t_macro * 1e3:9.2f} ms   gates {t_gates * 1e3:9.2f} ms")
    if {"python", "cython"} <= results.keys():
        py, cy = results["python"], results["cython"]
        print(f" speedup: macro {py[0] / cy[0]:.1f}x   gates {py[1] / cy[1]:.1f}x")


if __name__ == "__main__":
    main()
