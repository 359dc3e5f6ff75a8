"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are written straight to the terminal so they show up whether or
not pytest captures output.
"""

import itertools
import json
import math
import subprocess
import sys
import time
from fractions import Fraction as F

import numpy as np
import pytest

from qhuff.circuit import kernels
from qhuff.circuit.network import (GateNetwork, MacroOp, add_into, apply_op, rotate_register,
                                   run_gates, swap_spans, xor_deposit)
from qhuff.cli import main
from qhuff.comm import (comm_report, encode_next, flush, open_session, premature_measurement_fidelity,
                        run_session, truncate_session)
from qhuff.ensembles import builtin
from qhuff.huffman import average_length, build_code, optimal_length_oracle
from qhuff.qmath import source_model
from qhuff.scaling import sweep
from qhuff.storage import storage_run

from oracles import average_block_fidelity

MACRO_KINDS = {"swap", "xor", "rot", "crot", "add"}


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {k}: {detail}"
    return emit


def sixteenths(n):
    for parts in itertools.product(range(17), repeat=n - 1):
        last = 16 - sum(parts)
        if last >= 0:
            yield tuple(F(k, 16) for k in parts + (last,))


def test_criterion_01_huffman_optimality(verdict):
    t0 = time.perf_counter()
    count = bad = 0
    for n in range(1, 6):
        for d in sixteenths(n):
            count += 1
            bad += average_length(build_code(d), d) != optimal_length_oracle(d)
    elapsed = time.perf_counter() - t0
    verdict(1, bad == 0 and elapsed < 60, f"{count} distributions, {bad} suboptimal, {elapsed:.1f}s")


def test_criterion_02_lossless_round_trip(verdict, m1, m2):
    worst = 0.0
    for model in (m1, m2):
        for n in (1, 2, 4):
            rep = storage_run(model, n, truncate_len=n * model.code.l_max, per_signal=False)
            worst = max(worst, abs(rep.fidelity - 1.0))
    verdict(2, worst <= 1e-10, f"max |F - 1| = {worst:.2e}")


def test_criterion_03_truncation_oracle(verdict, m2):
    rep = storage_run(m2, 2, 0.25)
    dense = average_block_fidelity(m2, 2, 4)
    tail = F(rep.extras["tail_weight"]).limit_denominator(1 << 20)
    ok = (rep.extras["truncate_len"] == 4 and abs(rep.fidelity - 0.8125) <= 1e-9
          and abs(dense - 0.8125) <= 1e-9 and tail == F(3, 16))
    verdict(3, ok, f"F = {rep.fidelity:.12f}, dense oracle {dense:.12f}, tail {tail}")


def test_criterion_04_convergence(verdict, m2):
    fid = {n: storage_run(m2, n, 0.5, per_signal=False).fidelity for n in (2, 4, 8)}
    monotone = fid[2] <= fid[4] <= fid[8]
    halved = 1 - fid[8] < (1 - fid[2]) / 2
    detail = ", ".join(f"F({n}) = {f:.6f}" for n, f in fid.items())
    verdict(4, monotone and halved, f"{detail}; non-decreasing {monotone}, halved gap {halved}")


def test_criterion_05_resource_formulas(verdict, m1, m2, mwl):
    bad = []
    for model, n, frac in itertools.product((m1, m2, mwl), (1, 2, 4), (0.0, 0.4, 1.0)):
        code = model.code
        delta = frac * (code.l_max - code.avg_len)
        base = math.ceil(n * (code.avg_len + delta) - 1e-9) + n * math.ceil(math.log2(code.l_max + 1))
        rep = storage_run(model, n, delta, per_signal=False)
        if rep.qubits_stored != base:
            bad.append(("storage", n, delta, rep.qubits_stored, base))
        s = open_session(model, n, delta)
        run_session(s)
        got = comm_report(s).qubits_stored
        if got - base != math.ceil(math.log2(n * code.l_max + 1)):
            bad.append(("comm", n, delta, got, base))
    verdict(5, not bad, f"27 storage and 27 comm reports checked, mismatches {bad}")


def test_criterion_06_depth_scaling(verdict, m2):
    t0 = time.perf_counter()
    fit = sweep(m2, "storage", [2 ** k for k in range(1, 11)])["fits"]["depth_vs_log2n"]
    elapsed = time.perf_counter() - t0
    ok = fit["exponent"] <= 2.5 and fit["r_squared"] >= 0.95 and elapsed < 300
    verdict(6, ok, f"a = {fit['exponent']:.3f}, R^2 = {fit['r_squared']:.4f}, {elapsed:.1f}s")


def test_criterion_07_sequential_costs(verdict, m2):
    ns = [2 ** k for k in range(4, 10)]
    storage = sweep(m2, "storage", ns)["fits"]["gates_vs_n"]["exponent"]
    comm = sweep(m2, "comm", ns)["fits"]["gates_vs_n"]["exponent"]
    ok = 0.9 <= storage <= 1.4 and 1.8 <= comm <= 2.3
    verdict(7, ok, f"storage gate slope {storage:.3f}, comm gate slope {comm:.3f}")


def _penalty_scenario(model, flush_at, m):
    n = 8
    s = open_session(model, n, model.code.l_max - model.code.avg_len, inputs=[[1] * n])
    for k in range(n):
        encode_next(s)
        if k + 1 in flush_at:
            flush(s)
    before = premature_measurement_fidelity(s, 0)
    truncate_session(s, m)
    after = premature_measurement_fidelity(s, 0)
    return s.case, before, after


def test_criterion_08_entanglement_penalty(verdict, mwl):
    every = set(range(1, 9))
    results = {case: _penalty_scenario(mwl, flushes, m)
               for case, flushes, m in (("forward", {4}, 6), ("backward", every, 4), ("middle", every, 5))}
    ok = all(got == case and abs(pre - 0.5) <= 1e-9 and abs(post - 1) <= 1e-10
             for case, (got, pre, post) in results.items())
    detail = "; ".join(f"{c}: {pre:.10f} -> {post:.10f}" for c, (_, pre, post) in results.items())
    verdict(8, ok, detail)


def _all_inputs(n):
    return ((np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def _macro_ops():
    for w in range(1, 5):
        yield swap_spans(range(w), range(w, 2 * w)), 2 * w
        yield xor_deposit(range(w), range(w, 2 * w)), 2 * w
    for w in range(1, 9):
        for s in range(-w, w + 1):
            yield rotate_register(range(w), s), w
    for w in range(1, 8):
        for s in range(-w, w + 1):
            yield MacroOp("crot", (range(w), (w,)), s), w + 1
    for ws in range(1, 5):
        for wd in range(1, 9 - ws):
            for sign in (1, -1):
                yield add_into(range(ws), range(ws, ws + wd), sign), ws + wd


def test_criterion_09_macro_gate_equivalence(verdict, monkeypatch):
    covered, failures, checks = set(), 0, 0
    for name, impl in sorted(kernels.backends().items()):
        for fn in ("rotate_rows", "controlled_rotate", "register_values", "add_rows", "apply_gates"):
            monkeypatch.setattr(kernels, fn, getattr(impl, fn))
        for op, n in _macro_ops():
            assert n <= 8
            b = _all_inputs(n)
            ref = b.copy()
            apply_op(ref, op)
            full = run_gates(GateNetwork(n).append(op), b)
            failures += not (np.array_equal(full[:, :n], ref) and not full[:, n:].any())
            covered.add(op.kind)
            checks += 1
    ok = failures == 0 and covered == MACRO_KINDS
    verdict(9, ok, f"{checks} ops over backends {sorted(kernels.backends())}, "
                   f"kinds {len(covered)}/{len(MACRO_KINDS)}, failures {failures}")


CLI_RUNS = [
    ["analyze", "--ensemble", "builtin:e1"],
    ["storage", "--ensemble", "builtin:e1", "--n", "4", "--trials", "50", "--seed", "11"],
    ["storage", "--ensemble", "builtin:e2", "--n", "2", "--exact"],
    ["comm", "--ensemble", "builtin:e2", "--n", "4", "--flush-every", "1", "--truncate-at", "3",
     "--trials", "20", "--seed", "3"],
    ["scale", "--ensemble", "builtin:e2", "--n-list", "2", "4", "8"],
]


def test_criterion_10_determinism(verdict):
    def once(argv):
        res = subprocess.run([sys.executable, "-m", "qhuff.cli", *argv], capture_output=True, check=True)
        return res.stdout

    differing = [argv[0] for argv in CLI_RUNS if once(argv) != once(argv)]
    for argv in CLI_RUNS:
        json.loads(once(argv))
    commands = {argv[0] for argv in CLI_RUNS}
    ok = not differing and commands == {"analyze", "storage", "comm", "scale"}
    verdict(10, ok, f"{len(CLI_RUNS)} invocations over {sorted(commands)}, differing {differing}")
