import numpy as np
import pytest

from qhuff.comm import (OwnershipError, SessionError, arrived_count, comm_report, encode_next,
                        finalize, flush, format_trace, open_session, premature_measurement_fidelity,
                        run_session, safe_prefix, session_fidelity, truncate_session,
                        zero_count_fidelity)
from qhuff.circuit.network import rotate_register
from qhuff.storage import storage_run


def tape_str(s, row=0):
    return "".join(map(str, s.state.bits[row][list(s.layout.tape)]))


def test_encode_next_examples(m2, m1):
    s = open_session(m2, 4, 0.5, inputs=[[0, 1, 2, 3]])
    encode_next(s)
    assert tape_str(s).startswith("0") and s.state.values(s.layout.total_length)[0] == 1
    encode_next(s)
    assert tape_str(s).startswith("010") and s.state.values(s.layout.total_length)[0] == 3
    assert not s.state.bits[0][list(s.layout.codeword(0)) + list(s.layout.codeword(1))].any()
    # superposed signal: the running total is entangled with the codeword length
    from qhuff.ensembles import builtin
    from qhuff.qmath import source_model
    mw = source_model(builtin("which_length"))
    s = open_session(mw, 2, inputs=[[1, 1]])
    encode_next(s)
    assert sorted(set(s.state.values(s.layout.total_length))) == [1, 2]


def test_safe_prefix_flush_and_arrival(m2):
    s = open_session(m2, 4, 0.5, inputs=[[0, 1, 2, 3]])
    assert safe_prefix(s) == 0
    for _ in range(3):
        encode_next(s)
    assert safe_prefix(s) == 3
    s.sent_tape = 2
    assert safe_prefix(s) == 1
    s.sent_tape = 0
    s2 = open_session(m2, 4, 0.5, inputs=[[0, 1, 2, 3]])
    encode_next(s2), encode_next(s2)
    assert flush(s2) == 2 + 0
    assert flush(s2) == 0  # nothing new to send
    assert s2.qubits_sent_fwd == 2


def test_arrived_count(m2):
    s = open_session(m2, 4, construct_only=True)
    tape = list(s.layout.tape)
    for got, want in [(0, 0), (3, 1), (7, 2)]:
        s.owner[tape] = 0
        s.owner[tape[:got]] = 1
        assert arrived_count(s) == want


def test_ownership_is_enforced(m2):
    s = open_session(m2, 2, 0.5, inputs=[[0, 0]])
    encode_next(s)
    encode_next(s)
    flush(s)
    with pytest.raises(OwnershipError):
        s.apply(0, [rotate_register(s.layout.tape[:3], 1)])
    with pytest.raises(OwnershipError):
        s.apply(1, [rotate_register(s.layout.tape[3:], 1)])


def test_trace_never_crosses_owners(m2):
    s = open_session(m2, 6, 0.5, inputs=[[1, 2, 0, 3, 0, 1]])
    owner = s.owner.copy()
    seen = []
    orig_apply = s.apply

    def checked(actor, ops, note=""):
        for op in ops:
            assert all(s.owner[q] == actor for q in op.qubits)
        seen.append(actor)
        orig_apply(actor, ops, note)

    s.apply = checked
    run_session(s, flush_every=1, truncate_at=3)
    assert 0 in seen and 1 in seen
    assert (owner != s.owner).any()


def test_streaming_stability(m2):
    s = open_session(m2, 6, 0.5)
    frozen = {}
    while s.signals_encoded < 6:
        encode_next(s)
        before = s.sent_tape
        flush(s)
        for q in s.layout.tape[before:s.sent_tape]:
            frozen[q] = s.state.bits[:, q].copy()
        for q, col in frozen.items():
            assert np.array_equal(s.state.bits[:, q], col)
    finalize(s)
    for q, col in frozen.items():
        assert np.array_equal(s.state.bits[:, q], col)


@pytest.mark.parametrize("flush_every, m, case", [
    (None, 2, "forward"), (None, 3, "forward"), (1, 1, "backward"), (1, 2, "middle"),
    (2, 3, "middle"), (1, 4, "middle"), (3, 1, "backward"),
])
def test_truncation_matches_storage(m2, flush_every, m, case):
    s = open_session(m2, 4, 0.5)
    run_session(s, flush_every=flush_every, truncate_at=m)
    assert s.case == case
    want = storage_run(m2, m, 0.5, per_signal=False).fidelity
    assert session_fidelity(s) == pytest.approx(want, abs=1e-9)


def test_forward_accounting(m2):
    s = open_session(m2, 4, 0.5)
    encode_next(s), encode_next(s)
    flush(s)
    pre = s.qubits_sent_fwd
    sent_tape = s.sent_tape
    held_lengths = sum(1 for k in range(3) if s.owner[s.layout.length(k)[0]] == 1)
    truncate_session(s, 3)
    assert s.case == "forward"
    t3 = s.truncation_length(3)
    w_t = int(np.ceil(np.log2(3 * 3 + 1)))
    extra = s.qubits_sent_fwd - pre
    assert extra == (t3 - sent_tape) + (3 - held_lengths) * 2 + w_t
    assert s.qubits_sent_bwd == 0


def test_forward_example_n4_m2(m2):
    s = open_session(m2, 4, 0.5)
    run_session(s, truncate_at=2)
    t2 = s.truncation_length(2)
    assert t2 == int(np.ceil(2 * (1.75 + 0.5)))
    assert s.bob_tape_width == t2
    rep = comm_report(s)
    assert rep.qubits_stored == t2 + 2 * 2 + 3
    assert rep.fidelity == pytest.approx(storage_run(m2, 2, 0.5).fidelity, abs=1e-9)


def test_full_session_equals_truncation_at_n(m2):
    a = open_session(m2, 4, 0.25)
    run_session(a)
    b = open_session(m2, 4, 0.25)
    run_session(b, truncate_at=4)
    assert comm_report(a).as_dict() == comm_report(b).as_dict()


def test_backward_case_sends_back(m2):
    s = open_session(m2, 4, 0.5)
    run_session(s, flush_every=1, truncate_at=1)
    assert s.case == "backward" and s.qubits_sent_bwd > 0
    assert session_fidelity(s) == pytest.approx(storage_run(m2, 1, 0.5).fidelity, abs=1e-9)


def test_report_qubit_counts(m2, m1):
    s = open_session(m2, 4, 9 / 4 - 1.75)
    run_session(s)
    assert comm_report(s).qubits_stored == 21
    s = open_session(m1, 4, 0.0)
    run_session(s)
    assert comm_report(s).qubits_stored == 11
    with pytest.raises(SessionError):
        comm_report(open_session(m1, 4, 0.0))


def test_truncation_range_and_noop(m2):
    s = open_session(m2, 4, 0.5, inputs=[[0, 0, 0, 0]])
    with pytest.raises(SessionError):
        truncate_session(s, 0)
    with pytest.raises(SessionError):
        truncate_session(s, 5)
    finalize(s)
    steps = s.step
    truncate_session(s, 2)
    assert s.step == steps and s.truncation_point == 4
    with pytest.raises(SessionError):
        encode_next(s)


def test_premature_fidelity(mwl, m2):
    s = open_session(mwl, 4, mwl.code.l_max - mwl.code.avg_len, inputs=[[1, 1, 1, 1]])
    for _ in range(4):
        encode_next(s)
        flush(s)
    with pytest.raises(SessionError):
        premature_measurement_fidelity(s, 3)
    assert premature_measurement_fidelity(s, 0) == pytest.approx(0.5, abs=1e-9)
    finalize(s)
    assert premature_measurement_fidelity(s, 0) == pytest.approx(1.0, abs=1e-10)
    # classical input: nothing to decohere
    s = open_session(m2, 4, 1.25, inputs=[[0, 1, 2, 3]])
    for _ in range(4):
        encode_next(s)
        flush(s)
    assert premature_measurement_fidelity(s, 0) == pytest.approx(1.0, abs=1e-12)


def test_superposed_source_penalty(m1):
    # every codeword has length one, so the running total carries no information
    s = open_session(m1, 3, 0.0, inputs=[[1, 1, 1]])
    for _ in range(3):
        encode_next(s)
        flush(s)
    assert premature_measurement_fidelity(s, 0) == pytest.approx(1.0, abs=1e-10)


def test_zero_count_demo():
    r = 2 ** -0.5
    assert zero_count_fidelity(r, r) == pytest.approx(0.5, abs=1e-12)
    assert zero_count_fidelity(0.6, 0.8) == pytest.approx(0.6 ** 4 + 0.8 ** 4)
    assert zero_count_fidelity(1, 0) == pytest.approx(1.0)


def test_construction_only(m2):
    s = open_session(m2, 16, construct_only=True)
    run_session(s, flush_every=2)
    assert s.network.depth_metrics().gate_count > 0
    with pytest.raises(SessionError):
        premature_measurement_fidelity(s, 0)
    s = open_session(m2, 8, construct_only=True)
    with pytest.raises(SessionError):
        run_session(s, truncate_at=4)


def test_trace_golden(m2, datadir):
    s = open_session(m2, 2, 0.25, inputs=[[0, 1]])
    encode_next(s)
    flush(s)
    encode_next(s)
    flush(s)
    finalize(s)
    assert format_trace(s) == (datadir / "trace_e2_n2.txt").read_text()
