import os

import numpy as np
import pytest

from clock_chain import (INTERIOR, LEFT_END, RIGHT_END, SITE_COUNT, ChainState, build_hamiltonian,
                         bracketed_index, clock_frames, clock_sequence, final_state, full_index,
                         illegal_pairs, illegal_sites, is_bracketed, is_well_formed, legal_pair_mask,
                         lowest_eigenpairs, pair_operator, path_hamiltonian, simulate_construction, site,
                         start_state, steps_to_illegal, transition, transition_rules, wellformed_states)
from errors import ChainError, DimensionError
from tm_compiler import TMSpec, Transition, counter_machine, load_tm, run_tm

MACHINES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures", "machines")


def machine(name: str) -> TMSpec:
    return load_tm(os.path.join(MACHINES, f"{name}.json"))


GOLDEN_FRAMES_4 = [
    "R0 _r | 0B 0",
    "_l R0 | 0B 0",
    "_l L0 | 0B 0",
    "L0 _r | 0B 0",
    "R1 _r | 0B 0",
    "_l R1 | 0B 0",
    "_l L1 | 0B 0",
    "L1 _r | 1 0B",
    "R1 _r | 1 0B",
    "_l R1 | 1 0B",
    "_l L2 | 1 1B",
    "L2 _r | 1 1B",
    "R2 _r | 1 1B",
    "_l R2 | 1B 2",
    "_l L2 | 1B 2",
    "L2 _r | 1B 2",
]


GOLDEN_FRAMES_5 = [
    "R0 _r _r | 0B 0 0",
    "_l R0 _r | 0B 0 0",
    "_l _l R0 | 0B 0 0",
    "_l _l L0 | 0B 0 0",
    "_l L0 _r | 0B 0 0",
    "L0 _r _r | 0B 0 0",
    "R1 _r _r | 0B 0 0",
    "_l R1 _r | 0B 0 0",
    "_l _l R1 | 0B 0 0",
    "_l _l L1 | 0B 0 0",
    "_l L1 _r | 0B 0 0",
    "L1 _r _r | 1 0B 0",
    "R1 _r _r | 1 0B 0",
    "_l R1 _r | 1 0B 0",
    "_l _l R1 | 1 0B 0",
    "_l _l L1 | 1 0B 0",
    "_l L1 _r | 1 1 0B",
    "L1 _r _r | 1 1 0B",
    "R1 _r _r | 1 1 0B",
    "_l R1 _r | 1 1 0B",
    "_l _l R1 | 1 1 0B",
    "_l _l L2 | 1 1 1B",
    "_l L2 _r | 1 1 1B",
    "L2 _r _r | 1 1 1B",
    "R2 _r _r | 1 1 1B",
    "_l R2 _r | 1 1 1B",
    "_l _l R2 | 1 1B 2",
    "_l _l L2 | 1 1B 2",
    "_l L2 _r | 1 1B 2",
    "L2 _r _r | 1 1B 2",
    "R2 _r _r | 1 1B 2",
    "_l R2 _r | 1B 2 2",
    "_l _l R2 | 1B 2 2",
    "_l _l L2 | 1B 2 2",
    "_l L2 _r | 1B 2 2",
    "L2 _r _r | 1B 2 2",
]


@pytest.mark.parametrize("n", range(4, 11))
def test_schedule_length(n):
    seq = clock_sequence(n)
    assert len(seq) == 4 * (n - 2) ** 2
    assert seq[0] == start_state(n) and seq[-1] == final_state(n)
    assert all(is_well_formed(s) for s in seq)


def test_first_and_last_frames():
    frames = clock_frames(6)
    assert len(frames) == 64
    assert frames[0] == "R0 _r _r _r | 0B 0 0 0"
    assert frames[1] == "_l R0 _r _r | 0B 0 0 0"
    assert frames[-1] == "L2 _r _r _r | 1B 2 2 2"


@pytest.mark.parametrize("n,golden", [(4, GOLDEN_FRAMES_4), (5, GOLDEN_FRAMES_5)])
def test_short_clocks_match_golden_frames(n, golden):
    frames = clock_frames(n)
    assert len(frames) == len(golden)
    for tick, (got, want) in enumerate(zip(frames, golden)):
        assert got == want, tick


def test_schedule_endpoints_have_no_further_moves():
    assert transition(start_state(5), "backward") is None
    assert transition(final_state(5), "forward") is None
    assert transition(start_state(5)) == clock_sequence(5)[1]


def test_small_chain_rejected():
    with pytest.raises(DimensionError):
        clock_sequence(3)


def test_transition_needs_well_formed_state():
    broken = ChainState.from_tracks(["R0", "R0"], ["0B", "0"])
    assert is_bracketed(broken) and not is_well_formed(broken)
    with pytest.raises(ChainError):
        transition(broken)


def test_illegal_pair_assembly():
    bad = set(illegal_sites())
    assert len(bad) == 16
    assert site("L1", "0B") in bad and site("R2", "1B") in bad
    assert site("R0", "2") in bad and site("R1", "1B") in bad
    assert site("R0", "0B") not in bad
    assert int(legal_pair_mask().sum()) == 80
    pairs = set(illegal_pairs())
    assert (site("R2", "1"), site("_r", "0B")) in pairs
    assert (site("R0", "0B"), site("_r", "0")) not in pairs


def test_rules_are_unique():
    rules = transition_rules()
    assert len({lhs for lhs, _ in rules}) == len(rules)
    assert len({rhs for _, rhs in rules}) == len(rules)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_well_formed_count(n):
    assert len(wellformed_states(n)) == 12 * (n - 2) ** 2


@pytest.mark.parametrize("n", [4, 5, 6])
def test_transitions_are_unique_and_closed(n):
    for state in wellformed_states(n):
        nxt = transition(state, "forward")
        if nxt is not None:
            assert is_well_formed(nxt)
            assert transition(nxt, "backward") == state
        prev = transition(state, "backward")
        if prev is not None:
            assert is_well_formed(prev)
            assert transition(prev, "forward") == state


@pytest.mark.parametrize("n", [4, 5, 6])
def test_off_schedule_states_reach_an_illegal_pair(n):
    schedule = set(clock_sequence(n))
    for state in wellformed_states(n):
        if state in schedule:
            assert steps_to_illegal(state, 2 * n) is None
        else:
            steps = steps_to_illegal(state, 2 * n)
            assert steps is not None and steps <= 2 * n, state.frame()


def test_pair_operator_is_symmetric_and_psd():
    p = pair_operator()
    assert abs(p - p.T).max() == 0
    assert np.linalg.eigvalsh(path_hamiltonian(4).toarray()).min() > -1e-10


def test_path_spectrum_is_cosine():
    t = 16
    got = np.linalg.eigvalsh(path_hamiltonian(4).toarray())
    want = np.sort(1 - np.cos(np.pi * np.arange(t) / t))
    assert np.allclose(got, want, atol=1e-12)


def test_path_sector_matches_direct_path():
    op = build_hamiltonian(4, "path")
    assert np.allclose(op.to_dense(), path_hamiltonian(4).toarray())
    pairs = lowest_eigenpairs(op, 2)
    assert abs(pairs.values[0]) < 1e-10
    assert abs(pairs.values[1] - (1 - np.cos(np.pi / 16))) < 1e-10


def test_bracketed_ground_state_is_the_clock_history():
    op = build_hamiltonian(4, "bracketed")
    assert op.dim == INTERIOR ** 2 == 1600
    pairs = lowest_eigenpairs(op, 2)
    assert abs(pairs.values[0]) < 1e-10
    assert pairs.values[1] > 1e-6
    ground = pairs.vectors[:, 0]
    on = [bracketed_index(s) for s in clock_sequence(4)]
    assert np.allclose(ground[on], 0.25, atol=1e-8)
    off = np.delete(ground, on)
    assert np.abs(off).max() < 1e-8
    assert pairs.residuals.max() <= 1e-10


def test_well_formed_sector_has_a_gap():
    op = build_hamiltonian(5, "wellformed")
    assert op.dim == 108
    pairs = lowest_eigenpairs(op, 2)
    assert abs(pairs.values[0]) < 1e-10
    assert pairs.values[1] > 0


def test_unknown_sector_and_misplaced_boundary():
    with pytest.raises(ChainError):
        build_hamiltonian(4, "everything")
    with pytest.raises(ChainError):
        build_hamiltonian(4, "path", boundary=True)


@pytest.mark.slow
def test_five_site_bracketed_ground_state_is_the_clock_history():
    op = build_hamiltonian(5, "bracketed")
    assert op.dim == INTERIOR ** 3
    pairs = lowest_eigenpairs(op, 1)
    assert pairs.method == "lanczos"
    assert abs(pairs.values[0]) < 1e-9
    ground = pairs.vectors[:, 0]
    on = [bracketed_index(s) for s in clock_sequence(5)]
    assert len(on) == 36
    assert np.allclose(ground[on], 1 / 6, atol=1e-6)
    assert np.abs(np.delete(ground, on)).max() < 1e-6


@pytest.mark.slow
def test_boundary_term_lifts_ground_energy():
    op = build_hamiltonian(4, "bracketed", boundary=True)
    pairs = lowest_eigenpairs(op, 1)
    assert abs(pairs.values[0] - 2) < 1e-9
    ground = pairs.vectors[:, 0].reshape((SITE_COUNT,) * 4)
    inside = ground[LEFT_END, :INTERIOR, :INTERIOR, RIGHT_END]
    assert 1 - float(np.sum(inside ** 2)) < 1e-6
    flat = pairs.vectors[:, 0]
    on = [full_index(s) for s in clock_sequence(4)]
    assert np.allclose(flat[on], 0.25, atol=1e-6)


@pytest.mark.parametrize("n", [4, 5, 6, 8])
def test_counting_phase_runs_the_counter(n):
    counter = counter_machine()
    trace = simulate_construction(n, counter, machine("verify_none"), keep_frames=False)
    assert not trace.violations
    assert trace.counter_steps == n - 2
    want = run_tm(counter, (), n - 2, tape_cells=n - 2).final.padded(counter.blank, n - 2)
    assert trace.counting_tape == want
    assert trace.ticks == 4 * (n - 2) ** 2 - 1
    assert not trace.accepted


def test_verifier_accepts_the_counting_tape():
    counter = counter_machine()
    verifier = TMSpec(counter.alphabet, counter.blank, ("s", "b", "qA"), "s", "qA",
                      (Transition("s", "%", "%", "b", "R"), Transition("b", "Jt", "Jt", "qA", "L")), True)
    trace = simulate_construction(5, counter, verifier)
    assert not trace.violations
    oracle = run_tm(verifier, trace.counting_tape, 5 - 3, head_at_home=True)
    assert trace.accepted == oracle.accepted
    assert trace.accepted
    assert len(trace.frames) == 4 * 3 ** 2


@pytest.mark.parametrize("track4", [["_r", "_r", "_r"], ["s", "_r", "c"]])
def test_corrupt_initial_track_is_flagged(track4):
    trace = simulate_construction(5, counter_machine(), machine("verify_none"), track4=track4)
    assert len(trace.violations) == 1
    tick, message = trace.violations[0]
    assert tick <= 2 * 5
    assert "track 4" in message
    assert not trace.accepted


def test_simulator_input_checks():
    with pytest.raises(ChainError):
        simulate_construction(5, counter_machine(), machine("verify_odd"))
    with pytest.raises(ChainError):
        simulate_construction(5, counter_machine(), machine("verify_none"), witness="012")
    with pytest.raises(DimensionError):
        simulate_construction(5, counter_machine(), machine("verify_none"), track4=["s"])
