import math

import numpy as np
import pytest

from pulsedca.lattice import (
    LEFT,
    BitBatch,
    Configuration,
    End,
    FrequencyTable,
    Interior,
    MissingEntry,
    NonClassicalPulse,
    ParseError,
    Polymer,
    Pulse,
    PulseKind,
    PulseSequence,
    Species,
    apply_pulse_classical,
    apply_sequence,
    apply_sequence_batch,
    check_frequency_distinctness,
    make_default_frequency_table,
    matches,
    polymer_from_text,
    polymer_to_text,
    sequence_from_text,
    sequence_to_text,
    validate_sequence,
)

END_A0 = Pulse("A", End(LEFT, 0), (0, 1))
END_A1 = Pulse("A", End(LEFT, 1), (0, 1))


def random_config(poly, rng):
    states = tuple(int(rng.integers(0, poly.species_at(i).num_states))
                   for i in range(poly.length))
    return Configuration(poly, states)


def test_matches_end_pulse_on_all_zero(abc_polymer):
    config = abc_polymer.all_zero()
    assert matches(END_A0, config, 0)
    # interior A never responds to the end frequency
    assert not matches(END_A0, config, 3)


def test_matches_first_b_after_end_write(abc_polymer):
    config = abc_polymer.all_zero()
    config = apply_pulse_classical(config, END_A0)
    b_pulse = Pulse("B", Interior(1, 0), (0, 1))
    assert matches(b_pulse, config, 1)
    # every other B has A=0 on its left
    assert not matches(b_pulse, config, 4)


def test_end_write_sets_unit_zero(abc_polymer):
    config = apply_pulse_classical(abc_polymer.all_zero(), END_A0)
    assert config[0] == 1
    assert all(s == 0 for s in config.states[1:])


def test_unmatched_pulse_is_identity(abc_polymer):
    config = abc_polymer.all_zero()
    assert apply_pulse_classical(config, Pulse("B", Interior(1, 1), (0, 1))) == config


def test_decay_pump_resets_b(ecc_polymer):
    states = [0] * ecc_polymer.length
    states[1] = 1
    config = Configuration(ecc_polymer, tuple(states))
    pump = Pulse("B", Interior(0, 0), (1, 2), kind=PulseKind.DECAY_PUMP)
    out = apply_pulse_classical(config, pump)
    assert out[1] == 0
    assert out.states[2:] == config.states[2:]


def test_decay_pump_idempotent(ecc_polymer, rng):
    pump = Pulse("B", Interior(0, 0), (1, 2), kind=PulseKind.DECAY_PUMP)
    for _ in range(50):
        config = random_config(ecc_polymer, rng)
        once = apply_pulse_classical(config, pump)
        assert apply_pulse_classical(once, pump) == once


def test_non_pi_coherent_pulse_rejected(abc_polymer):
    config = abc_polymer.all_zero()
    rot = Pulse("A", End(LEFT, 0), (0, 1), area=math.pi / 2)
    with pytest.raises(NonClassicalPulse):
        apply_pulse_classical(config, rot)


def test_pi_pulse_is_involution(abc_polymer, rng):
    pulses = [
        Pulse("B", Interior(1, 0), (0, 1)),
        Pulse("C", Interior(0, 1), (0, 1)),
        END_A1,
    ]
    for _ in range(200):
        config = random_config(abc_polymer, rng)
        for p in pulses:
            twice = apply_pulse_classical(apply_pulse_classical(config, p), p)
            assert twice == config


def test_simultaneous_equals_sequential_update(abc_polymer, rng):
    """Same-species units are never neighbors, so unit order cannot matter."""
    pulse = Pulse("B", Interior(1, 0), (0, 1))
    for _ in range(100):
        config = random_config(abc_polymer, rng)
        simultaneous = apply_pulse_classical(config, pulse)
        states = list(config.states)
        for u in reversed(abc_polymer.units_of("B")):
            if matches(pulse, config.with_states(states), u):
                states[u] ^= 1
        assert tuple(simultaneous.states) == tuple(states)


def test_empty_sequence_is_identity(abc_polymer):
    config = abc_polymer.all_zero()
    assert apply_sequence(config, PulseSequence(())) == config


def test_sequence_reversal_restores_config(abc_polymer, rng):
    pulses = tuple(
        Pulse(sp, Interior(l, r), (0, 1))
        for sp, l, r in [("B", 1, 0), ("C", 1, 1), ("B", 0, 1), ("A", 1, 0)]
    )
    seq = PulseSequence(pulses)
    for _ in range(100):
        config = random_config(abc_polymer, rng)
        there = apply_sequence(config, seq)
        back = apply_sequence(there, seq.reversed())
        assert back == config


def test_batch_engine_agrees_with_scalar(ecc_polymer, rng):
    seq = PulseSequence((
        Pulse("B", Interior(1, 0), (0, 1)),
        Pulse("A", End(LEFT, 1), (0, 1)),
        Pulse("B", Interior(0, 0), (1, 2), kind=PulseKind.DECAY_PUMP),
        Pulse("C", Interior(1, 1), (0, 1)),
    ))
    configs = [random_config(ecc_polymer, rng) for _ in range(64)]
    matrix = np.array([c.states for c in configs], dtype=np.int8)
    batch_out = apply_sequence_batch(ecc_polymer, matrix, seq)
    for row, config in zip(batch_out, configs):
        assert tuple(int(x) for x in row) == apply_sequence(config, seq).states


def test_bitbatch_agrees_with_scalar(abc_polymer, rng):
    seq = PulseSequence((
        Pulse("B", Interior(1, 0), (0, 1)),
        Pulse("A", End(LEFT, 1), (0, 1)),
        Pulse("C", Interior(0, 1), (0, 1)),
        Pulse("A", Interior(1, 1), (0, 1)),
    ))
    n = 100
    matrix = rng.integers(0, 2, size=(n, abc_polymer.length)).astype(np.int8)
    batch = BitBatch.from_matrix(abc_polymer, matrix)
    batch.apply(seq)
    expected = apply_sequence_batch(abc_polymer, matrix, seq)
    assert np.array_equal(batch.to_matrix(), expected)


def test_distinct_table_has_no_collisions(abc_polymer):
    table = make_default_frequency_table(abc_polymer)
    assert check_frequency_distinctness(table, 0.0) == []


def test_degenerate_interior_entries_collide():
    table = FrequencyTable(
        base={("A", (0, 1)): 1.0e15},
        shift={("A", 0, 1, (0, 1)): 1.0e11, ("A", 1, 0, (0, 1)): 1.0e11},
        end_shift={},
    )
    report = check_frequency_distinctness(table, 0.0)
    assert len(report) == 1


def test_end_frequency_equal_to_interior_is_flagged():
    table = FrequencyTable(
        base={("A", (0, 1)): 1.0e15},
        shift={("A", 0, 0, (0, 1)): 2.0e11},
        end_shift={("A", LEFT, 0, (0, 1)): 2.0e11},
    )
    report = check_frequency_distinctness(table, 0.0)
    assert len(report) == 1


def test_missing_entry_raises():
    table = FrequencyTable()
    with pytest.raises(MissingEntry):
        table.effective("A", Interior(0, 0), (0, 1))


def test_polymer_file_round_trip(ecc_polymer):
    text = polymer_to_text(ecc_polymer)
    back = polymer_from_text(text)
    assert back == ecc_polymer


def test_polymer_parse_error_names_line():
    with pytest.raises(ParseError, match="line 2"):
        polymer_from_text("pattern=ABC length=30\nspecies B states=four\n")


def test_sequence_file_round_trip():
    seq = PulseSequence(
        (
            Pulse("B", Interior(1, 0), (0, 1)),
            Pulse("A", End(LEFT, 1), (0, 1)),
            Pulse("B", Interior(0, 0), (1, 2), kind=PulseKind.DECAY_PUMP),
            Pulse("A", End(LEFT, 0), (0, 1), area=math.pi / 2, phase=0.25,
                  duration=1e-12),
        ),
        cycle_marks=(2,),
    )
    text = sequence_to_text(seq)
    back = sequence_from_text(text)
    assert back == seq


def test_sequence_example_lines_parse():
    text = """
    PI B L=1 R=0 T=0:1
    PI A END=left N=1 T=0:1
    PUMP B L=0 R=0 T=1:2
    ROT A END=left N=0 area=1.5707963 phase=0 dur=1e-12
    CYCLE
    """
    seq = sequence_from_text(text)
    assert len(seq) == 4
    assert seq.cycle_marks == (4,)
    assert seq.pulses[2].kind is PulseKind.DECAY_PUMP
    assert seq.pulses[3].area == pytest.approx(math.pi / 2, abs=1e-6)


def test_validate_sequence_rejects_bad_pump(abc_polymer):
    seq = PulseSequence((Pulse("B", Interior(0, 0), (1, 2),
                               kind=PulseKind.DECAY_PUMP),))
    with pytest.raises(Exception, match="out of range|fast decay"):
        validate_sequence(abc_polymer, seq)
    three_state_no_decay = Polymer(
        (Species("A"), Species("B", 3), Species("C")), 30)
    with pytest.raises(Exception, match="fast decay"):
        validate_sequence(three_state_no_decay, seq)
