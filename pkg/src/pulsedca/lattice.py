"""Heteropolymer model and exact classical semantics of conditioned resonant pulses.

A polymer is a periodic chain of typed units (species), e.g. ABCABC...  Each
unit holds a small integer state.  A resonant pulse addresses every unit of
one species whose neighbor states satisfy the pulse condition; a pi pulse
exchanges the two states of the addressed transition, a decay pump drains
state 1 to the ground state through a short-lived level.

Everything here is a pure function on immutable values.  Three evaluation
paths share these semantics:

* ``apply_pulse_classical`` / ``apply_sequence``: single configurations,
  plain tuples (fast for small polymers, easy to reason about).
* ``apply_sequence_batch``: many configurations as an int8 matrix.
* ``BitBatch``: 2-state polymers only, configurations bit-packed into
  uint64 planes, used for exhaustive circuit oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

LEFT = "left"
RIGHT = "right"

_PI_TOL = 1e-9


class LatticeError(Exception):
    """Base class for lattice-level errors."""


class NonClassicalPulse(LatticeError):
    """Coherent pulse whose area is not pi cannot be applied classically."""


class MissingEntry(LatticeError):
    """Frequency table lacks a required entry."""


class ParseError(LatticeError):
    """Malformed text input; message carries the line number."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Species:
    """One unit type: its label, state count and optional fast-decay level.

    ``fast_decay`` is a ``(pump_state, ground_state)`` pair: driving the
    1 <-> pump_state transition lets the unit relax to ground quickly,
    which is the only irreversible primitive in the machine.
    """

    id: str
    num_states: int = 2
    fast_decay: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not self.id or not self.id.isalpha():
            raise ValueError(f"species id must be alphabetic, got {self.id!r}")
        if self.num_states not in (2, 3):
            raise ValueError(f"num_states must be 2 or 3, got {self.num_states}")
        if self.fast_decay is not None:
            pump, ground = self.fast_decay
            if not (0 <= pump < self.num_states):
                raise ValueError(f"pump state {pump} out of range for {self.id}")
            if ground != 0:
                raise ValueError("fast decay must end in the ground state 0")


@dataclass(frozen=True)
class Polymer:
    """Finite chain built by repeating ``pattern`` up to ``length`` units."""

    pattern: tuple[Species, ...]
    length: int

    def __post_init__(self) -> None:
        if len(self.pattern) < 2:
            raise ValueError("pattern needs at least two species")
        ids = [s.id for s in self.pattern]
        if len(set(ids)) != len(ids):
            raise ValueError("pattern species must be distinct")
        if self.length < 2:
            raise ValueError("polymer length must be at least 2")

    @property
    def period(self) -> int:
        return len(self.pattern)

    @property
    def species_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.pattern)

    def species_at(self, index: int) -> Species:
        if not 0 <= index < self.length:
            raise IndexError(f"unit {index} outside polymer of length {self.length}")
        return self.pattern[index % self.period]

    def species_by_id(self, species_id: str) -> Species:
        for s in self.pattern:
            if s.id == species_id:
                return s
        raise KeyError(f"no species {species_id!r} in pattern")

    def is_end(self, index: int) -> bool:
        return index == 0 or index == self.length - 1

    def units_of(self, species_id: str) -> tuple[int, ...]:
        offset = self.species_ids.index(species_id)
        return tuple(range(offset, self.length, self.period))

    def all_zero(self) -> "Configuration":
        return Configuration(self, (0,) * self.length)

    def has_partial_period(self) -> bool:
        return self.length % self.period != 0


@dataclass(frozen=True)
class Configuration:
    """Classical state: one state index per unit."""

    polymer: Polymer
    states: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.states) != self.polymer.length:
            raise ValueError("state vector length does not match polymer")
        for i, s in enumerate(self.states):
            if not 0 <= s < self.polymer.species_at(i).num_states:
                raise ValueError(f"unit {i} state {s} out of range")

    def with_states(self, states: Sequence[int]) -> "Configuration":
        return Configuration(self.polymer, tuple(states))

    def __getitem__(self, index: int) -> int:
        return self.states[index]

    def triple(self, t: int) -> tuple[int, ...]:
        """States of the t-th full period (period-3 patterns: one ABC triple)."""
        p = self.polymer.period
        return self.states[t * p:(t + 1) * p]


class Condition:
    """Neighbor condition of a pulse; matched against the pre-pulse state."""

    __slots__ = ()


@dataclass(frozen=True)
class Interior(Condition):
    """Both neighbors present: left in state ``left``, right in state ``right``."""

    left: int
    right: int


@dataclass(frozen=True)
class End(Condition):
    """End unit on ``side`` whose single neighbor is in state ``neighbor``."""

    side: str
    neighbor: int

    def __post_init__(self) -> None:
        if self.side not in (LEFT, RIGHT):
            raise ValueError(f"side must be {LEFT!r} or {RIGHT!r}")


class PulseKind(Enum):
    COHERENT = "coherent"
    DECAY_PUMP = "pump"


@dataclass(frozen=True)
class Pulse:
    """One resonant pulse: species, neighbor condition, transition and area."""

    species: str
    condition: Condition
    transition: tuple[int, int]
    area: float = math.pi
    phase: float = 0.0
    duration: float | None = None
    kind: PulseKind = PulseKind.COHERENT

    def __post_init__(self) -> None:
        a, b = self.transition
        if a == b:
            raise ValueError("transition states must differ")
        if not 0.0 < self.area <= 2.0 * math.pi + _PI_TOL:
            raise ValueError(f"pulse area {self.area} outside (0, 2*pi]")

    @property
    def is_pi(self) -> bool:
        return abs(self.area - math.pi) <= _PI_TOL

    def reversed(self) -> "Pulse":
        """Pulse undoing this one (negated phase; pi pulses are involutions)."""
        return Pulse(self.species, self.condition, self.transition,
                     self.area, -self.phase, self.duration, self.kind)


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulse program plus computational-cycle boundaries."""

    pulses: tuple[Pulse, ...]
    cycle_marks: tuple[int, ...] = ()
    metadata: str = ""

    def __post_init__(self) -> None:
        last = -1
        for m in self.cycle_marks:
            if not 0 <= m <= len(self.pulses):
                raise ValueError(f"cycle mark {m} out of bounds")
            if m <= last:
                raise ValueError("cycle marks must be strictly increasing")
            last = m

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self) -> Iterator[Pulse]:
        return iter(self.pulses)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        n = len(self.pulses)
        marks = self.cycle_marks + tuple(m + n for m in other.cycle_marks)
        return PulseSequence(self.pulses + other.pulses, marks,
                             self.metadata or other.metadata)

    def reversed(self) -> "PulseSequence":
        return PulseSequence(tuple(p.reversed() for p in reversed(self.pulses)),
                             metadata=self.metadata)

    def is_coherent(self) -> bool:
        return all(p.kind is PulseKind.COHERENT for p in self.pulses)


def sequence_of(pulses: Iterable[Pulse], metadata: str = "") -> PulseSequence:
    return PulseSequence(tuple(pulses), metadata=metadata)


# ---------------------------------------------------------------------------
# Classical semantics
# ---------------------------------------------------------------------------

def matches(pulse: Pulse, config: Configuration, index: int) -> bool:
    """True iff the pulse drives the unit at ``index`` in this configuration."""
    poly = config.polymer
    if poly.species_at(index).id != pulse.species:
        return False
    cond = pulse.condition
    if isinstance(cond, End):
        if cond.side == LEFT:
            if index != 0:
                return False
            neighbor = config[1]
        else:
            if index != poly.length - 1:
                return False
            neighbor = config[index - 1]
        if neighbor != cond.neighbor:
            return False
    elif isinstance(cond, Interior):
        if poly.is_end(index):
            return False
        if config[index - 1] != cond.left or config[index + 1] != cond.right:
            return False
    else:  # pragma: no cover - condition classes are closed
        raise TypeError(f"unknown condition {cond!r}")
    state = config[index]
    if pulse.kind is PulseKind.DECAY_PUMP:
        return state == pulse.transition[0]
    return state in pulse.transition


def apply_pulse_classical(config: Configuration, pulse: Pulse) -> Configuration:
    """Apply one pulse; all matching units switch against the pre-pulse state."""
    if pulse.kind is PulseKind.COHERENT and not pulse.is_pi:
        raise NonClassicalPulse(
            f"classical engine only applies pi pulses, got area {pulse.area}")
    a, b = pulse.transition
    new_states = list(config.states)
    for u in config.polymer.units_of(pulse.species):
        if matches(pulse, config, u):
            if pulse.kind is PulseKind.DECAY_PUMP:
                new_states[u] = 0
            else:
                new_states[u] = b if config[u] == a else a
    return config.with_states(new_states)


def apply_sequence(config: Configuration, seq: PulseSequence) -> Configuration:
    for pulse in seq:
        config = apply_pulse_classical(config, pulse)
    return config


# ---------------------------------------------------------------------------
# Batch engines
# ---------------------------------------------------------------------------

def _condition_arrays(poly: Polymer, pulse: Pulse) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None, int | None, int | None]:
    """Unit/neighbor index arrays for a pulse: (units, lefts, rights, lval, rval).

    End conditions return a single unit with one neighbor; ``lval``/``rval``
    are the required neighbor states (None = no constraint on that side).
    """
    cond = pulse.condition
    if isinstance(cond, End):
        if cond.side == LEFT:
            u = 0
            if poly.species_at(u).id != pulse.species:
                return np.empty(0, int), None, None, None, None
            return np.array([u]), None, np.array([1]), None, cond.neighbor
        u = poly.length - 1
        if poly.species_at(u).id != pulse.species:
            return np.empty(0, int), None, None, None, None
        return np.array([u]), np.array([u - 1]), None, cond.neighbor, None
    units = np.array([u for u in poly.units_of(pulse.species)
                      if not poly.is_end(u)], dtype=int)
    return units, units - 1, units + 1, cond.left, cond.right


def apply_sequence_batch(poly: Polymer, states: np.ndarray,
                         seq: PulseSequence) -> np.ndarray:
    """Apply a sequence to many configurations at once.

    ``states`` has shape (n_configs, length), small ints; a new array is
    returned.  Semantics match ``apply_sequence`` exactly.
    """
    out = np.array(states, dtype=np.int8, copy=True)
    if out.ndim != 2 or out.shape[1] != poly.length:
        raise ValueError("states must be (n_configs, polymer length)")
    for pulse in seq:
        if pulse.kind is PulseKind.COHERENT and not pulse.is_pi:
            raise NonClassicalPulse(
                f"classical engine only applies pi pulses, got area {pulse.area}")
        units, lefts, rights, lval, rval = _condition_arrays(poly, pulse)
        if units.size == 0:
            continue
        cond = np.ones((out.shape[0], units.size), dtype=bool)
        if lefts is not None:
            cond &= out[:, lefts] == lval
        if rights is not None:
            cond &= out[:, rights] == rval
        cur = out[:, units]
        a, b = pulse.transition
        if pulse.kind is PulseKind.DECAY_PUMP:
            sel = cond & (cur == a)
            out[:, units] = np.where(sel, 0, cur)
        else:
            swapped = np.where(cur == a, b, np.where(cur == b, a, cur))
            out[:, units] = np.where(cond & ((cur == a) | (cur == b)), swapped, cur)
    return out


class BitBatch:
    """Bit-packed batch evaluator for 2-state polymers.

    Each unit owns one row of uint64 words; bit j of the row is unit's state
    in configuration j.  A pi pulse is a masked XOR, which makes exhaustive
    circuit oracles cheap.
    """

    def __init__(self, poly: Polymer, n_configs: int):
        if any(s.num_states != 2 for s in poly.pattern):
            raise ValueError("BitBatch supports 2-state species only")
        self.poly = poly
        self.n = n_configs
        self.words = (n_configs + 63) // 64
        self.planes = np.zeros((poly.length, self.words), dtype=np.uint64)
        self._tail = np.full(self.words, ~np.uint64(0), dtype=np.uint64)
        extra = self.words * 64 - n_configs
        if extra:
            self._tail[-1] = np.uint64((1 << (64 - extra)) - 1)

    @classmethod
    def from_matrix(cls, poly: Polymer, states: np.ndarray) -> "BitBatch":
        batch = cls(poly, states.shape[0])
        for u in range(poly.length):
            bits = np.packbits(states[:, u].astype(np.uint8), bitorder="little")
            padded = np.zeros(batch.words * 8, dtype=np.uint8)
            padded[:bits.size] = bits
            batch.planes[u] = padded.view(np.uint64)
        return batch

    def to_matrix(self) -> np.ndarray:
        out = np.empty((self.n, self.poly.length), dtype=np.int8)
        for u in range(self.poly.length):
            bytes_ = self.planes[u].view(np.uint8)
            bits = np.unpackbits(bytes_, bitorder="little")[:self.n]
            out[:, u] = bits
        return out

    def _neighbor_mask(self, idx: np.ndarray | None, val: int | None) -> np.ndarray | None:
        if idx is None:
            return None
        cols = self.planes[idx]
        return cols if val == 1 else ~cols

    def apply(self, seq: PulseSequence) -> None:
        for pulse in seq:
            if pulse.kind is not PulseKind.COHERENT:
                raise ValueError("BitBatch handles coherent pulses only")
            if not pulse.is_pi:
                raise NonClassicalPulse(
                    f"classical engine only applies pi pulses, got area {pulse.area}")
            if set(pulse.transition) != {0, 1}:
                raise ValueError("2-state polymer: transition must be 0<->1")
            units, lefts, rights, lval, rval = _condition_arrays(self.poly, pulse)
            if units.size == 0:
                continue
            cond = np.broadcast_to(self._tail, (units.size, self.words)).copy()
            lm = self._neighbor_mask(lefts, lval)
            if lm is not None:
                cond &= lm
            rm = self._neighbor_mask(rights, rval)
            if rm is not None:
                cond &= rm
            self.planes[units] ^= cond


# ---------------------------------------------------------------------------
# Frequency table and distinctness
# ---------------------------------------------------------------------------

AddressingClass = tuple[str, Condition, tuple[int, int]]


@dataclass
class FrequencyTable:
    """Effective transition frequencies omega = base + neighbor shift (rad/s)."""

    base: dict[tuple[str, tuple[int, int]], float] = field(default_factory=dict)
    shift: dict[tuple[str, int, int, tuple[int, int]], float] = field(default_factory=dict)
    end_shift: dict[tuple[str, str, int, tuple[int, int]], float] = field(default_factory=dict)

    def effective(self, species: str, condition: Condition,
                  transition: tuple[int, int]) -> float:
        key_base = (species, transition)
        if key_base not in self.base:
            raise MissingEntry(f"no base frequency for {species} {transition}")
        if isinstance(condition, End):
            key = (species, condition.side, condition.neighbor, transition)
            if key not in self.end_shift:
                raise MissingEntry(f"no end shift for {key}")
            delta = self.end_shift[key]
        else:
            assert isinstance(condition, Interior)
            key = (species, condition.left, condition.right, transition)
            if key not in self.shift:
                raise MissingEntry(f"no shift for {key}")
            delta = self.shift[key]
        omega = self.base[key_base] + delta
        if not (math.isfinite(omega) and omega > 0):
            raise ValueError(f"effective frequency for {key} is not positive")
        return omega

    def pulse_frequency(self, pulse: Pulse) -> float:
        return self.effective(pulse.species, pulse.condition, pulse.transition)

    def classes(self) -> list[AddressingClass]:
        """Every addressing class the table defines."""
        out: list[AddressingClass] = []
        for (species, l, r, tr) in self.shift:
            out.append((species, Interior(l, r), tr))
        for (species, side, n, tr) in self.end_shift:
            out.append((species, End(side, n), tr))
        return out


def check_frequency_distinctness(table: FrequencyTable,
                                 tolerance: float) -> list[tuple[AddressingClass, AddressingClass, float, float]]:
    """Pairs of addressing classes closer than ``tolerance`` (empty = well-posed)."""
    classes = table.classes()
    freqs = [table.effective(*c) for c in classes]
    collisions = []
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            if abs(freqs[i] - freqs[j]) <= tolerance:
                collisions.append((classes[i], classes[j], freqs[i], freqs[j]))
    return collisions


def make_default_frequency_table(poly: Polymer, base: float = 1.0e15,
                                 spacing: float = 1.0e13,
                                 shift_step: float = 1.0e11) -> FrequencyTable:
    """Synthetic, collision-free table for simulations and phase tracking.

    Frequencies are spaced so every (species, condition, transition) class is
    distinct; values are stand-ins, not fits to any material.
    """
    table = FrequencyTable()
    slot = 0
    for k, sp in enumerate(poly.pattern):
        transitions = [(0, 1)]
        if sp.num_states == 3:
            transitions.append((1, 2))
        for t_i, tr in enumerate(transitions):
            table.base[(sp.id, tr)] = base + spacing * (k * 2 + t_i) * 10
            left_sp = poly.pattern[(k - 1) % poly.period]
            right_sp = poly.pattern[(k + 1) % poly.period]
            for l in range(left_sp.num_states):
                for r in range(right_sp.num_states):
                    slot += 1
                    table.shift[(sp.id, l, r, tr)] = shift_step * slot
            for side, nb_sp in ((LEFT, right_sp), (RIGHT, left_sp)):
                for n in range(nb_sp.num_states):
                    slot += 1
                    table.end_shift[(sp.id, side, n, tr)] = shift_step * slot
    return table


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------

def _split_content(text: str) -> list[tuple[int, str]]:
    lines = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((i, line))
    return lines


def polymer_from_text(text: str) -> Polymer:
    """Parse the polymer file format.

    ::

        pattern=ABC length=30
        species A states=2
        species B states=3 decay=2->0
    """
    pattern_ids: str | None = None
    length: int | None = None
    species: dict[str, Species] = {}
    for lineno, line in _split_content(text):
        tokens = line.split()
        try:
            if tokens[0].startswith("pattern="):
                for tok in tokens:
                    key, _, val = tok.partition("=")
                    if key == "pattern":
                        pattern_ids = val
                    elif key == "length":
                        length = int(val)
                    else:
                        raise ValueError(f"unknown key {key!r}")
            elif tokens[0] == "species":
                sid = tokens[1]
                num_states = 2
                decay = None
                for tok in tokens[2:]:
                    key, _, val = tok.partition("=")
                    if key == "states":
                        num_states = int(val)
                    elif key == "decay":
                        pump, _, ground = val.partition("->")
                        decay = (int(pump), int(ground))
                    else:
                        raise ValueError(f"unknown key {key!r}")
                species[sid] = Species(sid, num_states, decay)
            else:
                raise ValueError(f"unknown directive {tokens[0]!r}")
        except ParseError:
            raise
        except (ValueError, IndexError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if pattern_ids is None or length is None:
        raise ParseError("missing 'pattern=... length=...' line")
    pattern = tuple(species.get(c, Species(c)) for c in pattern_ids)
    return Polymer(pattern, length)


def polymer_to_text(poly: Polymer) -> str:
    lines = [f"pattern={''.join(poly.species_ids)} length={poly.length}"]
    for sp in poly.pattern:
        line = f"species {sp.id} states={sp.num_states}"
        if sp.fast_decay is not None:
            line += f" decay={sp.fast_decay[0]}->{sp.fast_decay[1]}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def _format_condition(cond: Condition) -> str:
    if isinstance(cond, End):
        return f"END={cond.side} N={cond.neighbor}"
    assert isinstance(cond, Interior)
    return f"L={cond.left} R={cond.right}"


def sequence_to_text(seq: PulseSequence) -> str:
    lines = []
    if seq.metadata:
        lines.append(f"# {seq.metadata}")
    marks = set(seq.cycle_marks)
    for i, p in enumerate(seq.pulses):
        if i in marks:
            lines.append("CYCLE")
        cond = _format_condition(p.condition)
        tr = f"T={p.transition[0]}:{p.transition[1]}"
        if p.kind is PulseKind.DECAY_PUMP:
            lines.append(f"PUMP {p.species} {cond} {tr}")
        elif p.is_pi and p.phase == 0.0 and p.duration is None:
            lines.append(f"PI {p.species} {cond} {tr}")
        else:
            extra = f"area={p.area!r} phase={p.phase!r}"
            if p.duration is not None:
                extra += f" dur={p.duration!r}"
            lines.append(f"ROT {p.species} {cond} {tr} {extra}")
    if len(seq.pulses) in marks:
        lines.append("CYCLE")
    return "\n".join(lines) + "\n"


def sequence_from_text(text: str) -> PulseSequence:
    pulses: list[Pulse] = []
    marks: list[int] = []
    for lineno, line in _split_content(text):
        tokens = line.split()
        kind_tok = tokens[0].upper()
        try:
            if kind_tok == "CYCLE":
                if not marks or marks[-1] != len(pulses):
                    marks.append(len(pulses))
                continue
            species = tokens[1]
            fields: dict[str, str] = {}
            for tok in tokens[2:]:
                key, _, val = tok.partition("=")
                fields[key.upper()] = val
            if "END" in fields:
                cond: Condition = End(fields["END"], int(fields["N"]))
            else:
                cond = Interior(int(fields["L"]), int(fields["R"]))
            a, _, b = fields["T"].partition(":") if "T" in fields else ("0", ":", "1")
            transition = (int(a), int(b))
            if kind_tok == "PI":
                pulses.append(Pulse(species, cond, transition))
            elif kind_tok == "PUMP":
                pulses.append(Pulse(species, cond, transition,
                                    kind=PulseKind.DECAY_PUMP))
            elif kind_tok == "ROT":
                pulses.append(Pulse(species, cond, transition,
                                    area=float(fields.get("AREA", repr(math.pi))),
                                    phase=float(fields.get("PHASE", "0")),
                                    duration=(float(fields["DUR"])
                                              if "DUR" in fields else None)))
            else:
                raise ValueError(f"unknown pulse kind {kind_tok!r}")
        except ParseError:
            raise
        except (ValueError, IndexError, KeyError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return PulseSequence(tuple(pulses), tuple(marks))


def validate_sequence(poly: Polymer, seq: PulseSequence) -> None:
    """Raise if any pulse references a species or state the polymer lacks."""
    for i, p in enumerate(seq):
        try:
            sp = poly.species_by_id(p.species)
        except KeyError as exc:
            raise LatticeError(f"pulse {i}: {exc}") from exc
        for s in p.transition:
            if s >= sp.num_states:
                raise LatticeError(f"pulse {i}: state {s} out of range for {sp.id}")
        if p.kind is PulseKind.DECAY_PUMP:
            if sp.fast_decay is None:
                raise LatticeError(f"pulse {i}: species {sp.id} has no fast decay")
            if p.transition[1] != sp.fast_decay[0]:
                raise LatticeError(f"pulse {i}: pump must target state "
                                   f"{sp.fast_decay[0]}")
