"""Compiler from logical operations to resonant pulse sequences.

Lowers bit loading, information shifts, Fredkin gates, full reversible
circuits (two parallel realizations), section-to-section transfer and
readout onto the conditioned-pulse instruction set of the lattice module.

Shift algebra
-------------
A six-pulse swap exchanges the values of two adjacent species everywhere,
which displaces one species' information stream by +1 unit and the other
by -1.  Consequently every compiled shift has stream displacements
(tA, tB, tC) in triples with tA + tB + tC = 0, and displacements relative
to the data stream obey rB + rC = 0 (mod 3).  The shepherd compiler works
inside this invariant: it tracks every shepherd token and in-flight bit
symbolically and refuses to emit a move the algebra cannot realize.  Two
four-swap cycles are the basis:

    DAB = swap(A,B) swap(C,A) swap(B,C) swap(C,A)   -> (+1, -1, 0) triples
    DBC = swap(B,C) swap(A,B) swap(C,A) swap(A,B)   -> (0, +1, -1) triples

The shepherd method stores a section's wires on its first A units and
keeps three marker bits (the 011 of the shepherd triple plus one spare C,
needed to reach both mod-3 residue classes when routing bits).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .lattice import (
    LEFT,
    Condition,
    Configuration,
    End,
    Interior,
    Polymer,
    Pulse,
    PulseKind,
    PulseSequence,
    apply_sequence,
    sequence_of,
)


class CompileError(Exception):
    """Base class for compilation failures."""


class NonAdjacentSpecies(CompileError):
    pass


class CenterOfGravityViolation(CompileError):
    pass


class PartialPeriodPolymer(CompileError):
    pass


class CapacityExceeded(CompileError):
    pass


class NonZeroInitialState(CompileError):
    pass


class UnknownSpecies(CompileError):
    pass


class LayoutMismatch(CompileError):
    pass


class SectionOverflow(CompileError):
    pass


# ---------------------------------------------------------------------------
# Swap, Fredkin and shift primitives
# ---------------------------------------------------------------------------

def _require_period3(poly: Polymer) -> None:
    if poly.period != 3:
        raise LayoutMismatch("compiler routines require a three-species pattern")
    if poly.has_partial_period():
        raise PartialPeriodPolymer(
            f"length {poly.length} is not a whole number of periods")


def _states_of_neighbor(poly: Polymer, species_id: str, side: str) -> range:
    idx = poly.species_ids.index(species_id)
    neighbor = poly.pattern[(idx - 1) % poly.period if side == LEFT
                            else (idx + 1) % poly.period]
    return range(neighbor.num_states)


def _cnot(poly: Polymer, target: str, control_side: str) -> list[Pulse]:
    """Flip every interior `target` unit whose `control_side` neighbor is 1."""
    pulses = []
    for other in _states_of_neighbor(poly, target,
                                     LEFT if control_side != LEFT else "right"):
        if control_side == LEFT:
            cond = Interior(1, other)
        else:
            cond = Interior(other, 1)
        pulses.append(Pulse(target, cond, (0, 1)))
    return pulses


def compile_swap(poly: Polymer, x: str, y: str,
                 include_end: bool = False) -> PulseSequence:
    """Exchange the values of adjacent species x and y in every pair.

    x must sit immediately left of y in the pattern (cyclically).  The
    sequence is the three-CNOT swap: flip y where x=1, flip x where y=1,
    flip y where x=1.  With ``include_end`` the end unit's pulse is added
    mid-sequence so the chain's first unit takes part as well.
    """
    _require_period3(poly)
    ids = poly.species_ids
    try:
        ix, iy = ids.index(x), ids.index(y)
    except ValueError as exc:
        raise UnknownSpecies(str(exc)) from exc
    if (ix + 1) % poly.period != iy:
        raise NonAdjacentSpecies(f"{x} is not immediately left of {y}")
    pulses = _cnot(poly, y, LEFT)
    pulses += _cnot(poly, x, "right")
    if include_end:
        if ix != 0:
            raise NonAdjacentSpecies(
                f"end unit is species {ids[0]}, cannot end-swap {x}")
        pulses.append(Pulse(x, End(LEFT, 1), (0, 1)))
    pulses += _cnot(poly, y, LEFT)
    return sequence_of(pulses, metadata=f"swap {x}<->{y}")


def fredkin_targets(poly: Polymer, control: str) -> tuple[str, str]:
    """Species pair exchanged by the Fredkin sequence with this control."""
    ids = poly.species_ids
    if control not in ids:
        raise UnknownSpecies(f"no species {control!r}")
    rest = [s for s in ids if s != control]
    return rest[0], rest[1]


def compile_fredkin(poly: Polymer, control: str) -> PulseSequence:
    """Controlled exchange of the other two units of each period.

    Control A or C: five pulses (two conditional-flip pairs around the
    doubly-conditioned middle pulse).  Control B sits between its targets,
    where no unit sees both partners, so it is realized by conjugating the
    control-A sequence with a full A<->B swap; brute-force tests pin the
    behavior of all three.
    """
    _require_period3(poly)
    a, b, c = poly.species_ids
    if control == a:
        pulses = _cnot(poly, c, LEFT) + [Pulse(b, Interior(1, 1), (0, 1))] \
            + _cnot(poly, c, LEFT)
        return sequence_of(pulses, metadata=f"fredkin control {a}")
    if control == c:
        pulses = _cnot(poly, a, "right") + [Pulse(b, Interior(1, 1), (0, 1))] \
            + _cnot(poly, a, "right")
        return sequence_of(pulses, metadata=f"fredkin control {c}")
    if control == b:
        swap_ab = compile_swap(poly, a, b)
        inner = compile_fredkin(poly, a)
        return sequence_of(tuple(swap_ab) + tuple(inner) + tuple(swap_ab),
                           metadata=f"fredkin control {b}")
    raise UnknownSpecies(f"no species {control!r}")


def _dab_block(poly: Polymer) -> tuple[Pulse, ...]:
    """Four swaps displacing streams by (+1, -1, 0) triples."""
    a, b, c = poly.species_ids
    return (tuple(compile_swap(poly, a, b)) + tuple(compile_swap(poly, c, a))
            + tuple(compile_swap(poly, b, c)) + tuple(compile_swap(poly, c, a)))


def _dbc_block(poly: Polymer) -> tuple[Pulse, ...]:
    """Four swaps displacing streams by (0, +1, -1) triples."""
    a, b, c = poly.species_ids
    return (tuple(compile_swap(poly, b, c)) + tuple(compile_swap(poly, a, b))
            + tuple(compile_swap(poly, c, a)) + tuple(compile_swap(poly, a, b)))


_BLOCK_CACHE: dict[tuple, dict[str, tuple[Pulse, ...]]] = {}


def _blocks(poly: Polymer) -> dict[str, tuple[Pulse, ...]]:
    key = (poly.species_ids, tuple(s.num_states for s in poly.pattern))
    if key not in _BLOCK_CACHE:
        dab = _dab_block(poly)
        dbc = _dbc_block(poly)
        _BLOCK_CACHE[key] = {
            "dab": dab, "dab_inv": tuple(reversed(dab)),
            "dbc": dbc, "dbc_inv": tuple(reversed(dbc)),
        }
    return _BLOCK_CACHE[key]


def shift_pulses(poly: Polymer, t_a: int, t_b: int, t_c: int) -> tuple[Pulse, ...]:
    """Pulses displacing the A/B/C information streams by whole triples.

    Zero-sum is the conservation law of the swap algebra; anything else is
    unreachable and rejected.
    """
    if t_a + t_b + t_c != 0:
        raise CenterOfGravityViolation(
            f"stream displacements {(t_a, t_b, t_c)} do not sum to zero")
    blocks = _blocks(poly)
    alpha, beta = t_a, -t_c
    pulses: list[Pulse] = []
    pulses.extend(blocks["dab" if alpha > 0 else "dab_inv"] * abs(alpha))
    pulses.extend(blocks["dbc" if beta > 0 else "dbc_inv"] * abs(beta))
    return tuple(pulses)


def compile_shift(poly: Polymer, species: str, offset: int,
                  others: dict[str, int] | None = None) -> PulseSequence:
    """Displace one species' information by ``offset`` triples.

    ``others`` gives the compensating displacements of the remaining
    species; the full plan must keep the information center of gravity
    fixed (zero displacement sum).
    """
    _require_period3(poly)
    plan = {species: offset}
    plan.update(others or {})
    for sid in plan:
        if sid not in poly.species_ids:
            raise UnknownSpecies(f"no species {sid!r}")
    a, b, c = poly.species_ids
    t = (plan.get(a, 0), plan.get(b, 0), plan.get(c, 0))
    return PulseSequence(shift_pulses(poly, *t),
                         metadata=f"shift {plan}")


# ---------------------------------------------------------------------------
# Reversible circuits
# ---------------------------------------------------------------------------

class FredkinGate(NamedTuple):
    control: int
    t1: int
    t2: int


@dataclass(frozen=True)
class CircuitDesign:
    """Fredkin netlist on named wires, with optional constant ancillas."""

    num_wires: int
    gates: tuple[FredkinGate, ...]
    names: tuple[str, ...] = ()
    constants: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for g in self.gates:
            if len({g.control, g.t1, g.t2}) != 3:
                raise ValueError(f"gate {g} reuses a wire")
            for w in g:
                if not 0 <= w < self.num_wires:
                    raise ValueError(f"gate {g} uses wire {w} out of range")
        for w, v in self.constants.items():
            if not 0 <= w < self.num_wires or v not in (0, 1):
                raise ValueError(f"bad constant {w}={v}")

    @property
    def data_wires(self) -> tuple[int, ...]:
        return tuple(w for w in range(self.num_wires) if w not in self.constants)

    def initial_values(self, inputs: Sequence[int]) -> list[int]:
        if len(inputs) != len(self.data_wires):
            raise ValueError("wrong number of input bits")
        vals = [0] * self.num_wires
        for w, v in self.constants.items():
            vals[w] = v
        for w, v in zip(self.data_wires, inputs):
            vals[w] = int(v)
        return vals

    def evaluate(self, inputs: Sequence[int]) -> tuple[int, ...]:
        """Direct gate-by-gate evaluation; the oracle for compiled programs."""
        vals = self.initial_values(inputs)
        for g in self.gates:
            if vals[g.control]:
                vals[g.t1], vals[g.t2] = vals[g.t2], vals[g.t1]
        return tuple(vals)


def circuit_from_text(text: str) -> CircuitDesign:
    """Parse a circuit file.

    ``wires N`` then one gate per line: ``fredkin c t1 t2`` or the macro
    lines ``and a b dest`` / ``or a b dest`` / ``not a dest`` /
    ``copy a dest`` which expand to Fredkin gates on fresh constant
    ancilla wires.
    """
    num_wires: int | None = None
    gates: list[FredkinGate] = []
    constants: dict[int, int] = {}
    extra = 0

    def fresh(value: int) -> int:
        nonlocal extra
        w = num_wires + extra
        extra += 1
        constants[w] = value
        return w

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            op = tok[0].lower()
            if op == "wires":
                num_wires = int(tok[1])
                continue
            if num_wires is None:
                raise ValueError("'wires N' must come first")
            args = [int(t) for t in tok[1:]]
            if op == "fredkin":
                gates.append(FredkinGate(*args))
            elif op == "and":
                a_w, b_w, dest = args
                gates.append(FredkinGate(a_w, fresh(0) if dest != (z := fresh(0)) else z, b_w))
            elif op == "or":
                a_w, b_w, dest = args
                gates.append(FredkinGate(a_w, b_w, fresh(1)))
            elif op == "not":
                (a_w, dest) = args
                gates.append(FredkinGate(a_w, fresh(1), fresh(0)))
            elif op == "copy":
                (a_w, dest) = args
                gates.append(FredkinGate(a_w, fresh(0), fresh(1)))
            else:
                raise ValueError(f"unknown gate {op!r}")
        except (ValueError, IndexError, TypeError) as exc:
            raise CompileError(f"line {lineno}: {exc}") from exc
    if num_wires is None:
        raise CompileError("missing 'wires N' header")
    return CircuitDesign(num_wires + extra, tuple(gates),
                         constants=constants)


def circuit_to_text(circuit: CircuitDesign) -> str:
    lines = [f"wires {circuit.num_wires}"]
    for w, v in sorted(circuit.constants.items()):
        lines.append(f"# wire {w} constant {v}")
    for g in circuit.gates:
        lines.append(f"fredkin {g.control} {g.t1} {g.t2}")
    return "\n".join(lines) + "\n"


# Macro truth: Fredkin(c; t1, t2) maps t1 <-> t2 when c=1.
#   AND(a, b) : Fredkin(a; z=0, b)  -> z' = a AND b
#   OR(a, b)  : Fredkin(a; b, o=1)  -> b' = a OR b
#   NOT(a)    : Fredkin(a; o=1, z=0)-> o' = NOT a
#   COPY(a)   : Fredkin(a; z=0, o=1)-> z' = a
# Each macro burns constant ancillas and leaves garbage, as reversible
# logic must.


# ---------------------------------------------------------------------------
# Section layouts
# ---------------------------------------------------------------------------

SHEPHERD = "shepherd"
SPARSE = "sparse"


@dataclass(frozen=True)
class SectionLayout:
    """How one processor's bits sit inside its section of the polymer."""

    method: str
    num_wires: int
    section_triples: int
    # shepherd method
    padded_wires: int = 0
    # sparse method
    interval: int = 0

    @staticmethod
    def shepherd(num_wires: int) -> "SectionLayout":
        if num_wires < 1:
            raise LayoutMismatch("need at least one wire")
        m = max(num_wires, 4) + 2
        return SectionLayout(SHEPHERD, num_wires, 2 * m, padded_wires=m)

    @staticmethod
    def sparse(num_wires: int) -> "SectionLayout":
        if num_wires < 1:
            raise LayoutMismatch("need at least one wire")
        m = math.ceil(num_wires / 3)
        span = _SparseProgram.section_span(num_wires, m)
        return SectionLayout(SPARSE, num_wires, span, interval=m)

    def required_polymer_triples(self, sections: int) -> int:
        if self.method == SHEPHERD:
            # one blank guard section on each side
            return (sections + 2) * self.section_triples
        return (sections + 2) * self.section_triples


def layout_from_text(text: str) -> SectionLayout:
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in line.split():
            key, _, val = tok.partition("=")
            fields[key.lower()] = val
    try:
        method = fields["method"].lower()
        n = int(fields["n"])
    except (KeyError, ValueError) as exc:
        raise CompileError(f"bad layout file: {exc}") from exc
    if method == SHEPHERD:
        return SectionLayout.shepherd(n)
    if method == SPARSE:
        return SectionLayout.sparse(n)
    raise CompileError(f"unknown layout method {method!r}")


def layout_to_text(layout: SectionLayout) -> str:
    return f"method={layout.method} N={layout.num_wires}\n"


# ---------------------------------------------------------------------------
# Shepherd-method compiler
# ---------------------------------------------------------------------------

_WIRE = "w"
_TOK_B = "tok:b"
_TOK_S1 = "tok:s1"
_TOK_S2 = "tok:s2"
_TOKENS = (_TOK_B, _TOK_S1, _TOK_S2)


class _ShepherdProgram:
    """Emits pulses while tracking every marked value symbolically.

    Slot coordinates live in the data frame of one section (slot 1 = first
    data triple); every section holds the same relative pattern, so cross-
    section aliasing is exactly congruence mod the section length.  All
    occupancy lookups and collision checks work modulo that length.

    Streams hold tagged values: wire bits (value unknown), shepherd tokens
    (known 1) and in-flight cargo.  Fredkin pulses fire at token slots;
    the tracker applies their value-level effect and rejects any firing
    whose side effects would be value-dependent.
    """

    def __init__(self, poly: Polymer, layout: SectionLayout, sections: int):
        _require_period3(poly)
        if any(sp.num_states != 2 for sp in poly.pattern):
            raise LayoutMismatch("shepherd compiler needs 2-state species")
        if layout.method != SHEPHERD:
            raise LayoutMismatch("shepherd compiler needs a shepherd layout")
        need = layout.required_polymer_triples(sections)
        if poly.length // 3 < need:
            raise SectionOverflow(
                f"{sections} sections need {need} triples, polymer has "
                f"{poly.length // 3}")
        self.poly = poly
        self.layout = layout
        self.n = layout.num_wires
        self.m = layout.padded_wires
        self.stride = layout.section_triples  # 2 * m
        self.sections = sections
        self.pulses: list[Pulse] = []
        self.cycle_marks: list[int] = []
        self.drift = 0
        # occupancy: stream -> {slot: tag}
        self.A: dict[int, str] = {w + 1: f"{_WIRE}{w}" for w in range(self.n)}
        self.B: dict[int, str] = {self.m + 1: _TOK_B}
        self.C: dict[int, str] = {self.m + 1: _TOK_S1, self.m + 2: _TOK_S2}
        self.wire_slot: dict[int, int] = {w: w + 1 for w in range(self.n)}
        self.park_s1: int | None = None
        self.park_b: int | None = None
        self.checkpoints: list[str] = []
        self._gate_slot: int | None = None
        self._cargo_n = 0

    # -- occupancy helpers -------------------------------------------------

    def _occupant(self, stream: dict[int, str], slot: int) -> tuple[int, str] | None:
        for s, tag in stream.items():
            if (s - slot) % self.stride == 0:
                return s, tag
        return None

    def _assert_free(self, stream: dict[int, str], slot: int, what: str) -> None:
        hit = self._occupant(stream, slot)
        if hit is not None:
            raise CompileError(f"{what}: slot {slot} aliases {hit}")

    def _check_stream(self, stream: dict[int, str]) -> None:
        slots = sorted(stream)
        for i, s in enumerate(slots):
            for t in slots[i + 1:]:
                if (t - s) % self.stride == 0:
                    raise CompileError(
                        f"values {stream[s]}@{s} and {stream[t]}@{t} alias "
                        f"across sections")

    def zone_slot(self, residue: int, avoid: Iterable[int] = ()) -> int:
        """A blank zone A-slot with the given slot residue mod 3."""
        avoid = {a % self.stride for a in avoid}
        for s in range(self.n + 1, 2 * self.m + 1):
            if s % 3 != residue % 3 or s % self.stride in avoid:
                continue
            if self._occupant(self.A, s) is None:
                return s
        raise CompileError(f"no free zone slot with residue {residue % 3}")

    # -- emission ----------------------------------------------------------

    def ride(self, r_b: int, r_c: int) -> None:
        """Stream move: B-stream values shift r_b triples relative to the
        data, C-stream values r_c; legal iff r_b + r_c = 0 (mod 3)."""
        if r_b == 0 and r_c == 0:
            return
        if (r_b + r_c) % 3 != 0:
            raise CompileError(f"ride ({r_b}, {r_c}) violates the shift algebra")
        t_a = -(r_b + r_c) // 3
        self.pulses.extend(shift_pulses(self.poly, t_a, r_b + t_a, r_c + t_a))
        self.drift += t_a
        self.B = {s + r_b: tag for s, tag in self.B.items()}
        self.C = {s + r_c: tag for s, tag in self.C.items()}
        self._check_stream(self.B)
        self._check_stream(self.C)
        self._bounds_check()

    def _bounds_check(self) -> None:
        # physical triple of slot s (section k): guard sections give one
        # stride of slack on each side; transients inside a ride stay
        # within +-2 triples of tracked endpoints.
        occupied = list(self.A) + list(self.B) + list(self.C)
        lo, hi = min(occupied), max(occupied)
        if lo + self.drift < 3 - self.stride or hi + self.drift > 2 * self.stride - 3:
            raise CompileError(
                f"values drifted into the guard padding: span [{lo},{hi}] "
                f"drift {self.drift}")

    def _token_slots(self, stream: dict[int, str]) -> list[int]:
        return sorted(s for s, tag in stream.items() if tag in _TOKENS)

    def _fire_exchange(self, slot: int, left: dict[int, str],
                       right: dict[int, str], what: str) -> None:
        """Value exchange between two streams at one slot (mod sections)."""
        lhit = self._occupant(left, slot)
        rhit = self._occupant(right, slot)
        if lhit is None and rhit is None:
            return
        if lhit is not None and rhit is not None:
            ls, lt = lhit
            rs, rt = rhit
            del left[ls]
            del right[rs]
            left[ls] = rt
            right[rs] = lt
            return
        if lhit is not None:
            ls, lt = lhit
            del left[ls]
            self._assert_free(right, ls, what)
            right[ls] = lt
        else:
            rs, rt = rhit
            del right[rs]
            self._assert_free(left, rs, what)
            left[rs] = rt

    def fredkin_c(self) -> None:
        """Control-C Fredkin: exchanges A and B at every triple whose C=1."""
        for s, tag in self.C.items():
            if tag not in _TOKENS:
                raise CompileError(f"cargo {tag} in C during control-C fredkin")
        self.pulses.extend(compile_fredkin(self.poly, self.poly.species_ids[2]))
        for s in self._token_slots(self.C):
            self._fire_exchange(s, self.A, self.B, "fredkin C")
        self._sync_wires()

    def fredkin_b(self) -> None:
        """Control-B Fredkin: exchanges A and C where B=1."""
        for s, tag in list(self.B.items()):
            if tag in _TOKENS:
                continue
            # cargo enables the pulse only when its (unknown) value is 1,
            # so its triple must make the exchange a no-op
            if self._occupant(self.A, s) is not None or \
                    self._occupant(self.C, s) is not None:
                raise CompileError(f"cargo {tag}@{s} would exchange data")
        self.pulses.extend(compile_fredkin(self.poly, self.poly.species_ids[1]))
        for s in self._token_slots(self.B):
            self._fire_exchange(s, self.A, self.C, "fredkin B")
        self._sync_wires()

    def fredkin_a(self) -> None:
        """Control-A Fredkin: the logical gate; every occupied A slot must
        have blank B and C except the assembled gate triple."""
        gate = None
        for s in self.A:
            bh = self._occupant(self.B, s)
            ch = self._occupant(self.C, s)
            if bh is None and ch is None:
                continue
            if bh is not None and ch is not None and gate is None \
                    and bh[1] not in _TOKENS and ch[1] not in _TOKENS:
                gate = s
                continue
            raise CompileError(
                f"control-A fredkin would act outside the gate triple at {s}")
        if gate is None:
            raise CompileError("control-A fredkin with no assembled operands")
        self.pulses.extend(compile_fredkin(self.poly, self.poly.species_ids[0]))
        self._gate_slot = gate

    def _sync_wires(self) -> None:
        self.wire_slot = {}
        for s, tag in self.A.items():
            if tag.startswith(_WIRE):
                self.wire_slot[int(tag[len(_WIRE):])] = s

    # -- rest-state management ----------------------------------------------

    def prelude(self) -> None:
        """Park the B token and one C token; leave one C roamer."""
        self.fredkin_b()            # s1: C@(m+1) -> A@(m+1)
        self.park_s1 = self.m + 1
        g = self.zone_slot(self.m % 3, avoid=[self.m + 1])
        self.ride(g - (self.m + 1), g - (self.m + 2))   # b, s2 -> slot g
        self.fredkin_c()            # b: B@g -> A@g
        self.park_b = g

    def postlude(self) -> None:
        """Undo the prelude and undo any accumulated frame drift."""
        g = self.park_b
        self.move_roamer(g)
        self.fredkin_c()            # b -> B@g
        self.park_b = None
        self.ride((self.m + 1) - g, (self.m + 2) - g)
        self.fredkin_b()            # s1 -> C@(m+1)
        self.park_s1 = None
        if self.drift:
            d = self.drift
            self.ride(2 * d, -(-d))  # tA = -d, restores physical alignment
        assert self.drift == 0

    def roamer_slot(self) -> int:
        for s, tag in self.C.items():
            if tag == _TOK_S2:
                return s
        raise CompileError("roamer token lost")

    def move_roamer(self, slot: int) -> None:
        cur = self.roamer_slot()
        if cur == slot:
            return
        if len(self.B) == 0:
            self.ride(-(slot - cur), slot - cur)
        else:
            delta = slot - cur
            if delta % 3 != 0:
                raise CompileError("roamer residue change needs an empty B stream")
            self.ride(0, delta)

    # -- bit transport -------------------------------------------------------

    def _solo_move(self, src: int, dst: int) -> None:
        """Carry the A-content of src to the blank A-slot dst; same residue."""
        if (dst - src) % 3 != 0:
            raise CompileError("solo move needs matching residues")
        self._assert_free(self.B, src, "solo grab")
        self.move_roamer(src)
        self.fredkin_c()                      # grab: A@src -> B@src
        self.ride(dst - src, dst - src)       # cargo and roamer to dst
        self.fredkin_c()                      # deposit: B@dst -> A@dst
        self._sync_wires()

    def _exchange_same_residue(self, i: int, j: int) -> None:
        """Swap A-contents of i and j when i = j (mod 3): out-and-back ride
        with the deposit pulse doubling as the grab of the second bit."""
        self.move_roamer(i)
        self.fredkin_c()                      # x_i -> B@i
        self.ride(j - i, j - i)
        self.fredkin_c()                      # x_i -> A@j, x_j -> B@j
        self.ride(i - j, i - j)
        self.fredkin_c()                      # x_j -> A@i
        self._sync_wires()

    def _unpark_s1_pair(self) -> None:
        """Bring b into B and s1 into C (the two-token working set)."""
        self.move_roamer(self.park_b)
        self.fredkin_c()                      # b -> B@park_b
        b_slot = self.park_b
        self.park_b = None
        r_b = self.park_s1 - b_slot
        r_c = -r_b % 3
        self.ride(r_b, r_c - 3 if r_c == 2 and False else r_c)
        self.fredkin_b()                      # s1 -> C@park_s1
        self.park_s1 = None

    def _repark_s1_pair(self) -> None:
        """Park s1 then b again, keeping the park-slot residues fixed."""
        s1 = self._slot_of(self.C, _TOK_S1)
        b = self._slot_of(self.B, _TOK_B)
        # co-locate b with s1 at q: residue forced to 2*(b+s1) mod 3
        q_res = (2 * (b + s1)) % 3
        if q_res != (self.m + 1) % 3:
            raise CompileError("s1 park residue drifted")
        q = self.zone_slot(q_res, avoid=[self.park_b or -99])
        roam = self.roamer_slot()
        self.ride(q - b, q - s1)
        self.fredkin_b()                      # s1 -> A@q
        self.park_s1 = q
        # park b via the roamer
        b = self._slot_of(self.B, _TOK_B)
        roam = self.roamer_slot()
        q2_res = (2 * (b + roam)) % 3
        if q2_res != self.m % 3:
            raise CompileError("b park residue drifted")
        q2 = self.zone_slot(q2_res, avoid=[q])
        self.ride(q2 - b, q2 - roam)
        self.fredkin_c()                      # b -> A@q2
        self.park_b = q2

    def _slot_of(self, stream: dict[int, str], tag: str) -> int:
        for s, t in stream.items():
            if t == tag:
                return s
        raise CompileError(f"token {tag} not in expected stream")

    def _zone_shuffle(self, h1: int, h2: int) -> None:
        """Move A-content between zone slots of different residues.

        Needs two C tokens: one grabs, the other deposits; which is which
        depends on the residue gap.
        """
        gap = (h2 - h1) % 3
        if gap == 0:
            self._solo_move(h1, h2)
            return
        self._unpark_s1_pair()
        s1 = self._slot_of(self.C, _TOK_S1)
        s2 = self._slot_of(self.C, _TOK_S2)
        delta = s2 - s1
        # grabber at h1, partner at h1 + delta (or roles swapped)
        if (2 * (h2 - h1) - delta) % 3 == 0:
            grab_tag, dep_tag, d = _TOK_S1, _TOK_S2, delta
        elif (2 * (h2 - h1) + delta) % 3 == 0:
            grab_tag, dep_tag, d = _TOK_S2, _TOK_S1, -delta
        else:
            raise CompileError("no deposit token for this residue gap")
        grab = self._slot_of(self.C, grab_tag)
        b = self._slot_of(self.B, _TOK_B)
        r_c = h1 - grab
        r_b = (-r_c) % 3
        self.ride(r_b, r_c)
        self.fredkin_c()                      # grab cargo at h1
        r_b2 = h2 - h1
        r_c2 = (h2 - d) - h1                  # deposit token to h2
        self.ride(r_b2, r_c2)
        self.fredkin_c()                      # deposit at h2
        self._repark_s1_pair()
        self._sync_wires()

    def move_bit(self, src: int, dst: int) -> None:
        """Carry the A-content of src to the blank slot dst, any residues."""
        if src == dst:
            return
        if (dst - src) % 3 == 0:
            self._solo_move(src, dst)
            return
        h1 = self.zone_slot(src % 3, avoid=[dst, self.park_s1 or -99,
                                            self.park_b or -99])
        h2 = self.zone_slot(dst % 3, avoid=[h1, dst, self.park_s1 or -99,
                                            self.park_b or -99])
        if src != h1:
            self._solo_move(src, h1)
        self._zone_shuffle(h1, h2)
        if h2 != dst:
            self._solo_move(h2, dst)

    def interchange(self, i: int, j: int) -> None:
        """Exchange the A-contents of slots i and j."""
        if i == j:
            return
        if (j - i) % 3 == 0:
            self._exchange_same_residue(i, j)
            return
        hole = self.zone_slot(j % 3, avoid=[self.park_s1 or -99,
                                            self.park_b or -99])
        self.move_bit(j, hole)
        self.move_bit(i, j)
        self.move_bit(hole, i)

    # -- the gate ------------------------------------------------------------

    def staging_base(self) -> int:
        for s in (1, 2, 3):
            if s % 3 == self.park_b % 3:
                return s
        raise CompileError("no staging base")  # pragma: no cover

    def route_wire(self, wire: int, slot: int) -> None:
        cur = self.wire_slot[wire]
        if cur != slot:
            self.interchange(cur, slot)

    def gate(self, g: FredkinGate) -> None:
        """One Fredkin gate: route operands to the staging triple-run,
        gather them into one triple, fire control-A, and undo."""
        s = self.staging_base()
        self.route_wire(g.control, s)
        self.route_wire(g.t1, s + 1)
        self.route_wire(g.t2, s + 2)
        pb = self.park_b
        self.move_roamer(pb)
        self.fredkin_c()                      # b -> B@pb
        self.park_b = None
        self.ride((s + 2) - pb, (s + 1) - pb)  # b -> B@(s+2), roamer -> C@(s+1)
        self._checkpoint_staged(s)
        self.fredkin_c()                      # y -> B@(s+1)
        self.ride(0, 3)                       # roamer clears to C@(s+4)
        self.fredkin_b()                      # z -> C@(s+2)
        self.ride(-1, -2)                     # assemble x,y,z in triple s
        self._checkpoint_assembled(s)
        self.fredkin_a()                      # the gate
        self.ride(1, 2)
        self.fredkin_b()                      # z back to A@(s+2)
        self.ride(0, -3)
        self.fredkin_c()                      # y back to A@(s+1)
        self.ride(pb - (s + 2), pb - (s + 1))
        self.fredkin_c()                      # b parked again
        self.park_b = pb
        self.route_wire(g.t2, g.t2 * 0 + self.wire_slot[g.t2])  # no-op, map synced
        # undo routing so every wire returns to its home slot
        self.route_wire(g.t2, g.t2 + 1)
        self.route_wire(g.t1, g.t1 + 1)
        self.route_wire(g.control, g.control + 1)
        self.cycle_marks.append(len(self.pulses))

    def _checkpoint_staged(self, s: int) -> None:
        ok = (self._occupant(self.C, s + 1) is not None
              and self._occupant(self.B, s + 2) is not None
              and self._occupant(self.A, s) is not None)
        if not ok:
            raise CompileError("staging checkpoint x00 y01 z10 not reached")
        self.checkpoints.append(f"x00 y01 z10 @ slot {s}")

    def _checkpoint_assembled(self, s: int) -> None:
        ok = (self._occupant(self.B, s) is not None
              and self._occupant(self.C, s) is not None)
        if not ok:
            raise CompileError("assembly checkpoint xyz not reached")
        self.checkpoints.append(f"xyz 010 001 @ slot {s}")

    # -- section transfer ------------------------------------------------------

    def transfer(self, wires: Sequence[int], direction: str) -> None:
        """Move the chosen wires' bits to the same slots one section over."""
        step = self.stride if direction == "right" else -self.stride
        slots = [self.wire_slot[w] for w in wires]
        for slot in slots:
            self.move_roamer(slot)
            self.fredkin_c()                  # bit -> B@slot
        if slots:
            roam = self.roamer_slot()
            self.ride(step, -step)
            self.move_roamer(roam % 1 + roam)  # keep tracker explicit
        for slot in slots:
            self.move_roamer(slot + step)
            self.fredkin_c()                  # deposit in the next section
        self._sync_wires()

    # -- finish ----------------------------------------------------------------

    def finish(self, metadata: str) -> PulseSequence:
        return PulseSequence(tuple(self.pulses), tuple(self.cycle_marks),
                             metadata=metadata)


def shepherd_section_bits(layout: SectionLayout,
                          inputs: Sequence[int]) -> list[tuple[int, int, int]]:
    """Triple values (a, b, c) of one formatted section, lead slot first."""
    if layout.method != SHEPHERD:
        raise LayoutMismatch("not a shepherd layout")
    if len(inputs) != layout.num_wires:
        raise LayoutMismatch("wrong number of input bits")
    m = layout.padded_wires
    triples = [(0, 0, 0)] * layout.section_triples
    for w, bit in enumerate(inputs):
        triples[w] = (int(bit), 0, 0)
    triples[m] = (0, 1, 1)        # shepherd triple, slot m+1
    triples[m + 1] = (0, 0, 1)    # spare C token, slot m+2
    return triples


def format_configuration(poly: Polymer, layout: SectionLayout,
                         section_inputs: Sequence[Sequence[int]]) -> Configuration:
    """Configuration with every section formatted and guard sections blank."""
    triples = [(0, 0, 0)] * (poly.length // 3)
    base = layout.section_triples
    for k, inputs in enumerate(section_inputs):
        sec = shepherd_section_bits(layout, inputs)
        for t, vals in enumerate(sec):
            triples[base + k * layout.section_triples + t] = vals
    states: list[int] = []
    for vals in triples:
        states.extend(vals)
    states = states[:poly.length]
    return Configuration(poly, tuple(states))


def read_section_outputs(config: Configuration, layout: SectionLayout,
                         section: int) -> tuple[int, ...]:
    """Wire values of one section from a final configuration."""
    base = layout.section_triples
    out = []
    for w in range(layout.num_wires):
        t = base + section * layout.section_triples + w
        out.append(config.states[3 * t])
    return tuple(out)


def compile_circuit_method1(circuit: CircuitDesign, layout: SectionLayout,
                            poly: Polymer, sections: int = 1) -> PulseSequence:
    """Shepherd-method realization of a reversible circuit.

    The emitted sequence acts on every formatted section simultaneously;
    ``sections`` only sets the capacity check.
    """
    if layout.method != SHEPHERD or layout.num_wires != circuit.num_wires:
        raise LayoutMismatch("layout does not fit the circuit")
    prog = _ShepherdProgram(poly, layout, sections)
    prog.prelude()
    for g in circuit.gates:
        prog.gate(g)
    prog.postlude()
    return prog.finish(f"method1 circuit: {len(circuit.gates)} gates")


def compile_section_transfer(wires: Sequence[int], direction: str,
                             layout: SectionLayout, poly: Polymer,
                             sections: int = 2) -> PulseSequence:
    """Move the chosen wires' bits into the neighboring section."""
    if direction not in ("left", "right"):
        raise LayoutMismatch(f"direction must be left or right")
    if layout.method != SHEPHERD:
        raise LayoutMismatch("transfer needs a shepherd layout")
    for w in wires:
        if not 0 <= w < layout.num_wires:
            raise LayoutMismatch(f"no wire {w}")
    prog = _ShepherdProgram(poly, layout, sections)
    prog.prelude()
    prog.transfer(tuple(wires), direction)
    prog.postlude()
    return prog.finish(f"transfer {list(wires)} {direction}")


def characterize_fredkin_context(poly: Polymer) -> dict:
    """Brute-force check of the five-pulse Fredkin over neighbor contexts.

    Verifies, for every pair of adjacent triples (64 states), that the
    control-A sequence applies an independent Fredkin to each triple; in
    particular the next triple's A value never changes the action.  The
    dual-context C pulses make the sequence insensitive by construction;
    this function is the recorded evidence.
    """
    from .lattice import Species
    test_poly = Polymer(poly.pattern, 12)
    seq = compile_fredkin(test_poly, test_poly.species_ids[0])

    def fredkin(t):
        x, y, z = t
        return (x, z, y) if x else (x, y, z)

    failures = []
    for bits in itertools.product((0, 1), repeat=6):
        states = (0, 0, 0) + bits + (0, 0, 0)
        config = Configuration(test_poly, states)
        out = apply_sequence(config, seq)
        expected = (0, 0, 0) + fredkin(bits[:3]) + fredkin(bits[3:]) + (0, 0, 0)
        if out.states != expected:
            failures.append((bits, out.states))
    return {
        "context_independent": not failures,
        "cases_checked": 64,
        "failures": failures,
    }
