"""Sequentialization of parallel argument assignment.

A parameterized goto assigns all arguments simultaneously: every source is
read in the pre-state, then every destination slot of the shared argument
frame is written.  Emitting naive sequential stores is wrong whenever a
destination slot doubles as a later source.  This module turns a MoveSet
(the simultaneous assignment) into a CopyPlan (an ordered list of single
copies plus scratch temporaries) with the minimum staging:

  * identity moves vanish;
  * expression sources are evaluated into temps before any frame write,
    left to right, so C evaluation order can't leak through;
  * a source that partially overlaps any destination interval is promoted
    to a temp unconditionally (mixed-width slots, the awkward case);
  * what remains is a slot permutation: acyclic parts are ordered
    topologically with zero temps, each cycle of length k is broken with
    one temp and k+1 copies.

Slot ids for param-slots are word offsets into the frame; widths are byte
counts, always word multiples.
"""

from __future__ import annotations

from dataclasses import dataclass

WORD = 8

KINDS = ('param-slot', 'local', 'temp', 'constant', 'expression')


@dataclass(frozen=True)
class Slot:
    id: int
    width: int
    kind: str = 'param-slot'

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"bad slot kind {self.kind!r}")

    @property
    def interval(self) -> tuple[int, int]:
        """Byte interval in the frame; only meaningful for param-slots."""
        lo = self.id * WORD
        return lo, lo + self.width

    def render(self) -> str:
        tag = {'param-slot': 'slot', 'local': 'local', 'temp': 't',
               'constant': 'const', 'expression': 'expr'}[self.kind]
        return f"{tag}{self.id}"


@dataclass(frozen=True)
class Move:
    dst: Slot
    src: Slot


@dataclass(frozen=True)
class MoveSet:
    moves: tuple[Move, ...]

    def __init__(self, moves):
        object.__setattr__(self, 'moves', tuple(moves))


@dataclass
class CopyPlan:
    steps: list[Move]
    temps_used: int
    temp_widths: list[int]

    @property
    def temp_bytes(self) -> int:
        return sum(self.temp_widths)


def plan_cost(plan: CopyPlan) -> tuple[int, int]:
    return len(plan.steps), plan.temp_bytes


def dump_plan(plan: CopyPlan) -> list[str]:
    return [f"{s.dst.render()}<-{s.src.render()}" for s in plan.steps]


def _intersects(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def _check_dsts(ms: MoveSet):
    ivals = []
    for mv in ms.moves:
        if mv.dst.kind != 'param-slot':
            raise ValueError(f"destination {mv.dst.render()} is not a frame slot")
        for other in ivals:
            if _intersects(mv.dst.interval, other):
                raise ValueError('destinations overlap; not a parallel assignment')
        ivals.append(mv.dst.interval)


def sequentialize(ms: MoveSet) -> CopyPlan:
    _check_dsts(ms)
    steps: list[Move] = []
    temp_widths: list[int] = []

    def stage(src: Slot) -> Slot:
        temp = Slot(len(temp_widths), src.width, 'temp')
        temp_widths.append(src.width)
        steps.append(Move(temp, src))
        return temp

    # mutable work list: [dst, src]; identity moves never execute
    pending = [[mv.dst, mv.src] for mv in ms.moves
               if not (mv.src.kind == 'param-slot'
                       and mv.src.interval == mv.dst.interval)]
    dst_ivals = [dst.interval for dst, _ in pending]

    # expressions first, left to right: their reads see the pre-state
    for rec in pending:
        if rec[1].kind == 'expression':
            rec[1] = stage(rec[1])
    # then any frame source that a destination write would partially clobber
    for rec in pending:
        if rec[1].kind == 'param-slot' and any(
                _intersects(rec[1].interval, d) and rec[1].interval != d
                for d in dst_ivals):
            rec[1] = stage(rec[1])

    # what remains reads slots only via exact matches: a permutation graph
    while pending:
        progressed = False
        for rec in pending:
            dst, src = rec
            blocked = any(other[1].kind == 'param-slot'
                          and _intersects(other[1].interval, dst.interval)
                          for other in pending if other is not rec)
            if not blocked:
                steps.append(Move(dst, src))
                pending.remove(rec)
                progressed = True
                break
        if not progressed:
            # every pending destination is still read by someone: a cycle.
            # Saving the first blocked source breaks it.
            for rec in pending:
                if rec[1].kind == 'param-slot':
                    rec[1] = stage(rec[1])
                    break

    return CopyPlan(steps, len(temp_widths), temp_widths)


def build_moveset(args, target, frame_map, is_param=None) -> MoveSet:
    """One move per goto argument.

    `target` carries the destination slot layout (frame_offsets/frame_bytes
    as computed by sema), `frame_map` maps the *caller's* parameter names to
    their param-slot Slots in the shared frame.  `is_param` refines name
    classification when locals shadow parameters.  Only caller parameters
    read live frame bytes; locals, globals, literals and segment names are
    hazard-free sources, and anything compound becomes an expression source
    evaluated before the frame is touched.
    """
    from . import ast  # classification only; the algebra stays AST-free

    offsets = target.frame_offsets
    widths = [(target.frame_bytes if i + 1 == len(offsets) else offsets[i + 1]) - off
              for i, off in enumerate(offsets)]
    if is_param is None:
        is_param = lambda e: e.name in frame_map
    moves = []
    for i, arg in enumerate(args):
        dst = Slot(offsets[i] // WORD, widths[i])
        if isinstance(arg, ast.Ident):
            if is_param(arg):
                moves.append(Move(dst, frame_map[arg.name]))
            else:
                moves.append(Move(dst, Slot(i, widths[i], 'local')))
        elif isinstance(arg, ast.IntLit):
            moves.append(Move(dst, Slot(arg.value, widths[i], 'constant')))
        elif isinstance(arg, ast.StrLit):
            moves.append(Move(dst, Slot(i, widths[i], 'local')))
        else:
            moves.append(Move(dst, Slot(i, widths[i], 'expression')))
    return MoveSet(moves)


def naive_plan(ms: MoveSet) -> CopyPlan:
    """Whole-frame staging: every argument goes through a temp.  Trivially
    correct; kept as the differential baseline the minimal plan is measured
    against."""
    _check_dsts(ms)
    steps: list[Move] = []
    temp_widths: list[int] = []
    temps = []
    for mv in ms.moves:
        temp = Slot(len(temp_widths), mv.src.width, 'temp')
        temp_widths.append(mv.src.width)
        steps.append(Move(temp, mv.src))
        temps.append(temp)
    for mv, temp in zip(ms.moves, temps):
        steps.append(Move(mv.dst, temp))
    return CopyPlan(steps, len(temp_widths), temp_widths)
