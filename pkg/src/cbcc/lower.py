"""Lowering: attach a CopyPlan to every parameterized goto and compute the
shared-frame geometry the backends emit against.

Every code segment reads and writes its parameters directly in the shared
argument frame, so a goto is exactly a parallel assignment into the target's
slots followed by a transfer.  Lowering resolves each goto's destination
layout, builds the MoveSet against the caller's own slot map (that is where
the overlap hazards come from), sequentializes it, and records the maximum
frame any segment or goto needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Optional

from . import ast
from .paracopy import (CopyPlan, Slot, build_moveset, naive_plan,
                       sequentialize, dump_plan, WORD)
from .sema import SemaResult, SegmentSignature, FuncSig
from .types import TypeRepr, decay


class LowerError(Exception):
    pass


@dataclass
class GotoPlan:
    """Everything emission needs for one goto site."""
    plan: CopyPlan
    target_offsets: list[int]
    target_types: list[TypeRepr]
    frame_bytes: int


@dataclass
class LoweredSegment:
    name: str
    decl: ast.CodeSegmentDef
    sig: SegmentSignature
    index: int                       # trampoline dispatch-table id


@dataclass
class LoweredFunction:
    name: str
    decl: ast.FunctionDef
    sig: FuncSig
    captures: bool


@dataclass
class LoweredUnit:
    sema: SemaResult
    segments: list[LoweredSegment] = field(default_factory=list)
    functions: list[LoweredFunction] = field(default_factory=list)
    goto_plans: dict[int, GotoPlan] = field(default_factory=dict)
    max_frame: int = 0
    capture_points: list[str] = field(default_factory=list)

    def segment(self, name: str) -> Optional[LoweredSegment]:
        for s in self.segments:
            if s.name == name:
                return s
        return None

    def dump(self) -> str:
        lines = [f"max_frame={self.max_frame}"]
        if self.capture_points:
            lines.append("capture_points=" + ",".join(self.capture_points))
        for seg in self.segments:
            lines.append(f"segment {seg.name}: id={seg.index} "
                         f"frame={seg.sig.frame_bytes}")
            self._dump_gotos(seg.decl, lines)
        for fn in self.functions:
            cap = " captures" if fn.captures else ""
            lines.append(f"function {fn.name}:{cap}")
            self._dump_gotos(fn.decl, lines)
        return "\n".join(lines) + "\n"

    def _dump_gotos(self, decl, lines):
        for node in ast.walk(decl):
            gp = self.goto_plans.get(id(node))
            if gp is None:
                continue
            if isinstance(node, ast.GotoDirect):
                head = f"goto {node.target}"
            elif isinstance(node, ast.GotoWithEnv):
                head = "goto <expr>, <env>"
            else:
                head = "goto <expr>"
            steps = "; ".join(dump_plan(gp.plan)) or "(no moves)"
            lines.append(f"  {head}: frame={gp.frame_bytes} [{steps}]")


## the first two dispatch-table entries belong to the runtime: the
## environment-return step and the halt step
FIRST_USER_INDEX = 2

## frame slots needed by the environment-return step (one int status slot)
ENV_STEP_FRAME = WORD


def lower(res: SemaResult, paracopy_mode: str = 'min') -> LoweredUnit:
    if res.errors:
        raise LowerError('cannot lower a unit with errors: '
                         + res.errors[0].format())
    if paracopy_mode not in ('min', 'naive'):
        raise LowerError(f"unknown paracopy mode {paracopy_mode!r}")
    plan_fn = sequentialize if paracopy_mode == 'min' else naive_plan

    lu = LoweredUnit(res)
    for decl in res.unit.decls:
        if isinstance(decl, ast.CodeSegmentDef) and decl.body is not None:
            seg = LoweredSegment(decl.name, decl, res.segments[decl.name],
                                 FIRST_USER_INDEX + len(lu.segments))
            lu.segments.append(seg)
        elif isinstance(decl, ast.FunctionDef) and decl.body is not None:
            lu.functions.append(LoweredFunction(
                decl.name, decl, res.functions[decl.name],
                decl.name in res.captures))

    lu.max_frame = max([s.sig.frame_bytes for s in lu.segments], default=0)
    lu.capture_points = sorted(res.captures)
    if lu.capture_points:
        lu.max_frame = max(lu.max_frame, ENV_STEP_FRAME)

    for holder in [*lu.segments, *lu.functions]:
        frame_map = _frame_map(holder)
        for node in ast.walk(holder.decl):
            if isinstance(node, (ast.GotoDirect, ast.GotoIndirect,
                                 ast.GotoWithEnv)):
                gp = _plan_goto(res, holder, node, frame_map, plan_fn)
                lu.goto_plans[id(node)] = gp
                lu.max_frame = max(lu.max_frame, gp.frame_bytes)
    return lu


def _frame_map(holder) -> dict[str, Slot]:
    """Caller parameter name -> frame slot.  Only segments read their
    parameters out of the shared frame; C function parameters live on the
    native stack and cannot be clobbered by slot writes."""
    if not isinstance(holder, LoweredSegment):
        return {}
    sig = holder.sig
    out = {}
    offs = sig.frame_offsets
    for i, (name, _ty) in enumerate(sig.params or []):
        width = (sig.frame_bytes if i + 1 == len(offs) else offs[i + 1]) - offs[i]
        out[name] = Slot(offs[i] // WORD, width)
    return out


def _plan_goto(res: SemaResult, holder, node, frame_map, plan_fn) -> GotoPlan:
    info = res.goto_info.get(id(node))
    if info is None:
        raise LowerError(f"unresolved goto in {holder.name}")
    if info.param_types is not None:
        target_types = [decay(t) for t in info.param_types]
    else:
        ## unspecified prototype: the canonical layout of the argument types
        ## is the layout the target must have declared to be reachable here
        target_types = [decay(a.ty) for a in node.args]
    try:
        offsets, total = res.table.frame_layout(target_types)
    except Exception as exc:  # incomplete struct args and friends
        raise LowerError(f"goto in {holder.name}: {exc}") from exc

    target = SimpleNamespace(frame_offsets=offsets, frame_bytes=total)
    is_param = lambda e: (res.binding.get(id(e)) == ('param',)
                          and e.name in frame_map)
    ms = build_moveset(node.args, target, frame_map, is_param)
    return GotoPlan(plan_fn(ms), offsets, target_types, total)
