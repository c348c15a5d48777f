"""AST for the CwC input language (a small C subset plus code segments,
parameterized goto and environment capture).

Nodes compare structurally: spans and type annotations are excluded from
equality, so parse -> to_source -> parse round-trips can be checked with
plain ==.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    start: int = 0
    end: int = 0
    line: int = 0
    col: int = 0


NO_SPAN = Span()


def _span_field():
    return field(default=NO_SPAN, compare=False, repr=False)


def _ty_field():
    ## filled in by sema; never part of structural equality
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- type syntax

@dataclass
class TName:
    name: str  # 'int' | 'char' | 'void' | typedef name
    span: Span = _span_field()


@dataclass
class TStruct:
    tag: str
    span: Span = _span_field()


@dataclass
class TPtr:
    inner: "TypeExpr"
    span: Span = _span_field()


@dataclass
class TArr:
    inner: "TypeExpr"
    size: Optional[int]
    span: Span = _span_field()


@dataclass
class TFun:
    """Function or code-segment type. params is None for an unspecified
    parameter list (empty parens), as in `__code (*ret)();`."""
    ret: "TypeExpr"
    params: Optional[list["TypeExpr"]]
    seg: bool
    span: Span = _span_field()


@dataclass
class TSeg:
    """The `__code` pseudo return type of a code segment."""
    span: Span = _span_field()


TypeExpr = Union[TName, TStruct, TPtr, TArr, TFun, TSeg]


# ---------------------------------------------------------------- expressions

@dataclass
class Ident:
    name: str
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class IntLit:
    value: int
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class StrLit:
    value: str  # decoded text, not the quoted lexeme
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Unary:
    op: str  # '*' '&' '-' '!'
    expr: "Expr"
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class IncDec:
    op: str  # '++' '--'
    expr: "Expr"
    postfix: bool
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Binary:
    op: str  # '*' '/' '%' '+' '-' '<' '>' '<=' '>=' '==' '!=' '&&' '||'
    left: "Expr"
    right: "Expr"
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Assign:
    op: str  # '=' '+=' '-='
    target: "Expr"
    value: "Expr"
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Call:
    callee: "Expr"
    args: list["Expr"]
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Member:
    base: "Expr"
    name: str
    arrow: bool
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Index:
    base: "Expr"
    index: "Expr"
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class Cast:
    ctype: TypeExpr
    expr: "Expr"
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class SizeofType:
    ctype: TypeExpr
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class EnvRef:
    """__environment"""
    span: Span = _span_field()
    ty: object = _ty_field()


@dataclass
class RetRef:
    """__return"""
    span: Span = _span_field()
    ty: object = _ty_field()


Expr = Union[Ident, IntLit, StrLit, Unary, IncDec, Binary, Assign, Call,
             Member, Index, Cast, SizeofType, EnvRef, RetRef]


# ----------------------------------------------------------------- statements

@dataclass
class Block:
    stmts: list["Stmt"]
    span: Span = _span_field()


@dataclass
class VarDecl:
    ctype: TypeExpr
    name: str
    init: Optional[Expr]
    span: Span = _span_field()


@dataclass
class IfStmt:
    cond: Expr
    then: "Stmt"
    orelse: Optional["Stmt"]
    span: Span = _span_field()


@dataclass
class WhileStmt:
    cond: Expr
    body: "Stmt"
    span: Span = _span_field()


@dataclass
class ForStmt:
    init: Optional[Expr]
    cond: Optional[Expr]
    step: Optional[Expr]
    body: "Stmt"
    span: Span = _span_field()


@dataclass
class ExprStmt:
    expr: Expr
    span: Span = _span_field()


@dataclass
class ReturnStmt:
    value: Optional[Expr]
    span: Span = _span_field()


@dataclass
class GotoDirect:
    target: str
    args: list[Expr]
    span: Span = _span_field()


@dataclass
class GotoIndirect:
    target: Expr
    args: list[Expr]
    span: Span = _span_field()


@dataclass
class GotoWithEnv:
    target: Expr
    args: list[Expr]
    env: Expr
    span: Span = _span_field()


@dataclass
class EmptyStmt:
    span: Span = _span_field()


Stmt = Union[Block, VarDecl, IfStmt, WhileStmt, ForStmt, ExprStmt, ReturnStmt,
             GotoDirect, GotoIndirect, GotoWithEnv, EmptyStmt]


# ----------------------------------------------------------------- top level

@dataclass
class StructDef:
    tag: str
    fields: Optional[list[tuple[TypeExpr, str]]]  # None for `struct x;`
    span: Span = _span_field()


@dataclass
class TypedefDecl:
    ctype: TypeExpr
    name: str
    span: Span = _span_field()


@dataclass
class FunctionDef:
    name: str
    ret: TypeExpr
    params: Optional[list[tuple[TypeExpr, Optional[str]]]]  # None: unspecified
    body: Optional[Block]  # None for a prototype
    span: Span = _span_field()


@dataclass
class CodeSegmentDef:
    name: str
    params: Optional[list[tuple[TypeExpr, Optional[str]]]]
    body: Optional[Block]
    span: Span = _span_field()


TopDecl = Union[StructDef, TypedefDecl, VarDecl, FunctionDef, CodeSegmentDef]


@dataclass
class TranslationUnit:
    decls: list[TopDecl]
    span: Span = _span_field()


# --------------------------------------------------------------- source print
#
# to_source() emits text that re-parses to a structurally identical tree.
# Composite subexpressions are parenthesized by precedence, which is enough:
# extra parens do not create nodes.

_PREC = {
    '||': 1, '&&': 2,
    '==': 3, '!=': 3,
    '<': 4, '>': 4, '<=': 4, '>=': 4,
    '+': 5, '-': 5,
    '*': 6, '/': 6, '%': 6,
}
_PREC_UNARY = 7
_PREC_POSTFIX = 8
_PREC_PRIMARY = 9
_PREC_ASSIGN = 0


def _esc(text: str) -> str:
    out = []
    for ch in text:
        if ch == '\\':
            out.append('\\\\')
        elif ch == '"':
            out.append('\\"')
        elif ch == '\n':
            out.append('\\n')
        elif ch == '\t':
            out.append('\\t')
        elif ch == '\r':
            out.append('\\r')
        else:
            out.append(ch)
    return ''.join(out)


def _decl_text(ctype: TypeExpr, name: str) -> str:
    """Render a declarator: the classic inside-out C declaration rule."""
    base, decl = _decl_parts(ctype, name)
    return f"{base} {decl}" if decl else base


def _decl_parts(ctype: TypeExpr, name: str) -> tuple[str, str]:
    if isinstance(ctype, TName):
        return ctype.name, name
    if isinstance(ctype, TSeg):
        return '__code', name
    if isinstance(ctype, TStruct):
        return f"struct {ctype.tag}", name
    if isinstance(ctype, TPtr):
        return _decl_parts(ctype.inner, '*' + name)
    if isinstance(ctype, TArr):
        n = '' if ctype.size is None else str(ctype.size)
        if name.startswith('*'):
            name = f"({name})"
        return _decl_parts(ctype.inner, f"{name}[{n}]")
    if isinstance(ctype, TFun):
        if ctype.params is None:
            ps = ''
        elif not ctype.params:
            ps = 'void'
        else:
            ps = ', '.join(_decl_text(p, '') for p in ctype.params)
        if name.startswith('*'):
            name = f"({name})"
        ret = TSeg() if ctype.seg else ctype.ret
        return _decl_parts(ret, f"{name}({ps})")
    raise TypeError(f"not a type expression: {ctype!r}")


def _expr(e: Expr, prec: int) -> str:
    text, p = _expr_parts(e)
    return f"({text})" if p < prec else text


def _expr_parts(e: Expr) -> tuple[str, int]:
    if isinstance(e, Ident):
        return e.name, _PREC_PRIMARY
    if isinstance(e, IntLit):
        return str(e.value), _PREC_PRIMARY
    if isinstance(e, StrLit):
        return f'"{_esc(e.value)}"', _PREC_PRIMARY
    if isinstance(e, EnvRef):
        return '__environment', _PREC_PRIMARY
    if isinstance(e, RetRef):
        return '__return', _PREC_PRIMARY
    if isinstance(e, Call):
        args = ', '.join(_expr(a, _PREC_ASSIGN) for a in e.args)
        return f"{_expr(e.callee, _PREC_POSTFIX)}({args})", _PREC_POSTFIX
    if isinstance(e, Member):
        op = '->' if e.arrow else '.'
        return f"{_expr(e.base, _PREC_POSTFIX)}{op}{e.name}", _PREC_POSTFIX
    if isinstance(e, Index):
        return (f"{_expr(e.base, _PREC_POSTFIX)}[{_expr(e.index, _PREC_ASSIGN)}]",
                _PREC_POSTFIX)
    if isinstance(e, IncDec):
        if e.postfix:
            return f"{_expr(e.expr, _PREC_POSTFIX)}{e.op}", _PREC_POSTFIX
        return f"{e.op}{_expr(e.expr, _PREC_UNARY)}", _PREC_UNARY
    if isinstance(e, Unary):
        ## operand at postfix level: "-(-x)" must not print as "--x"
        return f"{e.op}{_expr(e.expr, _PREC_POSTFIX)}", _PREC_UNARY
    if isinstance(e, Cast):
        return f"({_decl_text(e.ctype, '')}){_expr(e.expr, _PREC_UNARY)}", _PREC_UNARY
    if isinstance(e, SizeofType):
        return f"sizeof({_decl_text(e.ctype, '')})", _PREC_UNARY
    if isinstance(e, Binary):
        p = _PREC[e.op]
        ## left-assoc: the right child needs one level more
        return (f"{_expr(e.left, p)} {e.op} {_expr(e.right, p + 1)}", p)
    if isinstance(e, Assign):
        return (f"{_expr(e.target, _PREC_UNARY)} {e.op} "
                f"{_expr(e.value, _PREC_ASSIGN)}", _PREC_ASSIGN)
    raise TypeError(f"not an expression: {e!r}")


def _stmt_lines(s: Stmt, ind: str) -> list[str]:
    if isinstance(s, Block):
        lines = [ind + '{']
        for inner in s.stmts:
            lines.extend(_stmt_lines(inner, ind + '    '))
        lines.append(ind + '}')
        return lines
    if isinstance(s, VarDecl):
        init = f" = {_expr(s.init, _PREC_ASSIGN)}" if s.init is not None else ''
        return [f"{ind}{_decl_text(s.ctype, s.name)}{init};"]
    if isinstance(s, IfStmt):
        lines = [f"{ind}if ({_expr(s.cond, _PREC_ASSIGN)})"]
        lines.extend(_stmt_lines(_blockify(s.then), ind))
        if s.orelse is not None:
            lines.append(ind + 'else')
            lines.extend(_stmt_lines(_blockify(s.orelse), ind))
        return lines
    if isinstance(s, WhileStmt):
        lines = [f"{ind}while ({_expr(s.cond, _PREC_ASSIGN)})"]
        lines.extend(_stmt_lines(_blockify(s.body), ind))
        return lines
    if isinstance(s, ForStmt):
        parts = [('' if p is None else _expr(p, _PREC_ASSIGN))
                 for p in (s.init, s.cond, s.step)]
        lines = [f"{ind}for ({parts[0]}; {parts[1]}; {parts[2]})"]
        lines.extend(_stmt_lines(_blockify(s.body), ind))
        return lines
    if isinstance(s, ExprStmt):
        return [f"{ind}{_expr(s.expr, _PREC_ASSIGN)};"]
    if isinstance(s, ReturnStmt):
        if s.value is None:
            return [ind + 'return;']
        return [f"{ind}return {_expr(s.value, _PREC_ASSIGN)};"]
    if isinstance(s, GotoDirect):
        args = ', '.join(_expr(a, _PREC_ASSIGN) for a in s.args)
        return [f"{ind}goto {s.target}({args});"]
    if isinstance(s, GotoIndirect):
        args = ', '.join(_expr(a, _PREC_ASSIGN) for a in s.args)
        return [f"{ind}goto {_expr(s.target, _PREC_POSTFIX)}({args});"]
    if isinstance(s, GotoWithEnv):
        args = ', '.join(_expr(a, _PREC_ASSIGN) for a in s.args)
        return [f"{ind}goto {_expr(s.target, _PREC_POSTFIX)}({args}), "
                f"{_expr(s.env, _PREC_ASSIGN)};"]
    if isinstance(s, EmptyStmt):
        return [ind + ';']
    raise TypeError(f"not a statement: {s!r}")


def _blockify(s: Stmt) -> Block:
    return s if isinstance(s, Block) else Block([s])


def _params_text(params) -> str:
    if params is None:
        return ''
    if not params:
        return 'void'
    out = []
    for ctype, name in params:
        out.append(_decl_text(ctype, name or ''))
    return ', '.join(out)


def to_source(node) -> str:
    """Pretty-print a TranslationUnit (or a single declaration) as CwC text."""
    if isinstance(node, TranslationUnit):
        chunks = [to_source(d) for d in node.decls]
        return '\n'.join(chunks) + '\n'
    if isinstance(node, StructDef):
        if node.fields is None:
            return f"struct {node.tag};\n"
        lines = [f"struct {node.tag} {{"]
        for ctype, name in node.fields:
            lines.append(f"    {_decl_text(ctype, name)};")
        lines.append('};\n')
        return '\n'.join(lines)
    if isinstance(node, TypedefDecl):
        return f"typedef {_decl_text(node.ctype, node.name)};\n"
    if isinstance(node, VarDecl):
        init = f" = {_expr(node.init, _PREC_ASSIGN)}" if node.init is not None else ''
        return f"{_decl_text(node.ctype, node.name)}{init};\n"
    if isinstance(node, (FunctionDef, CodeSegmentDef)):
        if isinstance(node, CodeSegmentDef):
            head = f"__code {node.name}({_params_text(node.params)})"
        else:
            head = _decl_text(node.ret, f"{node.name}({_params_text(node.params)})")
        if node.body is None:
            return head + ';\n'
        lines = [head]
        lines.extend(_stmt_lines(node.body, ''))
        return '\n'.join(lines) + '\n'
    raise TypeError(f"not printable at top level: {node!r}")


def walk(node):
    """Yield every AST node reachable from `node` (the node itself included)."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        for name in getattr(cur, '__dataclass_fields__', {}):
            if name in ('span', 'ty'):
                continue
            val = getattr(cur, name)
            items = val if isinstance(val, list) else [val]
            for item in items:
                if isinstance(item, tuple):
                    stack.extend(x for x in item if _is_node(x))
                elif _is_node(item):
                    stack.append(item)


def _is_node(x) -> bool:
    return hasattr(x, '__dataclass_fields__') and not isinstance(x, Span)
