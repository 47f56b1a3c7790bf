"""Recursive-descent parser and post-parse semantic checks."""

from __future__ import annotations

from ..errors import (MultipleDrivers, ParseError, UndeclaredIdentifier,
                      UnsupportedConstruct)
from .ast import (AlwaysBlock, Assign, Binary, CombSens, Concat,
                  ContinuousAssign, EdgeSens, Expr, HdlAst, Ident, If, Index,
                  LvConcat, LvIdent, LvIndex, LvPart, LValue, NetDecl, Number,
                  PartSelect, Stmt, Ternary, Unary)
from .lexer import Token, tokenize

# binary operators by ascending precedence tier
_BINARY_TIERS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers ---------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def check(self, kind: str, text: str | None = None) -> bool:
        return self.cur.kind == kind and (text is None or self.cur.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.check(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.check(kind, text):
            want = text or kind
            raise ParseError(f"expected '{want}', found '{self.cur.text or 'EOF'}'",
                             self.cur.line, self.cur.col)
        return self.advance()

    def expect_ident(self) -> Token:
        if self.cur.kind != "id":
            raise ParseError(f"expected identifier, found '{self.cur.text or 'EOF'}'",
                             self.cur.line, self.cur.col)
        return self.advance()

    def const_int(self, expr: Expr) -> int:
        if isinstance(expr, Number):
            return expr.value
        if isinstance(expr, Unary) and expr.op == "-" and isinstance(expr.operand, Number):
            return -expr.operand.value
        raise ParseError("expected a constant", getattr(expr, "line", 0))

    # -- module ----------------------------------------------------------

    def parse_module(self) -> HdlAst:
        self.expect("kw", "module")
        name = self.expect_ident().text
        ast = HdlAst(module_name=name, port_order=[])
        if self.accept("op", "("):
            if not self.check("op", ")"):
                while True:
                    self.parse_header_port(ast)
                    if not self.accept("op", ","):
                        break
            self.expect("op", ")")
        self.expect("op", ";")
        while not self.check("kw", "endmodule"):
            if self.check("eof"):
                raise ParseError("unexpected EOF, missing 'endmodule'",
                                 self.cur.line, self.cur.col)
            self.parse_item(ast)
        self.expect("kw", "endmodule")
        if not self.check("eof"):
            raise ParseError("only one module per source is supported",
                             self.cur.line, self.cur.col)
        return ast

    def parse_header_port(self, ast: HdlAst) -> None:
        if self.cur.kind == "kw" and self.cur.text in ("input", "output"):
            decl = self.parse_decl_head()
            name = self.expect_ident().text
            decl.name = name
            self._declare(ast, decl)
            ast.port_order.append(name)
        elif self.cur.kind == "id":
            # non-ANSI style: direction declared in the body
            ast.port_order.append(self.advance().text)
        else:
            raise ParseError(f"expected port, found '{self.cur.text}'",
                             self.cur.line, self.cur.col)

    def parse_decl_head(self) -> NetDecl:
        tok = self.advance()  # input|output|wire|reg
        kind = tok.text
        is_reg = kind == "reg"
        if kind == "output" and self.accept("kw", "reg"):
            is_reg = True
        signed = bool(self.accept("kw", "signed"))
        msb = lsb = 0
        if self.accept("op", "["):
            msb = self.const_int(self.parse_expr())
            self.expect("op", ":")
            lsb = self.const_int(self.parse_expr())
            self.expect("op", "]")
            if msb < lsb:
                raise ParseError(f"ascending bit range [{msb}:{lsb}] is not supported",
                                 tok.line, tok.col)
        return NetDecl(name="", kind=kind, msb=msb, lsb=lsb, signed=signed,
                       is_reg=is_reg, line=tok.line)

    def _declare(self, ast: HdlAst, decl: NetDecl) -> None:
        prev = ast.nets.get(decl.name)
        if prev is None:
            ast.nets[decl.name] = decl
            return
        # merge the paired "output y; reg y;" (or reverse) declaration style
        pair = {prev.kind, decl.kind}
        if pair == {"output", "reg"} and not prev.is_array and not decl.is_array:
            if (prev.msb, prev.lsb) != (decl.msb, decl.lsb):
                raise ParseError(f"conflicting widths for '{decl.name}'",
                                 decl.line)
            prev.kind = "output"
            prev.is_reg = True
            prev.signed = prev.signed or decl.signed
            return
        raise ParseError(f"duplicate declaration of '{decl.name}'", decl.line)

    # -- items -----------------------------------------------------------

    def parse_item(self, ast: HdlAst) -> None:
        if self.cur.kind == "kw" and self.cur.text in ("input", "output", "wire", "reg"):
            head = self.parse_decl_head()
            while True:
                name = self.expect_ident().text
                decl = NetDecl(name=name, kind=head.kind, msb=head.msb,
                               lsb=head.lsb, signed=head.signed,
                               is_reg=head.is_reg, line=head.line)
                if self.accept("op", "["):
                    lo = self.const_int(self.parse_expr())
                    self.expect("op", ":")
                    hi = self.const_int(self.parse_expr())
                    self.expect("op", "]")
                    if not decl.is_reg:
                        raise UnsupportedConstruct("array of non-reg nets",
                                                   head.line)
                    decl.array_range = (min(lo, hi), max(lo, hi))
                self._declare(ast, decl)
                if not self.accept("op", ","):
                    break
            self.expect("op", ";")
        elif self.accept("kw", "assign"):
            target = self.parse_lvalue()
            self.expect("op", "=")
            expr = self.parse_expr()
            self.expect("op", ";")
            ast.assigns.append(ContinuousAssign(target, expr))
        elif self.check("kw", "always"):
            ast.always_blocks.append(self.parse_always())
        else:
            raise ParseError(f"unexpected '{self.cur.text}'",
                             self.cur.line, self.cur.col)

    def parse_always(self) -> AlwaysBlock:
        tok = self.expect("kw", "always")
        self.expect("op", "@")
        edges: list[tuple[str, str]] = []
        if self.accept("op", "*"):
            sens: EdgeSens | CombSens = CombSens()
        else:
            self.expect("op", "(")
            if self.accept("op", "*"):
                sens = CombSens()
            else:
                edges = [self.parse_edge()]
                while self.accept("kw", "or"):
                    edges.append(self.parse_edge())
                if len(edges) > 2:
                    raise UnsupportedConstruct(
                        "sensitivity list with more than two edges", tok.line)
                if len(edges) == 1:
                    edge, name = edges[0]
                    if edge != "posedge":
                        raise UnsupportedConstruct("negedge-clocked block", tok.line)
                    sens = EdgeSens(clock=name)
                else:
                    sens = EdgeSens(clock="")  # resolved after the body is read
            self.expect("op", ")")
        stmts = self.parse_stmt_group()
        if len(edges) == 2:
            sens = self._resolve_async_edges(edges, stmts, tok.line)
        return AlwaysBlock(sensitivity=sens, stmts=tuple(stmts), line=tok.line)

    def parse_edge(self) -> tuple[str, str]:
        if self.cur.kind == "kw" and self.cur.text in ("posedge", "negedge"):
            edge = self.advance().text
        else:
            raise UnsupportedConstruct(
                f"level sensitivity on '{self.cur.text}'", self.cur.line, self.cur.col)
        return edge, self.expect_ident().text

    def _resolve_async_edges(self, edges: list[tuple[str, str]],
                             stmts: list[Stmt], line: int) -> EdgeSens:
        """Split a two-edge sensitivity into clock and async reset.

        The reset is the edge signal tested by the block's outer if; the
        remaining edge must be the posedge clock.
        """
        if not (len(stmts) == 1 and isinstance(stmts[0], If)):
            raise ParseError(
                "async-reset block must be a single if/else guarded by the reset",
                line)
        guard_ids = _expr_idents(stmts[0].cond)
        in_guard = [e for e in edges if e[1] in guard_ids]
        if len(in_guard) != 1:
            raise ParseError(
                "async-reset guard must test exactly one sensitivity signal", line)
        reset_edge, reset_name = in_guard[0]
        clock_edge, clock_name = next(e for e in edges if e[1] != reset_name)
        if clock_edge != "posedge":
            raise UnsupportedConstruct("negedge-clocked block", line)
        return EdgeSens(clock=clock_name, reset=(reset_name, reset_edge))

    def parse_stmt_group(self) -> list[Stmt]:
        if self.accept("kw", "begin"):
            stmts = []
            while not self.check("kw", "end"):
                if self.check("eof"):
                    raise ParseError("unexpected EOF, missing 'end'",
                                     self.cur.line, self.cur.col)
                stmts.append(self.parse_stmt())
            self.expect("kw", "end")
            return stmts
        return [self.parse_stmt()]

    def parse_stmt(self) -> Stmt:
        if self.check("kw", "if"):
            tok = self.advance()
            self.expect("op", "(")
            cond = self.parse_expr()
            self.expect("op", ")")
            then = self.parse_stmt_group()
            other: list[Stmt] = []
            if self.accept("kw", "else"):
                other = self.parse_stmt_group()
            return If(cond, tuple(then), tuple(other), line=tok.line)
        target = self.parse_lvalue()
        line = self.cur.line
        if self.accept("op", "="):
            blocking = True
        elif self.accept("op", "<="):
            blocking = False
        else:
            raise ParseError(f"expected '=' or '<=', found '{self.cur.text}'",
                             self.cur.line, self.cur.col)
        expr = self.parse_expr()
        self.expect("op", ";")
        return Assign(target, expr, blocking, line=line)

    def parse_lvalue(self) -> LValue:
        if self.accept("op", "{"):
            parts = [self.parse_lvalue()]
            while self.accept("op", ","):
                parts.append(self.parse_lvalue())
            self.expect("op", "}")
            return LvConcat(tuple(parts))
        tok = self.expect_ident()
        if self.accept("op", "["):
            first = self.parse_expr()
            if self.accept("op", ":"):
                msb = self.const_int(first)
                lsb = self.const_int(self.parse_expr())
                self.expect("op", "]")
                return LvPart(tok.text, msb, lsb, line=tok.line)
            self.expect("op", "]")
            return LvIndex(tok.text, first, line=tok.line)
        return LvIdent(tok.text, line=tok.line)

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_ternary()

    def parse_ternary(self) -> Expr:
        cond = self.parse_binary(0)
        if self.accept("op", "?"):
            then = self.parse_ternary()
            self.expect("op", ":")
            other = self.parse_ternary()
            return Ternary(cond, then, other)
        return cond

    def parse_binary(self, tier: int) -> Expr:
        if tier >= len(_BINARY_TIERS):
            return self.parse_unary()
        left = self.parse_binary(tier + 1)
        ops = _BINARY_TIERS[tier]
        while self.cur.kind == "op" and self.cur.text in ops:
            op = self.advance().text
            right = self.parse_binary(tier + 1)
            left = Binary(op, left, right)
        return left

    def parse_unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text in ("~", "!", "-", "+"):
            tok = self.advance()
            return Unary(tok.text, self.parse_unary(), line=tok.line)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        if self.cur.kind == "num":
            tok = self.advance()
            return Number(tok.value, tok.width, line=tok.line)
        if self.accept("op", "("):
            expr = self.parse_expr()
            self.expect("op", ")")
            return expr
        if self.accept("op", "{"):
            tok = self.tokens[self.pos - 1]
            parts = [self.parse_expr()]
            if isinstance(parts[0], Number) and self.check("op", "{"):
                raise UnsupportedConstruct("replication", tok.line, tok.col)
            while self.accept("op", ","):
                parts.append(self.parse_expr())
            self.expect("op", "}")
            return Concat(tuple(parts), line=tok.line)
        if self.cur.kind == "id":
            tok = self.advance()
            if self.accept("op", "["):
                first = self.parse_expr()
                if self.accept("op", ":"):
                    msb = self.const_int(first)
                    lsb = self.const_int(self.parse_expr())
                    self.expect("op", "]")
                    if msb < lsb:
                        raise ParseError(f"ascending part select [{msb}:{lsb}]",
                                         tok.line, tok.col)
                    return PartSelect(tok.text, msb, lsb, line=tok.line)
                self.expect("op", "]")
                return Index(tok.text, first, line=tok.line)
            return Ident(tok.text, line=tok.line)
        raise ParseError(f"unexpected '{self.cur.text or 'EOF'}' in expression",
                         self.cur.line, self.cur.col)


# ---------------------------------------------------------------------------
# semantic checks
# ---------------------------------------------------------------------------

def _expr_idents(expr: Expr) -> set[str]:
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Ident):
            out.add(node.name)
        elif isinstance(node, (Index, PartSelect)):
            out.add(node.base)
            if isinstance(node, Index):
                stack.append(node.index)
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Ternary):
            stack.extend((node.cond, node.then, node.other))
        elif isinstance(node, Concat):
            stack.extend(node.parts)
    return out


def _lvalue_nets(lv: LValue) -> list[LValue]:
    if isinstance(lv, LvConcat):
        out: list[LValue] = []
        for p in lv.parts:
            out.extend(_lvalue_nets(p))
        return out
    return [lv]


def _walk_stmts(stmts: tuple[Stmt, ...]):
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from _walk_stmts(s.then)
            yield from _walk_stmts(s.other)


def _check_semantics(ast: HdlAst) -> None:
    # port list consistency
    for name in ast.port_order:
        decl = ast.nets.get(name)
        if decl is None:
            raise UndeclaredIdentifier(f"port '{name}' never declared")
        if decl.kind not in ("input", "output"):
            raise ParseError(f"port '{name}' declared as {decl.kind}", decl.line)
    for decl in ast.nets.values():
        if decl.kind in ("input", "output") and decl.name not in ast.port_order:
            raise ParseError(f"'{decl.name}' declared {decl.kind} but not listed "
                             f"in the module ports", decl.line)
        if decl.kind in ("input", "output") and decl.is_array:
            raise UnsupportedConstruct("array port", decl.line)

    def require(name: str, line: int) -> NetDecl:
        decl = ast.nets.get(name)
        if decl is None:
            raise UndeclaredIdentifier(f"undeclared identifier '{name}'", line)
        return decl

    def check_expr(expr: Expr) -> None:
        for node in _iter_expr(expr):
            if isinstance(node, Ident):
                decl = require(node.name, node.line)
                if decl.is_array:
                    raise ParseError(f"array '{node.name}' used without an index",
                                     node.line)
            elif isinstance(node, Index):
                require(node.base, node.line)
            elif isinstance(node, PartSelect):
                decl = require(node.base, node.line)
                if decl.is_array:
                    raise ParseError(f"part select on array '{node.base}'", node.line)
                if node.msb > decl.msb or node.lsb < decl.lsb:
                    raise ParseError(
                        f"part select [{node.msb}:{node.lsb}] outside "
                        f"[{decl.msb}:{decl.lsb}] of '{node.base}'", node.line)

    def check_lvalue(lv: LValue, in_clocked: bool) -> None:
        for simple in _lvalue_nets(lv):
            name = simple.name  # type: ignore[union-attr]
            decl = require(name, simple.line)
            if decl.kind == "input":
                raise ParseError(f"assignment to input port '{name}'", simple.line)
            if isinstance(simple, LvIndex):
                check_expr(simple.index)
            if isinstance(simple, LvPart):
                if decl.is_array:
                    raise ParseError(f"part select on array '{name}'", simple.line)
                if simple.msb > decl.msb or simple.lsb < decl.lsb:
                    raise ParseError(
                        f"part select [{simple.msb}:{simple.lsb}] outside "
                        f"[{decl.msb}:{decl.lsb}] of '{name}'", simple.line)

    # continuous assigns: wire targets only, one driver each
    drivers: dict[str, str] = {}

    def claim(name: str, what: str, line: int) -> None:
        prev = drivers.get(name)
        if prev is not None and prev != what:
            raise MultipleDrivers(f"'{name}' driven by both {prev} and {what}", line)
        drivers[name] = what

    for k, ca in enumerate(ast.assigns):
        check_expr(ca.expr)
        check_lvalue(ca.target, in_clocked=False)
        for simple in _lvalue_nets(ca.target):
            name = simple.name  # type: ignore[union-attr]
            decl = ast.nets[name]
            if decl.is_reg:
                raise ParseError(f"continuous assign to reg '{name}'", ca.line)
            claim(name, f"assign #{k}", ca.line)

    for b, block in enumerate(ast.always_blocks):
        clocked = isinstance(block.sensitivity, EdgeSens)
        if clocked:
            require(block.sensitivity.clock, block.line)
            if block.sensitivity.reset is not None:
                require(block.sensitivity.reset[0], block.line)
        for stmt in _walk_stmts(block.stmts):
            if isinstance(stmt, If):
                check_expr(stmt.cond)
                continue
            check_expr(stmt.expr)
            check_lvalue(stmt.target, in_clocked=clocked)
            if not stmt.blocking and not clocked:
                raise ParseError("nonblocking assignment outside a clocked block",
                                 stmt.line)
            for simple in _lvalue_nets(stmt.target):
                name = simple.name  # type: ignore[union-attr]
                decl = ast.nets[name]
                if not decl.is_reg:
                    raise ParseError(
                        f"procedural assignment to wire '{name}' "
                        f"(declare it reg)", stmt.line)
                claim(name, f"always #{b}", stmt.line)

    # exactly one clock across all clocked blocks
    clocks = {blk.sensitivity.clock for blk in ast.always_blocks
              if isinstance(blk.sensitivity, EdgeSens)}
    if len(clocks) > 1:
        raise UnsupportedConstruct(
            f"multiple clocks: {', '.join(sorted(clocks))}")


def _iter_expr(expr: Expr):
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Ternary):
            stack.extend((node.cond, node.then, node.other))
        elif isinstance(node, Concat):
            stack.extend(node.parts)
        elif isinstance(node, Index):
            stack.append(node.index)


def parse_hdl(source: str) -> HdlAst:
    """Parse HDL source text into a checked :class:`HdlAst`."""
    ast = _Parser(tokenize(source)).parse_module()
    _check_semantics(ast)
    return ast
