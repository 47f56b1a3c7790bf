"""Cycle-accurate evaluation of the parsed subset.

Two-state semantics: every net holds an unsigned bit pattern of its
declared width; uninitialized state is 0.  A tick is one rising clock
edge with two-phase register semantics: all clocked blocks read pre-edge
values, nonblocking updates commit atomically, then combinational logic
re-settles.

Expression sizing follows the usual HDL rules in simplified form: an
expression is signed only if every operand is signed; operands of
arithmetic, bitwise and comparison operators extend to the widest
involved width (including the assignment target), sign-extending only in
all-signed expressions; comparison, shift-amount, concatenation and
condition operands are self-determined.  Plain decimal literals are
32-bit signed, sized literals unsigned.
"""

from __future__ import annotations

from ..bits import mask, sign_extend, to_signed
from ..errors import CombinationalLoop, EvaluationError
from ..trace import CycleTrace, TracePort
from .ast import (AlwaysBlock, Assign, Binary, CombSens, Concat, EdgeSens,
                  Expr, HdlAst, Ident, If, Index, LvConcat, LvIdent, LvIndex,
                  LValue, Number, PartSelect, Stmt, Ternary, Unary)

_SETTLE_CAP = 1000


def _nat(expr: Expr, nets) -> tuple[int, bool]:
    """Natural (self-determined) width and signedness of an expression."""
    if isinstance(expr, Number):
        if expr.width is not None:
            return expr.width, False
        # plain decimals are 32-bit signed; widen huge ones so the value
        # stays nonnegative under sign extension
        return max(32, expr.value.bit_length() + 1), True
    if isinstance(expr, Ident):
        decl = nets[expr.name]
        return decl.width, decl.signed
    if isinstance(expr, Index):
        decl = nets[expr.base]
        if decl.is_array:
            return decl.width, decl.signed
        return 1, False
    if isinstance(expr, PartSelect):
        return expr.msb - expr.lsb + 1, False
    if isinstance(expr, Unary):
        if expr.op == "!":
            return 1, False
        return _nat(expr.operand, nets)
    if isinstance(expr, Binary):
        if expr.op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
            return 1, False
        if expr.op in ("<<", ">>"):
            return _nat(expr.left, nets)
        wl, sl = _nat(expr.left, nets)
        wr, sr = _nat(expr.right, nets)
        return max(wl, wr), sl and sr
    if isinstance(expr, Ternary):
        wl, sl = _nat(expr.then, nets)
        wr, sr = _nat(expr.other, nets)
        return max(wl, wr), sl and sr
    if isinstance(expr, Concat):
        return sum(_nat(p, nets)[0] for p in expr.parts), False
    raise TypeError(f"unknown expression node {expr!r}")


class _Scope:
    """Read view over committed net values with an optional write overlay
    (used for blocking assignments inside clocked blocks)."""

    def __init__(self, values: dict, overlay: dict | None = None):
        self.values = values
        self.overlay = overlay

    def get(self, name: str):
        if self.overlay is not None and name in self.overlay:
            return self.overlay[name]
        return self.values[name]

    def set(self, name: str, value) -> None:
        if self.overlay is not None:
            self.overlay[name] = value
        else:
            self.values[name] = value


class SimInstance:
    """Elaborated simulation state for one module."""

    def __init__(self, ast: HdlAst):
        self.ast = ast
        self.nets = ast.nets
        self.values: dict[str, int | list[int]] = {}
        self.diagnostics: list[str] = []
        self._comb_blocks = [b for b in ast.always_blocks
                             if isinstance(b.sensitivity, CombSens)]
        self._clocked_blocks = [b for b in ast.always_blocks
                                if isinstance(b.sensitivity, EdgeSens)]
        clocks = {b.sensitivity.clock for b in self._clocked_blocks}
        self.clock_name: str | None = next(iter(clocks), None)
        self.data_inputs = [p.name for p in ast.input_ports
                            if p.name != self.clock_name]
        for decl in self.nets.values():
            if decl.is_array:
                self.values[decl.name] = [0] * decl.array_size
            else:
                self.values[decl.name] = 0
        self._settle()

    # -- expression evaluation -------------------------------------------

    def _read(self, scope: _Scope, name: str) -> int:
        v = scope.get(name)
        if isinstance(v, list):
            raise EvaluationError(f"array '{name}' read without an index")
        return v

    def _eval(self, expr: Expr, scope: _Scope, ctx_w: int, ctx_s: bool) -> int:
        """Evaluate to a bit pattern of width max(natural, ctx_w)."""
        nw, ns = _nat(expr, self.nets)
        eff = max(nw, ctx_w)
        signed = ns and ctx_s

        if isinstance(expr, Number):
            return mask(expr.value, eff)

        if isinstance(expr, Ident):
            decl = self.nets[expr.name]
            v = self._read(scope, expr.name)
            if signed and decl.signed:
                return sign_extend(v, decl.width, eff)
            return v

        if isinstance(expr, Index):
            decl = self.nets[expr.base]
            idx = self._eval_self(expr.index, scope)
            if decl.is_array:
                lo, hi = decl.array_range
                arr = scope.get(expr.base)
                if not lo <= idx <= hi:
                    self._diag(f"array index {idx} outside [{lo}:{hi}] "
                               f"of '{expr.base}'")
                    return 0
                return mask(arr[idx - lo], eff)
            bit = idx - decl.lsb
            v = self._read(scope, expr.base)
            if not 0 <= bit < decl.width:
                self._diag(f"bit index {idx} outside [{decl.msb}:{decl.lsb}] "
                           f"of '{expr.base}'")
                return 0
            return (v >> bit) & 1

        if isinstance(expr, PartSelect):
            decl = self.nets[expr.base]
            v = self._read(scope, expr.base)
            return mask(v >> (expr.lsb - decl.lsb), expr.msb - expr.lsb + 1)

        if isinstance(expr, Unary):
            if expr.op == "!":
                return 0 if self._eval_self(expr.operand, scope) else 1
            v = self._eval(expr.operand, scope, eff, signed)
            if expr.op == "~":
                return mask(~v, eff)
            if expr.op == "-":
                return mask(-v, eff)
            return v

        if isinstance(expr, Binary):
            return self._eval_binary(expr, scope, eff, signed)

        if isinstance(expr, Ternary):
            cond = self._eval_self(expr.cond, scope)
            branch = expr.then if cond else expr.other
            return self._eval(branch, scope, eff, signed)

        if isinstance(expr, Concat):
            v = 0
            for part in expr.parts:
                pw, _ = _nat(part, self.nets)
                v = (v << pw) | self._eval_self(part, scope)
            return mask(v, eff)

        raise TypeError(f"unknown expression node {expr!r}")

    def _eval_self(self, expr: Expr, scope: _Scope) -> int:
        nw, ns = _nat(expr, self.nets)
        return self._eval(expr, scope, nw, ns)

    def _eval_binary(self, expr: Binary, scope: _Scope, eff: int, signed: bool) -> int:
        op = expr.op
        if op in ("&&", "||"):
            l = self._eval_self(expr.left, scope)
            r = self._eval_self(expr.right, scope)
            if op == "&&":
                return 1 if (l and r) else 0
            return 1 if (l or r) else 0

        if op in ("==", "!=", "<", "<=", ">", ">="):
            wl, sl = _nat(expr.left, self.nets)
            wr, sr = _nat(expr.right, self.nets)
            cw, cs = max(wl, wr), sl and sr
            l = self._eval(expr.left, scope, cw, cs)
            r = self._eval(expr.right, scope, cw, cs)
            if cs:
                l, r = to_signed(l, cw), to_signed(r, cw)
            result = {
                "==": l == r, "!=": l != r,
                "<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r,
            }[op]
            return 1 if result else 0

        if op in ("<<", ">>"):
            l = self._eval(expr.left, scope, eff, signed)
            sh = self._eval_self(expr.right, scope)
            if sh >= eff:
                return 0
            if op == "<<":
                return mask(l << sh, eff)
            return l >> sh

        l = self._eval(expr.left, scope, eff, signed)
        r = self._eval(expr.right, scope, eff, signed)
        if op == "+":
            return mask(l + r, eff)
        if op == "-":
            return mask(l - r, eff)
        if op == "*":
            return mask(l * r, eff)
        if op == "&":
            return l & r
        if op == "|":
            return l | r
        if op == "^":
            return l ^ r
        if op in ("/", "%"):
            if r == 0:
                self._diag(f"{'division' if op == '/' else 'modulo'} by zero")
                return 0
            if signed:
                ls, rs = to_signed(l, eff), to_signed(r, eff)
                q = abs(ls) // abs(rs)
                if (ls < 0) != (rs < 0):
                    q = -q
                if op == "/":
                    return mask(q, eff)
                return mask(ls - q * rs, eff)
            return l // r if op == "/" else l % r
        raise TypeError(f"unknown operator {op}")

    def _diag(self, message: str) -> None:
        if message not in self.diagnostics:
            self.diagnostics.append(message)

    # -- assignment targets ------------------------------------------------

    def _lvalue_width(self, lv: LValue) -> int:
        if isinstance(lv, LvConcat):
            return sum(self._lvalue_width(p) for p in lv.parts)
        decl = self.nets[lv.name]
        if isinstance(lv, LvIdent):
            return decl.width
        if isinstance(lv, LvIndex):
            return decl.width if decl.is_array else 1
        return lv.msb - lv.lsb + 1

    def _resolve_simple(self, lv: LValue, scope: _Scope):
        """Resolve a non-concat target to a concrete location, evaluating
        index expressions against *scope* now.  Returns None (with a
        diagnostic) for out-of-range locations."""
        decl = self.nets[lv.name]  # type: ignore[union-attr]
        if isinstance(lv, LvIdent):
            return ("whole", lv.name)
        if isinstance(lv, LvIndex):
            idx = self._eval_self(lv.index, scope)
            if decl.is_array:
                lo, hi = decl.array_range
                if not lo <= idx <= hi:
                    self._diag(f"array write index {idx} outside [{lo}:{hi}] "
                               f"of '{lv.name}'")
                    return None
                return ("elem", lv.name, idx - lo)
            bit = idx - decl.lsb
            if not 0 <= bit < decl.width:
                self._diag(f"bit write index {idx} outside [{decl.msb}:{decl.lsb}] "
                           f"of '{lv.name}'")
                return None
            return ("part", lv.name, bit, 1)
        return ("part", lv.name, lv.lsb - decl.lsb, lv.msb - lv.lsb + 1)

    def _apply_resolved(self, loc, value: int, scope: _Scope) -> None:
        kind, name = loc[0], loc[1]
        decl = self.nets[name]
        if kind == "whole":
            scope.set(name, mask(value, decl.width))
        elif kind == "elem":
            arr = list(scope.get(name))
            arr[loc[2]] = mask(value, decl.width)
            scope.set(name, arr)
        else:
            lo_bit, width = loc[2], loc[3]
            old = self._read(scope, name)
            field = ((1 << width) - 1) << lo_bit
            scope.set(name, (old & ~field) | (mask(value, width) << lo_bit))

    def _store(self, lv: LValue, value: int, scope: _Scope) -> None:
        if isinstance(lv, LvConcat):
            offset = self._lvalue_width(lv)
            for part in lv.parts:
                pw = self._lvalue_width(part)
                offset -= pw
                self._store(part, mask(value >> offset, pw), scope)
            return
        loc = self._resolve_simple(lv, scope)
        if loc is not None:
            self._apply_resolved(loc, value, scope)

    def _record_nonblocking(self, lv: LValue, value: int, scope: _Scope,
                            pending: list) -> None:
        if isinstance(lv, LvConcat):
            offset = self._lvalue_width(lv)
            for part in lv.parts:
                pw = self._lvalue_width(part)
                offset -= pw
                self._record_nonblocking(part, mask(value >> offset, pw),
                                         scope, pending)
            return
        loc = self._resolve_simple(lv, scope)
        if loc is not None:
            pending.append((loc, value))

    def _assign_value(self, stmt: Assign, scope: _Scope) -> int:
        w = self._lvalue_width(stmt.target)
        _, rhs_signed = _nat(stmt.expr, self.nets)
        v = self._eval(stmt.expr, scope, w, rhs_signed)
        return mask(v, w)

    # -- statement execution ------------------------------------------------

    def _exec_stmts(self, stmts: tuple[Stmt, ...], scope: _Scope,
                    pending: list | None) -> None:
        """Run statements; nonblocking assigns are recorded into *pending*,
        blocking assigns write through the scope."""
        for stmt in stmts:
            if isinstance(stmt, If):
                cond = self._eval_self(stmt.cond, scope)
                self._exec_stmts(stmt.then if cond else stmt.other, scope, pending)
                continue
            value = self._assign_value(stmt, scope)
            if stmt.blocking or pending is None:
                self._store(stmt.target, value, scope)
            else:
                self._record_nonblocking(stmt.target, value, scope, pending)

    # -- combinational settling ----------------------------------------------

    def _settle(self) -> None:
        scope = _Scope(self.values)
        for _ in range(_SETTLE_CAP):
            changed = False
            for ca in self.ast.assigns:
                w = self._lvalue_width(ca.target)
                _, s = _nat(ca.expr, self.nets)
                new = mask(self._eval(ca.expr, scope, w, s), w)
                before = self._snapshot_targets(ca.target)
                self._store(ca.target, new, scope)
                if self._snapshot_targets(ca.target) != before:
                    changed = True
            for block in self._comb_blocks:
                targets = self._block_targets(block)
                before_all = {n: self._copy_val(self.values[n]) for n in targets}
                self._exec_stmts(block.stmts, scope, pending=None)
                if any(self._copy_val(self.values[n]) != before_all[n]
                       for n in targets):
                    changed = True
            if not changed:
                return
        raise CombinationalLoop(
            f"combinational logic did not settle within {_SETTLE_CAP} iterations")

    @staticmethod
    def _copy_val(v):
        return list(v) if isinstance(v, list) else v

    def _snapshot_targets(self, lv: LValue):
        names = []
        stack = [lv]
        while stack:
            node = stack.pop()
            if isinstance(node, LvConcat):
                stack.extend(node.parts)
            else:
                names.append(node.name)
        return [self._copy_val(self.values[n]) for n in names]

    def _block_targets(self, block: AlwaysBlock) -> set[str]:
        out: set[str] = set()

        def visit(stmts):
            for s in stmts:
                if isinstance(s, If):
                    visit(s.then)
                    visit(s.other)
                else:
                    stack = [s.target]
                    while stack:
                        node = stack.pop()
                        if isinstance(node, LvConcat):
                            stack.extend(node.parts)
                        else:
                            out.add(node.name)

        visit(block.stmts)
        return out

    # -- public stepping API ---------------------------------------------------

    def bind_inputs(self, inputs: dict[str, int]) -> None:
        required = set(self.data_inputs)
        given = set(inputs)
        missing = required - given
        extra = given - required
        if missing:
            raise EvaluationError(f"tick inputs missing port(s): "
                                  f"{', '.join(sorted(missing))}")
        if extra:
            raise EvaluationError(f"tick inputs include unknown port(s): "
                                  f"{', '.join(sorted(extra))}")
        for name, value in inputs.items():
            decl = self.nets[name]
            if not isinstance(value, int) or isinstance(value, bool):
                raise EvaluationError(f"input '{name}' is not an integer")
            if value < 0 or value >= (1 << decl.width):
                raise EvaluationError(
                    f"input '{name}' value {value} outside its {decl.width}-bit range")
            self.values[name] = value

    def read_outputs(self) -> dict[str, int]:
        return {p.name: self.values[p.name] for p in self.ast.output_ports}

    def tick(self, inputs: dict[str, int]) -> dict[str, int]:
        """Advance one rising clock edge and return post-edge outputs."""
        self.bind_inputs(inputs)
        self._settle()
        pending: list = []
        snapshot = {n: self._copy_val(v) for n, v in self.values.items()}
        for block in self._clocked_blocks:
            scope = _Scope(snapshot, overlay={})
            self._exec_stmts(block.stmts, scope, pending)
        commit = _Scope(self.values)
        for loc, value in pending:
            self._apply_resolved(loc, value, commit)
        self._settle()
        return self.read_outputs()

    def apply_async_reset(self, inputs: dict[str, int]) -> None:
        """Model an asynchronous reset asserted before any clock edge:
        reset branches of async blocks fire, no clocked logic runs."""
        self.bind_inputs(inputs)
        self._settle()
        pending: list = []
        snapshot = {n: self._copy_val(v) for n, v in self.values.items()}
        for block in self._clocked_blocks:
            sens = block.sensitivity
            if not isinstance(sens, EdgeSens) or sens.reset is None:
                continue
            guard = block.stmts[0]
            assert isinstance(guard, If)
            scope = _Scope(snapshot, overlay={})
            if self._eval_self(guard.cond, scope):
                self._exec_stmts(guard.then, scope, pending)
        commit = _Scope(self.values)
        for loc, value in pending:
            self._apply_resolved(loc, value, commit)
        self._settle()


def elaborate(ast: HdlAst) -> SimInstance:
    """Build a fresh :class:`SimInstance`: all nets zero, combinational
    logic settled once."""
    return SimInstance(ast)


def trace_ports(ast: HdlAst, clock_name: str | None) -> tuple[TracePort, ...]:
    ports = []
    for name in ast.port_order:
        if name == clock_name:
            continue
        decl = ast.nets[name]
        direction = "in" if decl.kind == "input" else "out"
        ports.append(TracePort(name, direction, decl.width, decl.signed))
    return tuple(ports)


def run_stimuli(inst: SimInstance, cycles: list[dict[str, int]]) -> CycleTrace:
    """Tick once per cycle map; inputs are echoed into the trace verbatim."""
    trace = CycleTrace(ports=trace_ports(inst.ast, inst.clock_name))
    for cycle in cycles:
        outputs = inst.tick(cycle)
        trace.append(cycle, outputs)
    return trace
