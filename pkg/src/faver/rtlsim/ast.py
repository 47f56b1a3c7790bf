"""AST for the supported synthesizable subset."""

from __future__ import annotations

from dataclasses import dataclass, field


# --- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Number:
    value: int
    width: int | None  # None: plain decimal (32-bit signed)
    line: int = 0


@dataclass(frozen=True)
class Ident:
    name: str
    line: int = 0


@dataclass(frozen=True)
class Unary:
    op: str  # ~ ! - +
    operand: "Expr"
    line: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = 0


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    line: int = 0


@dataclass(frozen=True)
class Concat:
    parts: tuple["Expr", ...]
    line: int = 0


@dataclass(frozen=True)
class Index:
    base: str
    index: "Expr"
    line: int = 0


@dataclass(frozen=True)
class PartSelect:
    base: str
    msb: int
    lsb: int
    line: int = 0


Expr = Number | Ident | Unary | Binary | Ternary | Concat | Index | PartSelect


# --- lvalues ----------------------------------------------------------------

@dataclass(frozen=True)
class LvIdent:
    name: str
    line: int = 0


@dataclass(frozen=True)
class LvIndex:
    name: str
    index: Expr
    line: int = 0


@dataclass(frozen=True)
class LvPart:
    name: str
    msb: int
    lsb: int
    line: int = 0


@dataclass(frozen=True)
class LvConcat:
    parts: tuple["LValue", ...]
    line: int = 0


LValue = LvIdent | LvIndex | LvPart | LvConcat


# --- statements -------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: LValue
    expr: Expr
    blocking: bool
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    other: tuple["Stmt", ...]  # empty when no else
    line: int = 0


Stmt = Assign | If


# --- module items -----------------------------------------------------------

@dataclass
class NetDecl:
    name: str
    kind: str  # "input" | "output" | "wire" | "reg"
    msb: int = 0
    lsb: int = 0
    signed: bool = False
    is_reg: bool = False          # regs and output-regs hold clocked state
    array_range: tuple[int, int] | None = None  # (lo, hi) element indices
    line: int = 0

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1

    @property
    def is_array(self) -> bool:
        return self.array_range is not None

    @property
    def array_size(self) -> int:
        lo, hi = self.array_range
        return hi - lo + 1


@dataclass(frozen=True)
class ContinuousAssign:
    target: LValue
    expr: Expr
    line: int = 0


@dataclass(frozen=True)
class EdgeSens:
    """posedge-clock sensitivity, optionally with an async reset edge."""
    clock: str
    reset: tuple[str, str] | None = None  # (signal, "posedge"|"negedge")


@dataclass(frozen=True)
class CombSens:
    """@(*) sensitivity."""


Sensitivity = EdgeSens | CombSens


@dataclass(frozen=True)
class AlwaysBlock:
    sensitivity: Sensitivity
    stmts: tuple[Stmt, ...]
    line: int = 0


@dataclass
class HdlAst:
    module_name: str
    port_order: list[str]
    nets: dict[str, NetDecl] = field(default_factory=dict)
    assigns: list[ContinuousAssign] = field(default_factory=list)
    always_blocks: list[AlwaysBlock] = field(default_factory=list)

    @property
    def input_ports(self) -> list[NetDecl]:
        return [self.nets[n] for n in self.port_order if self.nets[n].kind == "input"]

    @property
    def output_ports(self) -> list[NetDecl]:
        return [self.nets[n] for n in self.port_order if self.nets[n].kind == "output"]
