"""Tokenizer for the HDL subset."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import LexError, UnsupportedConstruct

KEYWORDS = {
    "module", "endmodule", "input", "output", "wire", "reg", "signed",
    "assign", "always", "begin", "end", "if", "else", "posedge", "negedge",
    "or",
}

# Recognized so the parser can name what it rejects.
UNSUPPORTED_KEYWORDS = {
    "initial", "task", "function", "generate", "endgenerate", "case",
    "casex", "casez", "endcase", "for", "while", "repeat", "forever",
    "fork", "join", "parameter", "localparam", "integer", "real", "genvar",
    "inout", "tri", "supply0", "supply1", "specify", "defparam", "wait",
    "deassign", "force", "release", "event", "time",
}

_TWO_CHAR = ("<=", ">=", "==", "!=", "&&", "||", "<<", ">>")
_ONE_CHAR = "+-*/%&|^~!<>=?:;,()[]{}@#"

_BASES = {"b": 2, "o": 8, "d": 10, "h": 16}


@dataclass(frozen=True)
class Token:
    kind: str  # "id" | "kw" | "num" | "op" | "eof"
    text: str
    value: int | None = None   # numeric value for "num"
    width: int | None = None   # literal width for sized "num"
    line: int = 0
    col: int = 0


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def err(msg: str):
        raise LexError(msg, line, col)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i)
            if j < 0:
                err("unterminated block comment")
            for k in range(i, j):
                if source[k] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            i = j + 2
            col += 2
            continue
        if ch == "`":
            err("compiler directives are not supported")

        start_line, start_col = line, col

        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_" or source[j] == "$"):
                j += 1
            word = source[i:j]
            if "$" in word:
                raise UnsupportedConstruct(word, start_line, start_col)
            if word in UNSUPPORTED_KEYWORDS:
                raise UnsupportedConstruct(word, start_line, start_col)
            kind = "kw" if word in KEYWORDS else "id"
            tokens.append(Token(kind, word, line=start_line, col=start_col))
            col += j - i
            i = j
            continue

        if ch.isdigit() or ch == "'":
            lit_width: int | None = None
            j = i
            if ch.isdigit():
                while j < n and (source[j].isdigit() or source[j] == "_"):
                    j += 1
                digits = source[i:j].replace("_", "")
            else:
                digits = ""
            if j < n and source[j] == "'":
                lit_width = int(digits) if digits else 32
                j += 1
                if j < n and source[j] in "sS":  # signed marker tolerated, ignored
                    j += 1
                if j >= n or source[j].lower() not in _BASES:
                    err("expected base after ' in literal")
                base = _BASES[source[j].lower()]
                j += 1
                k = j
                while k < n and (source[k].isalnum() or source[k] == "_"):
                    k += 1
                body = source[j:k].replace("_", "")
                if not body:
                    err("literal missing digits")
                if "x" in body.lower() or "z" in body.lower():
                    err("four-state literal values are not supported")
                try:
                    value = int(body, base)
                except ValueError:
                    err(f"invalid base-{base} literal '{body}'")
                value &= (1 << lit_width) - 1
                tokens.append(Token("num", source[i:k], value=value,
                                    width=lit_width, line=start_line, col=start_col))
                col += k - i
                i = k
                continue
            if not digits:
                err("malformed literal")
            tokens.append(Token("num", digits, value=int(digits), width=None,
                                line=start_line, col=start_col))
            col += j - i
            i = j
            continue

        two = source[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token("op", two, line=line, col=col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR:
            if ch == "#":
                raise UnsupportedConstruct("delay (#)", line, col)
            tokens.append(Token("op", ch, line=line, col=col))
            i += 1
            col += 1
            continue

        err(f"unexpected character {ch!r}")

    tokens.append(Token("eof", "", line=line, col=col))
    return tokens
