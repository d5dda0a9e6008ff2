"""Tokenizer for the Verilog subset."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = {
    "module", "endmodule", "input", "output", "inout", "wire", "reg",
    "assign", "always", "begin", "end", "if", "else", "case", "casez",
    "endcase", "default", "posedge", "negedge", "or", "parameter",
    "localparam",
}

# Constructs outside the subset, rejected by name at the lexer/parser level.
UNSUPPORTED_KEYWORDS = {
    "generate", "endgenerate", "genvar", "function", "endfunction", "task",
    "endtask", "initial", "for", "while", "forever", "repeat", "fork",
    "join", "wait", "event", "real", "time", "integer", "signed",
    "specify", "endspecify", "defparam", "casex", "primitive", "table",
    "deassign", "force", "release", "disable",
}

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t\r]+)
    | (?P<nl>\n)
    | (?P<lcomment>//[^\n]*)
    | (?P<bcomment>/\*.*?\*/)
    | (?P<based>(\d+)?\s*'[sS]?[bBoOdDhH][0-9a-fA-FxXzZ_?]+)
    | (?P<num>\d[\d_]*)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
    | (?P<op><<|>>|<=|>=|==|!=|&&|\|\||[~!&|^+\-*/%<>?:=(){}\[\],;.@#])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class Token:
    kind: str  # "kw" | "ident" | "number" | "op" | "eof"
    text: str
    line: int
    col: int
    value: int | None = None  # numbers: parsed value
    size: int | None = None  # numbers: explicit size, None if unsized


def _parse_based(text: str, filename: str, line: int, col: int) -> tuple[int, int | None]:
    m = re.match(r"(\d+)?\s*'([sS]?)([bBoOdDhH])([0-9a-fA-FxXzZ_?]+)", text)
    size_s, signed, base_c, digits = m.groups()
    if signed:
        raise ParseError("signed literals are not supported", filename, line, col)
    if re.search(r"[xXzZ?]", digits):
        raise ParseError("x/z literal digits are not supported (two-valued logic only)",
                         filename, line, col)
    digits = digits.replace("_", "")
    base = {"b": 2, "o": 8, "d": 10, "h": 16}[base_c.lower()]
    try:
        value = int(digits, base)
    except ValueError:
        raise ParseError(f"bad digits for base-{base} literal", filename, line, col)
    size = int(size_s) if size_s else None
    if size is not None:
        if size <= 0:
            raise ParseError("literal size must be positive", filename, line, col)
        value &= (1 << size) - 1
    return value, size


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", filename, line, col)
        kind = m.lastgroup
        tok_text = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind in ("ws", "lcomment"):
            col += len(tok_text)
        elif kind == "bcomment":
            nls = tok_text.count("\n")
            if nls:
                line += nls
                col = len(tok_text) - tok_text.rfind("\n")
            else:
                col += len(tok_text)
        elif kind == "based":
            value, size = _parse_based(tok_text, filename, line, col)
            tokens.append(Token("number", tok_text, line, col, value, size))
            col += len(tok_text)
        elif kind == "num":
            tokens.append(Token("number", tok_text, line, col,
                                int(tok_text.replace("_", "")), None))
            col += len(tok_text)
        elif kind == "ident":
            if tok_text in UNSUPPORTED_KEYWORDS:
                raise ParseError(f"unsupported construct: {tok_text!r}",
                                 filename, line, col)
            k = "kw" if tok_text in KEYWORDS else "ident"
            tokens.append(Token(k, tok_text, line, col))
            col += len(tok_text)
        else:  # op
            tokens.append(Token("op", tok_text, line, col))
            col += len(tok_text)
        i = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens
