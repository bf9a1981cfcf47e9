"""Tokenizer for the expression grammar."""

import re
from dataclasses import dataclass

from ..errors import GeoSyntaxError

_TOKEN = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\*\*|[-+*/^(),\[\]'=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "name", "op", "end"
    text: str
    line: int
    column: int  # 1-based


def tokenize(text, line=1, column=1):
    """Split one logical line; ``column`` is the 1-based offset of ``text[0]``."""
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GeoSyntaxError(f"unexpected character {text[pos]!r}", line, column + pos)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            out.append(Token(kind, "^" if tok == "**" else tok, line, column + pos))
        pos = m.end()
    out.append(Token("end", "", line, column + len(text)))
    return out
