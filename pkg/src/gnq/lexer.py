"""A small position-tracking tokenizer used by all text front ends."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "string", "number", "op", "eof"
    text: str
    line: int
    column: int


_DEFAULT_OPS = (
    ":-", "->", "<>", "!=", "<=", ">=", "?-", "---",
    "(", ")", "[", "]", "{", "}", ",", ".", ";", "=", "&", "|", "-", "+", "*", "<", ">", ":",
)


def tokenize(text: str, ops: tuple[str, ...] = _DEFAULT_OPS, source: str | None = None,
             line_comment: str | None = "%") -> list[Token]:
    """Split ``text`` into tokens.

    Identifiers may contain letters, digits, ``_`` and ``'``; a double- or
    single-quoted run is a string token. ``line_comment`` starts a comment
    running to the end of the line.
    """
    ops_sorted = sorted(ops, key=len, reverse=True)
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if line_comment and text.startswith(line_comment, i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "\"'" and not (tokens and tokens[-1].kind == "ident" and ch == "'"):
            j = i + 1
            while j < n and text[j] != ch:
                if text[j] == "\n":
                    raise ParseError("unterminated string", line, col, source)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col, source)
            tokens.append(Token("string", text[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group(0)
            kind = "number" if word.isdigit() else "ident"
            tokens.append(Token(kind, word, line, col))
            col += len(word)
            i = m.end()
            continue
        for op in ops_sorted:
            if text.startswith(op, i):
                tokens.append(Token("op", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col, source)
    tokens.append(Token("eof", "", line, col))
    return tokens


_IDENT = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_']*")


class TokenStream:
    """Cursor over a token list with the usual expect/accept helpers."""

    def __init__(self, tokens: list[Token], source: str | None = None):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def peek_at(self, k: int) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str, kind: str | None = None) -> bool:
        tok = self.peek
        if kind is not None and tok.kind != kind:
            return False
        if tok.kind == "op" or kind is not None:
            return tok.text == text
        return tok.kind == "ident" and tok.text == text

    def at_keyword(self, word: str) -> bool:
        tok = self.peek
        return tok.kind == "ident" and tok.text.lower() == word

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.next()
        return None

    def accept_keyword(self, word: str) -> Token | None:
        if self.at_keyword(word):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.describe(self.peek)}")
        return self.next()

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            self.error(f"expected {word!r}, found {self.describe(self.peek)}")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek
        if tok.kind != "ident":
            self.error(f"expected {what}, found {self.describe(tok)}")
        return self.next()

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek
        raise ParseError(message, tok.line, tok.column, self.source)

    @staticmethod
    def describe(tok: Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        if tok.kind == "string":
            return f'string "{tok.text}"'
        return repr(tok.text)
