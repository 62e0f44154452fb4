"""Rule language for expert knowledge files (``.ekr``).

A rule file declares propositions bound to numeric feature columns and
per-class rules combining them with ``!``, ``&``, ``|`` (precedence
NOT > AND > OR, binary operators left-associative)::

    # propositions
    prop big_lesion := threshold(feature "lesion_area", >, 4.0)
    prop dense      := sigmoid(feature "density", center=0.5, scale=0.1, direction=+)

    # class rules
    rule Severe := big_lesion & dense
    rule Mild   := !big_lesion

Comments run from ``#`` to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, auto

from .errors import LexError, ParseError, ValidationError


class TokenKind(Enum):
    IDENT = auto()
    AND = auto()      # &
    OR = auto()       # |
    NOT = auto()      # !
    LPAREN = auto()
    RPAREN = auto()
    ASSIGN = auto()   # := inside declarations, = inside named params
    KEYWORD = auto()  # prop/rule/threshold/... and reserved symbols <, <=, >, >=, +, -
    NUMBER = auto()
    STRING = auto()
    COMMA = auto()


KEYWORDS = {"prop", "rule", "threshold", "sigmoid", "feature", "center", "scale", "direction"}

# reserved non-identifier lexemes carried with KEYWORD kind
_SYMBOL_KEYWORDS = {"<", "<=", ">", ">=", "+", "-"}


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    """Split source text into tokens; positions are 1-based."""
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)

    def emit(kind: TokenKind, lexeme: str) -> None:
        tokens.append(Token(kind, lexeme, line, col))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "&":
            emit(TokenKind.AND, "&")
        elif ch == "|":
            emit(TokenKind.OR, "|")
        elif ch == "!":
            emit(TokenKind.NOT, "!")
        elif ch == "(":
            emit(TokenKind.LPAREN, "(")
        elif ch == ")":
            emit(TokenKind.RPAREN, ")")
        elif ch == ",":
            emit(TokenKind.COMMA, ",")
        elif ch == ":" and i + 1 < n and text[i + 1] == "=":
            emit(TokenKind.ASSIGN, ":=")
            i += 2
            col += 2
            continue
        elif ch == "=":
            emit(TokenKind.ASSIGN, "=")
        elif ch in "<>":
            if i + 1 < n and text[i + 1] == "=":
                emit(TokenKind.KEYWORD, ch + "=")
                i += 2
                col += 2
                continue
            emit(TokenKind.KEYWORD, ch)
        elif ch == "≤":  # ≤
            emit(TokenKind.KEYWORD, "<=")
        elif ch == "≥":  # ≥
            emit(TokenKind.KEYWORD, ">=")
        elif ch in "+-":
            emit(TokenKind.KEYWORD, ch)
        elif ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise LexError(line, col, '"')
            emit(TokenKind.STRING, text[i + 1 : j])
            col += j + 1 - i
            i = j + 1
            continue
        elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            emit(TokenKind.NUMBER, text[i:j])
            col += j - i
            i = j
            continue
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            emit(TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENT, word)
            col += j - i
            i = j
            continue
        else:
            raise LexError(line, col, ch)
        i += 1
        col += 1
    return tokens


# --- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


Expr = Atom | Not | And | Or


def atoms_of(expr: Expr) -> list[str]:
    """Atom names in left-to-right first-occurrence order."""
    seen: list[str] = []

    def walk(e: Expr) -> None:
        if isinstance(e, Atom):
            if e.name not in seen:
                seen.append(e.name)
        elif isinstance(e, Not):
            walk(e.child)
        else:
            walk(e.left)
            walk(e.right)

    walk(expr)
    return seen


_PRECEDENCE = {Or: 1, And: 2, Not: 3, Atom: 4}


def format_expr(expr: Expr) -> str:
    """Minimal-parenthesization text; parse(format(e)) == e structurally."""

    def fmt(e: Expr, parent_prec: int, is_right: bool) -> str:
        prec = _PRECEDENCE[type(e)]
        if isinstance(e, Atom):
            return e.name
        if isinstance(e, Not):
            return "!" + fmt(e.child, prec, False)
        op = " & " if isinstance(e, And) else " | "
        text = fmt(e.left, prec, False) + op + fmt(e.right, prec, True)
        # equal precedence on the right needs parens to survive left-assoc reparse
        if prec < parent_prec or (prec == parent_prec and is_right):
            return "(" + text + ")"
        return text

    return fmt(expr, 0, False)


# --- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class ExtractorDecl:
    name: str
    kind: str                 # "threshold" | "sigmoid"
    feature: str
    op: str | None = None     # threshold: one of <, <=, >, >=
    value: float | None = None
    center: float | None = None
    scale: float | None = None
    direction: float | None = None  # +1.0 or -1.0


@dataclass(frozen=True)
class ClassRuleDecl:
    class_label: str
    rule: Expr


@dataclass
class RuleSet:
    extractors: dict[str, ExtractorDecl]
    class_rules: dict[str, Expr]
    weights: dict[str, dict[str, float]] = field(default_factory=dict)

    def propositions_for(self, class_label: str) -> list[str]:
        return atoms_of(self.class_rules[class_label])

    def restricted(self, labels: set[str]) -> "RuleSet":
        """Copy containing only the rules (and weights) for the given labels."""
        missing = sorted(labels - set(self.class_rules))
        if missing:
            raise ValidationError(missing[0], "no rule declared for this class label")
        return RuleSet(
            extractors=dict(self.extractors),
            class_rules={c: self.class_rules[c] for c in self.class_rules if c in labels},
            weights={c: dict(w) for c, w in self.weights.items() if c in labels},
        )


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _err(self, expected: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token(TokenKind.IDENT, "", 1, 1)
            return ParseError(last.line, last.column + len(last.lexeme), expected, "end of input")
        return ParseError(tok.line, tok.column, expected, repr(tok.lexeme))

    def expect(self, kind: TokenKind, lexeme: str | None = None) -> Token:
        tok = self.peek()
        want = lexeme if lexeme is not None else kind.name
        if tok is None or tok.kind is not kind or (lexeme is not None and tok.lexeme != lexeme):
            raise self._err(want)
        self.pos += 1
        return tok

    def accept(self, kind: TokenKind, lexeme: str | None = None) -> Token | None:
        tok = self.peek()
        if tok is not None and tok.kind is kind and (lexeme is None or tok.lexeme == lexeme):
            self.pos += 1
            return tok
        return None

    # expr := or_expr
    def expr(self) -> Expr:
        left = self.and_expr()
        while self.accept(TokenKind.OR):
            left = Or(left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.unary()
        while self.accept(TokenKind.AND):
            left = And(left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept(TokenKind.NOT):
            return Not(self.unary())
        if self.accept(TokenKind.LPAREN):
            inner = self.expr()
            self.expect(TokenKind.RPAREN, ")")
            return inner
        tok = self.peek()
        if tok is not None and tok.kind is TokenKind.IDENT:
            self.pos += 1
            return Atom(tok.lexeme)
        raise self._err("proposition name, '!' or '('")

    def signed_number(self) -> float:
        sign = 1.0
        tok = self.accept(TokenKind.KEYWORD, "-") or self.accept(TokenKind.KEYWORD, "+")
        if tok is not None and tok.lexeme == "-":
            sign = -1.0
        num = self.expect(TokenKind.NUMBER)
        return sign * float(num.lexeme)

    def extractor(self, name: str) -> ExtractorDecl:
        tok = self.peek()
        if tok is None or tok.kind is not TokenKind.KEYWORD or tok.lexeme not in ("threshold", "sigmoid"):
            raise self._err("'threshold' or 'sigmoid'")
        self.pos += 1
        kind = tok.lexeme
        self.expect(TokenKind.LPAREN, "(")
        self.expect(TokenKind.KEYWORD, "feature")
        feature = self.expect(TokenKind.STRING).lexeme
        self.expect(TokenKind.COMMA, ",")
        if kind == "threshold":
            op_tok = self.peek()
            if op_tok is None or op_tok.kind is not TokenKind.KEYWORD or op_tok.lexeme not in ("<", "<=", ">", ">="):
                raise self._err("comparison operator")
            self.pos += 1
            self.expect(TokenKind.COMMA, ",")
            value = self.signed_number()
            self.expect(TokenKind.RPAREN, ")")
            return ExtractorDecl(name, "threshold", feature, op=op_tok.lexeme, value=value)
        self.expect(TokenKind.KEYWORD, "center")
        self.expect(TokenKind.ASSIGN, "=")
        center = self.signed_number()
        self.expect(TokenKind.COMMA, ",")
        self.expect(TokenKind.KEYWORD, "scale")
        self.expect(TokenKind.ASSIGN, "=")
        scale = self.signed_number()
        self.expect(TokenKind.COMMA, ",")
        self.expect(TokenKind.KEYWORD, "direction")
        self.expect(TokenKind.ASSIGN, "=")
        dir_tok = self.accept(TokenKind.KEYWORD, "+") or self.accept(TokenKind.KEYWORD, "-")
        if dir_tok is None:
            raise self._err("'+' or '-'")
        self.expect(TokenKind.RPAREN, ")")
        if scale <= 0:
            raise ValidationError(name, f"sigmoid scale must be > 0, got {scale}")
        return ExtractorDecl(
            name, "sigmoid", feature,
            center=center, scale=scale, direction=1.0 if dir_tok.lexeme == "+" else -1.0,
        )


def parse_expr(text: str) -> Expr:
    """Parse a bare rule expression (no declarations)."""
    parser = _Parser(tokenize(text))
    expr = parser.expr()
    if parser.peek() is not None:
        raise parser._err("end of input")
    return expr


def parse_ruleset(text: str) -> RuleSet:
    """Parse a full ``.ekr`` document and validate cross-references."""
    parser = _Parser(tokenize(text))
    extractors: dict[str, ExtractorDecl] = {}
    class_rules: dict[str, Expr] = {}
    rule_order: list[str] = []
    while parser.peek() is not None:
        tok = parser.peek()
        if tok.kind is TokenKind.KEYWORD and tok.lexeme == "prop":
            parser.pos += 1
            name = parser.expect(TokenKind.IDENT).lexeme
            parser.expect(TokenKind.ASSIGN, ":=")
            decl = parser.extractor(name)
            if name in extractors:
                raise ValidationError(name, "proposition declared more than once")
            extractors[name] = decl
        elif tok.kind is TokenKind.KEYWORD and tok.lexeme == "rule":
            parser.pos += 1
            label = parser.expect(TokenKind.IDENT).lexeme
            parser.expect(TokenKind.ASSIGN, ":=")
            rule = parser.expr()
            if label in class_rules:
                raise ValidationError(label, "class rule declared more than once")
            class_rules[label] = rule
            rule_order.append(label)
        else:
            raise parser._err("'prop' or 'rule'")
    for label in rule_order:
        for atom in atoms_of(class_rules[label]):
            if atom not in extractors:
                raise ValidationError(atom, f"atom used in rule {label!r} but never declared")
    return RuleSet(extractors=extractors, class_rules=class_rules)


def _fmt_num(x: float) -> str:
    return "%.12g" % x


def format_ruleset(ruleset: RuleSet) -> str:
    """Canonical ``.ekr`` text; parse_ruleset(format_ruleset(rs)) round-trips."""
    lines = []
    for name, d in ruleset.extractors.items():
        if d.kind == "threshold":
            lines.append(
                f'prop {name} := threshold(feature "{d.feature}", {d.op}, {_fmt_num(d.value)})'
            )
        else:
            sign = "+" if d.direction > 0 else "-"
            lines.append(
                f'prop {name} := sigmoid(feature "{d.feature}", '
                f"center={_fmt_num(d.center)}, scale={_fmt_num(d.scale)}, direction={sign})"
            )
    for label, rule in ruleset.class_rules.items():
        lines.append(f"rule {label} := {format_expr(rule)}")
    return "\n".join(lines) + "\n"


def load_ruleset(path) -> RuleSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ruleset(fh.read())
