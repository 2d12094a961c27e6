"""R-style model formula parsing and term expansion.

Supports the operators ``+ - * : ^`` on the right-hand side, arithmetic
transformations wrapped in ``I(...)``, a small whitelist of elementwise
functions (``log exp sqrt abs sin cos``), survival responses written as
``Surv(time, event)``, and random-effects parts ``(expr | group)``.

The parse result is a tree of frozen dataclasses, so formula objects are
hashable and compare structurally; :func:`render_formula` turns a tree back
into text that reparses to an identical tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import FormulaError

KNOWN_FUNCS = ("log", "exp", "sqrt", "abs", "sin", "cos")

# ---------------------------------------------------------------------------
# AST node types


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Arith:
    """Arithmetic expression inside I(...) or a function argument."""

    op: str  # one of + - * / ^ neg
    args: tuple


@dataclass(frozen=True)
class Func:
    """A function call used as a model term, e.g. log(x) or I(x/z^2)."""

    name: str
    args: tuple


@dataclass(frozen=True)
class Comparison:
    """Event indicator expression in a survival response, e.g. status != "dead"."""

    op: str  # '==' or '!='
    var: Variable
    value: str | float


@dataclass(frozen=True)
class SurvivalResponse:
    time: object
    event: object  # Variable, Comparison, or arithmetic expression


@dataclass(frozen=True)
class FormulaOp:
    """Interior node of the right-hand-side term algebra."""

    op: str  # one of + - * : ^
    left: object
    right: object


@dataclass(frozen=True)
class RandomPart:
    terms: object  # term-algebra tree or None (intercept-only part)
    group: str
    intercept: bool = True


@dataclass(frozen=True)
class FormulaAst:
    response: object  # None (one-sided), expression, or SurvivalResponse
    fixed: object  # term-algebra tree or None
    random_parts: tuple = ()
    intercept: bool = True


@dataclass(frozen=True)
class Term:
    """An expanded design term: an interaction of one or more factors.

    ``factors`` are stored sorted by their rendered label, so ``a:b`` and
    ``b:a`` are the same object and produce the same canonical name.
    """

    factors: tuple

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def name(self) -> str:
        return ":".join(render_expr(f) for f in self.factors)


INTERCEPT_NAME = "(Intercept)"


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+)
  | (?P<name>[A-Za-z_.][A-Za-z0-9_.]*)
  | (?P<cmp>==|!=)
  | (?P<op>[-+*/:^(),|~])
  | (?P<str>"[^"]*"|'[^']*')
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | cmp | op | str | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    idx = 0
    while idx < len(text):
        m = _TOKEN_RE.match(text, idx)
        if m is None:
            raise FormulaError(f"unexpected character {text[idx]!r}", idx)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), idx))
        idx = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str, strict: bool = True):
        self.text = text
        self.strict = strict
        self.tokens = _tokenize(text)
        self.i = 0

    # -- token helpers

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.cur.text != text:
            raise FormulaError(f"expected {text!r}, found {self.cur.text!r}", self.cur.pos)
        return self.advance()

    def at(self, text: str) -> bool:
        return self.cur.text == text

    # -- entry point

    def parse(self, one_sided_ok: bool = False) -> FormulaAst:
        response = None
        if not self.at("~"):
            response = self.parse_response()
        elif not one_sided_ok:
            raise FormulaError("formula is one-sided but a response is required", self.cur.pos)
        self.expect("~")
        fixed, random_parts, intercept = self.parse_rhs()
        if self.cur.kind != "end":
            raise FormulaError(f"trailing input {self.cur.text!r}", self.cur.pos)
        return FormulaAst(
            response=response,
            fixed=fixed,
            random_parts=tuple(random_parts),
            intercept=intercept,
        )

    def parse_response(self):
        if self.cur.kind != "name":
            raise FormulaError("response must be a variable or Surv(...)", self.cur.pos)
        if self.cur.text == "Surv":
            return self.parse_surv()
        name = self.advance().text
        if self.at("("):
            raise FormulaError(
                f"function call {name!r} is not supported as a response; "
                "use a model family instead",
                self.cur.pos,
            )
        return Variable(name)

    def parse_surv(self) -> SurvivalResponse:
        self.expect("Surv")
        self.expect("(")
        time = self.parse_arith()
        self.expect(",")
        event = self.parse_event()
        self.expect(")")
        return SurvivalResponse(time=time, event=event)

    def parse_event(self):
        if self.cur.kind == "name" and self.tokens[self.i + 1].kind == "cmp":
            var = Variable(self.advance().text)
            op = self.advance().text
            tok = self.cur
            if tok.kind == "str":
                self.advance()
                value: str | float = tok.text[1:-1]
            elif tok.kind == "num":
                self.advance()
                value = float(tok.text)
            else:
                raise FormulaError("event comparison needs a string or number", tok.pos)
            return Comparison(op=op, var=var, value=value)
        return self.parse_arith()

    # -- right-hand side (term algebra)

    def parse_rhs(self):
        intercept = [True]
        random_parts: list[RandomPart] = []
        tree = self.parse_sum(intercept, random_parts, top=True)
        return tree, random_parts, intercept[0]

    def parse_sum(self, intercept, random_parts, top: bool):
        left = self.parse_sum_operand(intercept, random_parts, top, removing=False)
        while self.cur.text in ("+", "-"):
            op = self.advance().text
            right = self.parse_sum_operand(
                intercept, random_parts, top, removing=(op == "-")
            )
            if right is None:
                continue  # intercept literal or random part, already handled
            if left is None:
                if op == "-":
                    raise FormulaError("cannot remove a term from an empty formula", self.cur.pos)
                left = right
            else:
                left = FormulaOp(op, left, right)
        return left

    def parse_sum_operand(self, intercept, random_parts, top: bool, removing: bool):
        if self.cur.kind == "num":
            tok = self.advance()
            val = float(tok.text)
            if val == 0.0 and not removing:
                intercept[0] = False
            elif val == 1.0:
                intercept[0] = not removing
            else:
                raise FormulaError(
                    "numeric literals in a formula must be the intercept markers 0 or 1",
                    tok.pos,
                )
            return None
        if self.at("(") and self._paren_is_random_part():
            if not top:
                raise FormulaError("random-effects part must stand alone", self.cur.pos)
            if removing:
                raise FormulaError("cannot remove a random-effects part", self.cur.pos)
            random_parts.append(self.parse_random_part())
            return None
        return self.parse_product(intercept, random_parts)

    def _paren_is_random_part(self) -> bool:
        depth = 0
        for tok in self.tokens[self.i:]:
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
                if depth == 0:
                    return False
            elif tok.text == "|" and depth == 1:
                return True
            elif tok.kind == "end":
                break
        return False

    def parse_random_part(self) -> RandomPart:
        self.expect("(")
        intercept = [True]
        dummy_parts: list[RandomPart] = []
        tree = None
        if not self.at("|"):
            tree = self.parse_sum(intercept, dummy_parts, top=False)
        if dummy_parts:
            raise FormulaError("nested random-effects parts are not supported", self.cur.pos)
        self.expect("|")
        if self.cur.kind != "name":
            raise FormulaError("grouping factor must be a plain variable", self.cur.pos)
        group = self.advance().text
        self.expect(")")
        return RandomPart(terms=tree, group=group, intercept=intercept[0])

    def parse_product(self, intercept, random_parts):
        left = self.parse_interaction(intercept)
        while self.at("*"):
            self.advance()
            right = self.parse_interaction(intercept)
            left = FormulaOp("*", left, right)
        return left

    def parse_interaction(self, intercept):
        left = self.parse_power(intercept)
        while self.at(":"):
            self.advance()
            right = self.parse_power(intercept)
            left = FormulaOp(":", left, right)
        return left

    def parse_power(self, intercept):
        left = self.parse_factor(intercept)
        if self.at("^"):
            tok = self.advance()
            if self.cur.kind != "num":
                raise FormulaError("^ needs an integer power", self.cur.pos)
            num = self.advance()
            power = float(num.text)
            if power != int(power) or power < 1:
                raise FormulaError("^ power must be an integer >= 1", num.pos)
            left = FormulaOp("^", left, Literal(int(power)))
            _ = tok
        return left

    def parse_factor(self, intercept):
        tok = self.cur
        if tok.text == "(":
            self.advance()
            dummy_parts: list[RandomPart] = []
            inner = self.parse_sum(intercept, dummy_parts, top=False)
            if dummy_parts:
                raise FormulaError("random-effects part must stand alone", tok.pos)
            self.expect(")")
            if inner is None:
                raise FormulaError("empty parenthesised group", tok.pos)
            return inner
        if tok.kind == "name":
            self.advance()
            if self.at("("):
                return self.parse_call(tok)
            return Variable(tok.text)
        if tok.text == "|":
            raise FormulaError("'|' is only valid inside a (terms | group) part", tok.pos)
        raise FormulaError(f"unexpected token {tok.text!r}", tok.pos)

    def parse_call(self, name_tok: _Token) -> Func:
        name = name_tok.text
        if name == "Surv":
            raise FormulaError("Surv(...) is only valid as the response", name_tok.pos)
        if self.strict and name != "I" and name not in KNOWN_FUNCS:
            raise FormulaError(f"unknown function {name!r}", name_tok.pos)
        self.expect("(")
        args = [self.parse_arith()]
        while self.at(","):
            self.advance()
            args.append(self.parse_arith())
        self.expect(")")
        return Func(name, tuple(args))

    # -- arithmetic mode (inside I() and function arguments)

    def parse_arith(self):
        left = self.parse_arith_term()
        while self.cur.text in ("+", "-"):
            op = self.advance().text
            right = self.parse_arith_term()
            left = Arith(op, (left, right))
        return left

    def parse_arith_term(self):
        left = self.parse_arith_unary()
        while self.cur.text in ("*", "/"):
            op = self.advance().text
            right = self.parse_arith_unary()
            left = Arith(op, (left, right))
        return left

    def parse_arith_unary(self):
        if self.at("-"):
            self.advance()
            return Arith("neg", (self.parse_arith_unary(),))
        if self.at("+"):
            self.advance()
            return self.parse_arith_unary()
        return self.parse_arith_power()

    def parse_arith_power(self):
        base = self.parse_arith_primary()
        if self.at("^"):
            self.advance()
            exponent = self.parse_arith_unary()  # right-associative
            return Arith("^", (base, exponent))
        return base

    def parse_arith_primary(self):
        tok = self.cur
        if tok.text == "(":
            self.advance()
            inner = self.parse_arith()
            self.expect(")")
            return inner
        if tok.kind == "num":
            self.advance()
            return Literal(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.at("("):
                return self.parse_call(tok)
            return Variable(tok.text)
        raise FormulaError(f"unexpected token {tok.text!r} in arithmetic expression", tok.pos)


def parse_formula(text: str, one_sided_ok: bool = False, strict: bool = True) -> FormulaAst:
    """Parse a model formula into a :class:`FormulaAst`.

    ``one_sided_ok`` permits formulas without a response (used for auxiliary
    variable specifications such as ``~ x + I(z^2)``). ``strict`` rejects
    function names outside the supported whitelist.
    """
    if not text or not text.strip():
        raise FormulaError("empty formula", 0)
    return _Parser(text, strict=strict).parse(one_sided_ok=one_sided_ok)


# ---------------------------------------------------------------------------
# Term expansion


def _cross(a: Term, b: Term) -> Term:
    factors = list(a.factors)
    for f in b.factors:
        if f not in factors:
            factors.append(f)
    factors.sort(key=render_expr)
    return Term(tuple(factors))


def _expand_tree(node) -> list[Term]:
    if node is None:
        return []
    if isinstance(node, FormulaOp):
        if node.op == "+":
            left = _expand_tree(node.left)
            for t in _expand_tree(node.right):
                if t not in left:
                    left.append(t)
            return left
        if node.op == "-":
            left = _expand_tree(node.left)
            removed = _expand_tree(node.right)
            return [t for t in left if t not in removed]
        if node.op == ":":
            out: list[Term] = []
            for a in _expand_tree(node.left):
                for b in _expand_tree(node.right):
                    t = _cross(a, b)
                    if t not in out:
                        out.append(t)
            return out
        if node.op == "*":
            left = _expand_tree(node.left)
            right = _expand_tree(node.right)
            out = list(left)
            for t in right:
                if t not in out:
                    out.append(t)
            for a in left:
                for b in right:
                    t = _cross(a, b)
                    if t not in out:
                        out.append(t)
            return out
        if node.op == "^":
            base = _expand_tree(node.left)
            power = int(node.right.value)
            out = list(base)
            current = list(base)
            for _ in range(power - 1):
                nxt: list[Term] = []
                for a in current:
                    for b in base:
                        t = _cross(a, b)
                        if t not in nxt:
                            nxt.append(t)
                for t in nxt:
                    if t not in out:
                        out.append(t)
                current = nxt
            return out
        raise FormulaError(f"unsupported formula operator {node.op!r}")
    if isinstance(node, Literal):
        raise FormulaError("numeric literal cannot be a model term")
    # leaf factor: Variable, Func, or Arith
    return [Term((node,))]


def expand_terms(tree) -> list[Term]:
    """Expand a right-hand-side tree into an ordered list of unique terms.

    Main effects come first, in the order they appear in the formula,
    followed by interactions grouped by ascending degree.
    """
    raw = _expand_tree(tree)
    out: list[Term] = []
    for degree in sorted({t.degree for t in raw}):
        out.extend(t for t in raw if t.degree == degree)
    return out


def term_dependencies(obj) -> set[str]:
    """The set of data variable names an expression or term reads."""
    deps: set[str] = set()
    _collect_deps(obj, deps)
    return deps


def _collect_deps(obj, deps: set) -> None:
    if obj is None:
        return
    if isinstance(obj, Variable):
        deps.add(obj.name)
    elif isinstance(obj, Term):
        for f in obj.factors:
            _collect_deps(f, deps)
    elif isinstance(obj, (Func, Arith)):
        for a in obj.args:
            _collect_deps(a, deps)
    elif isinstance(obj, Comparison):
        deps.add(obj.var.name)
    elif isinstance(obj, SurvivalResponse):
        _collect_deps(obj.time, deps)
        _collect_deps(obj.event, deps)
    elif isinstance(obj, FormulaOp):
        _collect_deps(obj.left, deps)
        if not (obj.op == "^" and isinstance(obj.right, Literal)):
            _collect_deps(obj.right, deps)
    elif isinstance(obj, RandomPart):
        _collect_deps(obj.terms, deps)
        deps.add(obj.group)
    elif isinstance(obj, FormulaAst):
        _collect_deps(obj.response, deps)
        _collect_deps(obj.fixed, deps)
        for rp in obj.random_parts:
            _collect_deps(rp, deps)
    elif isinstance(obj, Literal):
        pass
    else:
        raise TypeError(f"cannot collect dependencies from {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Rendering

_ARITH_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _render_arith(expr, parent_prec: int = 0) -> str:
    if isinstance(expr, Variable):
        return expr.name
    if isinstance(expr, Literal):
        value = expr.value
        return repr(int(value)) if float(value).is_integer() else repr(value)
    if isinstance(expr, Func):
        inner = ", ".join(_render_arith(a) for a in expr.args)
        return f"{expr.name}({inner})"
    if isinstance(expr, Arith):
        prec = _ARITH_PREC[expr.op]
        if expr.op == "neg":
            body = f"-{_render_arith(expr.args[0], prec)}"
        else:
            sep = f" {expr.op} " if expr.op in ("+", "-") else expr.op
            # ^ is right-associative; give the left child a stricter context
            lp = prec + 1 if expr.op == "^" else prec
            rp = prec if expr.op == "^" else prec + 1
            body = sep.join(
                (_render_arith(expr.args[0], lp), _render_arith(expr.args[1], rp))
            )
        return f"({body})" if prec < parent_prec else body
    raise TypeError(f"cannot render {type(expr).__name__}")


def render_expr(expr) -> str:
    """Canonical text for a single term factor (used for column names)."""
    if isinstance(expr, (Variable, Literal, Func)):
        return _render_arith(expr)
    if isinstance(expr, Arith):
        # a bare arithmetic factor only arises inside I(); render unwrapped
        return _render_arith(expr)
    if isinstance(expr, Comparison):
        return _render_event(expr)
    if isinstance(expr, SurvivalResponse):
        return _render_response(expr)
    raise TypeError(f"cannot render {type(expr).__name__}")


_FORMULA_PREC = {"+": 1, "-": 1, "*": 2, ":": 3, "^": 4}


def _render_tree(node, parent_prec: int = 0) -> str:
    if isinstance(node, FormulaOp):
        prec = _FORMULA_PREC[node.op]
        sep = f" {node.op} " if node.op in ("+", "-") else node.op
        left = _render_tree(node.left, prec)
        right = (
            _render_arith(node.right)
            if node.op == "^"
            else _render_tree(node.right, prec + 1)
        )
        body = f"{left}{sep}{right}"
        return f"({body})" if prec < parent_prec else body
    return render_expr(node)


def render_formula(ast: FormulaAst) -> str:
    """Render a formula tree back to text that reparses identically."""
    parts = []
    if not ast.intercept:
        parts.append("0")
    if ast.fixed is not None:
        parts.append(_render_tree(ast.fixed, 1))
    for rp in ast.random_parts:
        inner = []
        if not rp.intercept:
            inner.append("0")
        if rp.terms is not None:
            inner.append(_render_tree(rp.terms, 1))
        if not inner:
            inner.append("1")
        parts.append(f"({' + '.join(inner)} | {rp.group})")
    if not parts:
        parts.append("1")
    rhs = " + ".join(parts)
    if ast.response is None:
        return f"~ {rhs}"
    return f"{_render_response(ast.response)} ~ {rhs}"


def _render_response(resp) -> str:
    if isinstance(resp, SurvivalResponse):
        return f"Surv({_render_arith(resp.time)}, {_render_event(resp.event)})"
    return _render_arith(resp)


def _render_event(event) -> str:
    if isinstance(event, Comparison):
        value = f'"{event.value}"' if isinstance(event.value, str) else _render_arith(Literal(event.value))
        return f"{event.var.name} {event.op} {value}"
    return _render_arith(event)
