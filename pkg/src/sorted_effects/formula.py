"""Model formulas: parsing, term expansion and design matrices.

Formulas use Wilkinson notation restricted to ``+`` (sum), ``*``
(crossing), ``:`` (interaction), parenthesised grouping and ``I(...)``
arithmetic transforms::

    y ~ a + b            two main effects
    y ~ a*b              a + b + a:b
    y ~ a + I(a^2)       polynomial in a

``*`` distributes over parenthesised sums, ``:`` binds tighter than
``*``, and ``*`` tighter than ``+``.  Duplicate terms are dropped with
the first occurrence winning, so term order is deterministic left to
right.  The intercept is always included.

Factors enter the design with treatment coding: a factor with ``L``
declared levels contributes ``L - 1`` indicator columns, the reference
level being the first level observed in the data.  Interaction blocks
are elementwise products of the component blocks.
"""

from __future__ import annotations

import ast as _pyast
import functools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import FACTOR, NUMERIC, Dataset, Column

__all__ = [
    "FormulaError",
    "DesignError",
    "Term",
    "Formula",
    "parse_formula",
    "expand_terms",
    "build_design",
    "encode_design",
    "set_variable",
    "DesignInfo",
    "DesignMatrix",
]

INTERCEPT = "intercept"


class FormulaError(ValueError):
    """Syntax error in a formula; message carries the byte offset."""


class DesignError(ValueError):
    """A formula cannot be realised against a concrete dataset."""


# ----------------------------------------------------------------------
# tokenizer
# ----------------------------------------------------------------------

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_.")
_IDENT_CONT = _IDENT_START | set("0123456789")


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT IEXPR + * : ( ) ~ END
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    toks: list[_Token] = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+*:()~":
            toks.append(_Token(ch, ch, i))
            i += 1
            continue
        if ch in _IDENT_START:
            j = i + 1
            while j < n and src[j] in _IDENT_CONT:
                j += 1
            word = src[i:j]
            if word == "I" and j < n and src[j] == "(":
                depth, k = 1, j + 1
                while k < n and depth:
                    if src[k] == "(":
                        depth += 1
                    elif src[k] == ")":
                        depth -= 1
                    k += 1
                if depth:
                    raise FormulaError(
                        f"unbalanced parenthesis in I(...) at offset {i}"
                    )
                toks.append(_Token("IEXPR", src[j + 1 : k - 1], i))
                i = k
                continue
            toks.append(_Token("IDENT", word, i))
            i = j
            continue
        if ch in "-/^":
            raise FormulaError(
                f"operator {ch!r} at offset {i} is only supported inside I(...)"
            )
        raise FormulaError(f"unexpected character {ch!r} at offset {i}")
    toks.append(_Token("END", "", n))
    return toks


# ----------------------------------------------------------------------
# I(...) arithmetic transforms
# ----------------------------------------------------------------------

_ALLOWED_BINOPS = (_pyast.Add, _pyast.Sub, _pyast.Mult, _pyast.Div, _pyast.Pow)


def _validate_arith(node: _pyast.AST, text: str) -> None:
    if isinstance(node, _pyast.Expression):
        _validate_arith(node.body, text)
    elif isinstance(node, _pyast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise FormulaError(f"unsupported operator in I({text})")
        _validate_arith(node.left, text)
        _validate_arith(node.right, text)
    elif isinstance(node, _pyast.UnaryOp):
        if not isinstance(node.op, (_pyast.USub, _pyast.UAdd)):
            raise FormulaError(f"unsupported operator in I({text})")
        _validate_arith(node.operand, text)
    elif isinstance(node, _pyast.Name):
        pass
    elif isinstance(node, _pyast.Constant):
        if not isinstance(node.value, (int, float)):
            raise FormulaError(f"non-numeric constant in I({text})")
    elif isinstance(node, _pyast.Call):
        raise FormulaError(f"function calls are not allowed in I({text})")
    else:
        raise FormulaError(f"unsupported expression in I({text})")


@functools.lru_cache(maxsize=None)
def _parse_arith(text: str) -> tuple[str, object]:
    """Parse an I(...) body; returns (canonical text, compiled code)."""
    try:
        tree = _pyast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise FormulaError(f"cannot parse I({text}): {exc.msg}") from None
    _validate_arith(tree, text)
    canonical = _pyast.unparse(tree).replace("**", "^").replace(" ", "")
    code = compile(tree, "<I-expression>", "eval")
    return canonical, code


def _arith_names(text: str) -> list[str]:
    tree = _pyast.parse(text.replace("^", "**"), mode="eval")
    return sorted({n.id for n in _pyast.walk(tree) if isinstance(n, _pyast.Name)})


def _eval_arith(text: str, data: Dataset) -> np.ndarray:
    _, code = _parse_arith(text)
    env = {}
    for name in _arith_names(text):
        if name not in data:
            raise DesignError(f"I({text}) references unknown column {name!r}")
        if data.kind(name) != NUMERIC:
            raise DesignError(f"I({text}) references non-numeric column {name!r}")
        env[name] = data.numeric(name)
    with np.errstate(all="ignore"):
        out = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - whitelisted AST
    return np.broadcast_to(np.asarray(out, dtype=float), (data.n_rows,)).copy()


# ----------------------------------------------------------------------
# AST and parser
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class _Name:
    name: str


@dataclass(frozen=True)
class _Transform:
    canonical: str  # canonical I(...) body


@dataclass(frozen=True)
class _Op:
    op: str  # '+', '*', ':'
    left: object
    right: object


class _Parser:
    def __init__(self, toks: list[_Token]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Token:
        return self.toks[self.i]

    def next(self) -> _Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise FormulaError(
                f"expected {kind!r} but found {tok.text or 'end of input'!r}"
                f" at offset {tok.pos}"
            )
        return tok

    # expr := term ('+' term)*
    def expr(self):
        node = self.cross()
        while self.peek().kind == "+":
            self.next()
            node = _Op("+", node, self.cross())
        return node

    # cross := inter ('*' inter)*
    def cross(self):
        node = self.inter()
        while self.peek().kind == "*":
            self.next()
            node = _Op("*", node, self.inter())
        return node

    # inter := atom (':' atom)*
    def inter(self):
        node = self.atom()
        while self.peek().kind == ":":
            self.next()
            node = _Op(":", node, self.atom())
        return node

    def atom(self):
        tok = self.next()
        if tok.kind == "IDENT":
            return _Name(tok.text)
        if tok.kind == "IEXPR":
            canonical, _ = _parse_arith(tok.text)
            return _Transform(canonical)
        if tok.kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise FormulaError(
            f"expected a variable, I(...) or '(' but found"
            f" {tok.text or 'end of input'!r} at offset {tok.pos}"
        )


@dataclass(frozen=True)
class Term:
    """One model term: an ordered tuple of component labels.

    Components are variable names or canonical ``I(...)`` texts.  Two
    terms are equal when they contain the same component set, so ``a:b``
    and ``b:a`` coincide.
    """

    components: tuple[str, ...]

    @property
    def label(self) -> str:
        return ":".join(self.components)

    @property
    def key(self) -> frozenset:
        return frozenset(self.components)

    def __eq__(self, other):
        return isinstance(other, Term) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Term({self.label!r})"


@dataclass(frozen=True)
class Formula:
    """Parsed formula: a response name and a right-hand-side tree."""

    response: str
    rhs: object
    source: str = ""

    @property
    def terms(self) -> list[Term]:
        return expand_terms(self)

    def pretty(self) -> str:
        return f"{self.response} ~ {_pretty(self.rhs)}"


def parse_formula(text: str) -> Formula:
    """Parse ``response ~ terms`` into a :class:`Formula`.

    Raises
    ------
    FormulaError
        On syntax errors; the message includes the byte offset.
    """
    if "~" not in text:
        raise FormulaError("formula needs '~' separating response and terms")
    toks = _tokenize(text)
    parser = _Parser(toks)
    lhs = parser.next()
    if lhs.kind != "IDENT":
        raise FormulaError(
            f"response must be a single column name (offset {lhs.pos})"
        )
    parser.expect("~")
    if parser.peek().kind == "END":
        raise FormulaError("empty right-hand side")
    rhs = parser.expr()
    end = parser.next()
    if end.kind != "END":
        raise FormulaError(
            f"unexpected {end.text!r} at offset {end.pos}"
        )
    return Formula(lhs.text, rhs, text)


def _pretty(node) -> str:
    if isinstance(node, _Name):
        return node.name
    if isinstance(node, _Transform):
        return f"I({node.canonical})"
    assert isinstance(node, _Op)
    left, right = _pretty(node.left), _pretty(node.right)
    if node.op == "+":
        return f"{left} + {right}"
    if node.op == "*":
        left = f"({left})" if _prec(node.left) < 2 else left
        right = f"({right})" if _prec(node.right) < 2 else right
        return f"{left}*{right}"
    left = f"({left})" if _prec(node.left) < 3 else left
    right = f"({right})" if _prec(node.right) < 3 else right
    return f"{left}:{right}"


def _prec(node) -> int:
    if isinstance(node, (_Name, _Transform)):
        return 4
    return {"+": 1, "*": 2, ":": 3}[node.op]


# ----------------------------------------------------------------------
# term expansion
# ----------------------------------------------------------------------


def _merge(a: Term, b: Term) -> Term:
    comps = list(a.components)
    for c in b.components:
        if c not in comps:
            comps.append(c)
    return Term(tuple(comps))


def _expand(node) -> list[Term]:
    if isinstance(node, _Name):
        return [Term((node.name,))]
    if isinstance(node, _Transform):
        return [Term((f"I({node.canonical})",))]
    assert isinstance(node, _Op)
    left, right = _expand(node.left), _expand(node.right)
    if node.op == "+":
        return left + right
    if node.op == ":":
        return [_merge(a, b) for a in left for b in right]
    # crossing: mains first, then all pairwise interactions
    return left + right + [_merge(a, b) for a in left for b in right]


def expand_terms(formula: Formula | str) -> list[Term]:
    """Expand a formula into its ordered, duplicate-free term list.

    The intercept is implicit and not part of the list.
    """
    if isinstance(formula, str):
        formula = parse_formula(formula)
    out: list[Term] = []
    seen: set[frozenset] = set()
    for term in _expand(formula.rhs):
        if term.key not in seen:
            seen.add(term.key)
            out.append(term)
    return out


# ----------------------------------------------------------------------
# design matrices
# ----------------------------------------------------------------------

# a column recipe is a tuple of primitives whose arrays are multiplied
# elementwise; the empty recipe is the intercept.
#   ("num", var)          numeric column
#   ("ind", var, level)   factor level indicator
#   ("lit", text)         canonical I(...) body


@dataclass(frozen=True)
class DesignInfo:
    """Everything needed to rebuild a design on new data."""

    response: str
    term_labels: tuple[str, ...]
    column_names: tuple[str, ...]  # kept columns, in order
    recipes: tuple[tuple, ...]  # kept column recipes, in order
    factor_levels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    dropped: tuple[str, ...] = ()

    @property
    def n_columns(self) -> int:
        return len(self.column_names)


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray  # (n, p) float64
    info: DesignInfo

    @property
    def shape(self):
        return self.matrix.shape


def _component_block(comp: str, data: Dataset, levels: dict) -> list[tuple[str, tuple]]:
    """Column (name, primitive) pairs contributed by one term component."""
    if comp.startswith("I(") and comp.endswith(")"):
        text = comp[2:-1]
        canonical, _ = _parse_arith(text)
        return [(f"I({canonical})", ("lit", canonical))]
    if comp not in data:
        raise DesignError(f"formula references unknown column {comp!r}")
    if data.kind(comp) == FACTOR:
        lv = data.levels(comp)
        if len(lv) < 2:
            raise DesignError(
                f"factor {comp!r} has a single level {lv[0]!r};"
                " it cannot enter the design"
            )
        levels[comp] = lv
        return [(f"{comp}_{l}", ("ind", comp, l)) for l in lv[1:]]
    return [(comp, ("num", comp))]


def _primitive_array(prim: tuple, data: Dataset) -> np.ndarray:
    tag = prim[0]
    if tag == "num":
        return data.numeric(prim[1])
    if tag == "ind":
        _, var, level = prim
        lv = data.levels(var)
        if level not in lv:
            raise DesignError(
                f"level {level!r} of factor {var!r} missing from data"
            )
        return (data.codes(var) == lv.index(level)).astype(float)
    return _eval_arith(prim[1], data)


def _recipe_column(recipe: tuple, data: Dataset) -> np.ndarray:
    col = np.ones(data.n_rows)
    for prim in recipe:
        col = col * _primitive_array(prim, data)
    return col


def build_design(
    formula: Formula | str,
    data: Dataset,
    drop_aliased: bool = False,
) -> DesignMatrix:
    """Build the model design matrix for `formula` on `data`.

    Parameters
    ----------
    formula : Formula or str
        Parsed formula or its text.
    data : Dataset
        Supplies columns and factor level lists.
    drop_aliased : bool
        When True, linearly dependent columns are dropped with a warning
        (first occurrence wins); when False they raise :class:`DesignError`.

    Returns
    -------
    DesignMatrix
        Full-column-rank matrix with intercept first, plus the
        :class:`DesignInfo` needed to encode new data consistently.
    """
    if isinstance(formula, str):
        formula = parse_formula(formula)
    if formula.response not in data:
        raise DesignError(f"response column {formula.response!r} not in data")
    if data.kind(formula.response) != NUMERIC:
        raise DesignError(f"response column {formula.response!r} must be numeric")

    terms = expand_terms(formula)
    levels: dict[str, tuple[str, ...]] = {}
    names: list[str] = [INTERCEPT]
    recipes: list[tuple] = [()]
    term_of: list[int] = [-1]
    for t_idx, term in enumerate(terms):
        blocks = [_component_block(c, data, levels) for c in term.components]
        shape = [len(b) for b in blocks]
        # product over component blocks, last component varying fastest
        for flat in range(int(np.prod(shape))):
            idx, rem = [], flat
            for s in reversed(shape):
                idx.append(rem % s)
                rem //= s
            idx.reverse()
            parts = [blocks[k][idx[k]] for k in range(len(blocks))]
            names.append(":".join(p[0] for p in parts))
            recipes.append(tuple(p[1] for p in parts))
            term_of.append(t_idx)

    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise DesignError(f"duplicate design columns {sorted(dup)!r}")

    cols = [_recipe_column(r, data) for r in recipes]
    X = np.column_stack(cols) if cols else np.ones((data.n_rows, 1))
    bad = ~np.isfinite(X)
    if bad.any():
        j = int(np.argwhere(bad.any(axis=0))[0])
        raise DesignError(f"design column {names[j]!r} has non-finite entries")

    keep = _independent_columns(X)
    dropped = tuple(names[j] for j in range(X.shape[1]) if j not in keep)
    if dropped:
        if not drop_aliased:
            raise DesignError(
                f"aliased (linearly dependent) design columns: {list(dropped)};"
                " re-run with drop_aliased=True to drop them"
            )
        warnings.warn(
            f"dropping aliased design columns: {list(dropped)}", stacklevel=2
        )

    info = DesignInfo(
        response=formula.response,
        term_labels=tuple(t.label for t in terms),
        column_names=tuple(names[j] for j in keep),
        recipes=tuple(recipes[j] for j in keep),
        factor_levels=levels,
        dropped=dropped,
    )
    return DesignMatrix(X[:, keep], info)


def _independent_columns(X: np.ndarray, rtol: float = 1e-9) -> list[int]:
    """Greedy left-to-right selection of linearly independent columns."""
    n, p = X.shape
    Q = np.empty((n, 0))
    keep: list[int] = []
    for j in range(p):
        col = X[:, j]
        norm0 = np.linalg.norm(col)
        if norm0 == 0.0:
            continue
        # two rounds of Gram-Schmidt for numerical stability
        r = col - Q @ (Q.T @ col)
        r = r - Q @ (Q.T @ r)
        norm = np.linalg.norm(r)
        if norm > rtol * norm0:
            Q = np.column_stack([Q, r / norm])
            keep.append(j)
    return keep


def encode_design(info: DesignInfo, data: Dataset) -> np.ndarray:
    """Encode `data` into the column layout of an existing design.

    No rank validation happens here: counterfactual datasets (for example
    with a factor pinned to its reference level) legitimately produce
    degenerate columns.
    """
    cols = [_recipe_column(r, data) for r in info.recipes]
    X = np.column_stack(cols)
    if not np.all(np.isfinite(X)):
        raise DesignError("encoded design has non-finite entries")
    return X


def response_vector(info: DesignInfo, data: Dataset) -> np.ndarray:
    """The response column for a design, as float64."""
    return data.numeric(info.response)


# ----------------------------------------------------------------------
# counterfactual data
# ----------------------------------------------------------------------


def set_variable(data: Dataset, var: str, value) -> Dataset:
    """Copy `data` with column `var` replaced.

    For a numeric column `value` may be a scalar (every row set to it) or
    an array of per-row values — the latter supports numeric shifts like
    ``set_variable(d, "age", d.numeric("age") + h)``.  For a factor,
    `value` must be one of the declared levels; the level list is
    preserved so that contrast columns keep their layout.
    """
    col = data.column(var)
    if col.kind == FACTOR:
        if not isinstance(value, str):
            raise DesignError(
                f"factor {var!r} must be set to a level label, got {value!r}"
            )
        if value not in col.levels:
            raise DesignError(
                f"{value!r} is not a level of {var!r}; levels are {list(col.levels)}"
            )
        codes = np.full(data.n_rows, col.levels.index(value), dtype=np.int64)
        return data.with_column(var, Column(FACTOR, codes, col.levels))
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(data.n_rows, float(arr))
    elif arr.shape != (data.n_rows,):
        raise DesignError(
            f"replacement for {var!r} has shape {arr.shape}, expected"
            f" scalar or ({data.n_rows},)"
        )
    if not np.all(np.isfinite(arr)):
        raise DesignError(f"replacement for {var!r} has non-finite entries")
    return data.with_column(var, Column(NUMERIC, arr))
