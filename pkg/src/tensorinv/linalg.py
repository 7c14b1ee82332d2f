"""Exact sparse linear algebra over Q(sqrt(d)).

Rows are dictionaries ``{column: scalar}``.  Elimination is fraction-free:
each row is scaled into Z[sqrt(d)], reduced with ``p*row - c*pivot`` and then
divided by the integer content of its entries, so coefficients stay small and
no rational arithmetic happens inside the hot loop.  Independent column blocks
(connected components of the row/column incidence graph) are reduced
separately; the Lie-derivative systems split into many small blocks.

Pivoting is lexicographic (lowest column first), which makes the reduced row
echelon form, and hence the nullspace basis, deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Hashable, Iterable, Mapping, Sequence

from .funcalg import FieldScalar, field_scalar, scalar_d


# Ring elements of Z[sqrt(d)] are (a, b) int pairs; plain ints when d is None.

def _common_d(rows: Iterable[Mapping]) -> Fraction | None:
    d = None
    for row in rows:
        for c in row.values():
            cd = scalar_d(c)
            if cd is not None:
                d = FieldScalar._joint_d(d, cd)
    return d


def _row_to_ring(row: Mapping, quad: bool) -> dict:
    den = 1
    for c in row.values():
        if isinstance(c, FieldScalar):
            den = lcm(den, c.rat.denominator, c.surd.denominator)
        else:
            den = lcm(den, Fraction(c).denominator)
    out = {}
    for j, c in row.items():
        if isinstance(c, FieldScalar):
            a, b = c.rat * den, c.surd * den
            out[j] = (int(a), int(b))
        else:
            v = int(Fraction(c) * den)
            out[j] = (v, 0) if quad else v
    return out


class _IntOps:
    zero = 0

    @staticmethod
    def mul(x, y):
        return x * y

    @staticmethod
    def content(row):
        g = 0
        for v in row.values():
            g = gcd(g, v)
            if g == 1:
                return 1
        return g

    @staticmethod
    def div_int(x, g):
        return x // g

    @staticmethod
    def neg(x):
        return -x

    @staticmethod
    def lead_sign(x):
        return x < 0


class _QuadOps:
    zero = (0, 0)

    def __init__(self, d: int):
        self.d = d

    def mul(self, x, y):
        return (x[0] * y[0] + self.d * x[1] * y[1], x[0] * y[1] + x[1] * y[0])

    @staticmethod
    def content(row):
        g = 0
        for a, b in row.values():
            g = gcd(gcd(g, a), b)
            if g == 1:
                return 1
        return g

    @staticmethod
    def div_int(x, g):
        return (x[0] // g, x[1] // g)

    @staticmethod
    def neg(x):
        return (-x[0], -x[1])

    @staticmethod
    def lead_sign(x):
        return x[0] < 0 or (x[0] == 0 and x[1] < 0)


def _is_zero(v) -> bool:
    return v == 0 or v == (0, 0)


def _combine(ops, row: dict, pivot: dict, col) -> dict:
    """Return p*row - c*pivot with p = pivot[col], c = row[col]; entry col vanishes."""
    p = pivot[col]
    c = row[col]
    out = {}
    mul = ops.mul
    for j, v in row.items():
        if j == col:
            continue
        out[j] = mul(p, v)
    for j, v in pivot.items():
        if j == col:
            continue
        w = mul(c, v)
        cur = out.get(j)
        if cur is None:
            out[j] = ops.neg(w)
        else:
            if isinstance(cur, tuple):
                nv = (cur[0] - w[0], cur[1] - w[1])
            else:
                nv = cur - w
            out[j] = nv
    return {j: v for j, v in out.items() if not _is_zero(v)}


def _primitive(ops, row: dict) -> dict:
    if not row:
        return row
    g = ops.content(row)
    lead = row[min(row)]
    if ops.lead_sign(lead):
        g = -g
    if g != 1:
        row = {j: ops.div_int(v, g) for j, v in row.items()}
    return row


def _components(rows: Sequence[dict], ncols: int) -> list[tuple[list[int], list[int]]]:
    parent = list(range(ncols))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for row in rows:
        cols = list(row)
        if not cols:
            continue
        root = find(cols[0])
        for j in cols[1:]:
            rj = find(j)
            if rj != root:
                parent[rj] = root
    col_groups: dict[int, list[int]] = {}
    for j in range(ncols):
        col_groups.setdefault(find(j), []).append(j)
    row_groups: dict[int, list[int]] = {}
    for i, row in enumerate(rows):
        if row:
            row_groups.setdefault(find(next(iter(row))), []).append(i)
    return [(cols, row_groups.get(root, [])) for root, cols in sorted(col_groups.items())]


def _echelon(ops, rows: Iterable[dict]) -> dict:
    """Incremental fraction-free echelon form: {pivot column: row}."""
    pivots: dict = {}
    for row in rows:
        row = dict(row)
        while row:
            col = min(row)
            piv = pivots.get(col)
            if piv is None:
                pivots[col] = _primitive(ops, row)
                break
            row = _primitive(ops, _combine(ops, row, piv, col))
    return pivots


def _reduce_back(ops, pivots: dict) -> dict:
    """Clear entries above each pivot (reduced echelon form, fraction-free)."""
    cols = sorted(pivots)
    for idx in range(len(cols) - 1, -1, -1):
        col = cols[idx]
        piv = pivots[col]
        for other in cols[:idx]:
            row = pivots[other]
            if col in row:
                pivots[other] = _primitive(ops, _combine(ops, row, piv, col))
    return pivots


def _ring_to_scalar(v, d):
    if isinstance(v, tuple):
        return field_scalar(v[0], v[1], d)
    return Fraction(v)


def _div(a, b):
    if isinstance(b, FieldScalar):
        return a * b.inverse()
    if isinstance(a, FieldScalar):
        return a / b
    return Fraction(a) / b


@dataclass
class EliminationResult:
    """Reduced row echelon data of a homogeneous system."""

    ncols: int
    nrows: int
    rank: int
    pivot_rows: dict  # pivot column -> {column: scalar}, pivot entry normalized to 1
    discriminant: Fraction | None = None
    blocks: int = 0

    @property
    def free_columns(self) -> list[int]:
        return [j for j in range(self.ncols) if j not in self.pivot_rows]

    def nullspace(self) -> list[dict]:
        """Basis of the kernel, one vector per free column, in primitive integer form."""
        basis = []
        by_free: dict[int, list[tuple[int, object]]] = {}
        for pc, row in self.pivot_rows.items():
            for j, v in row.items():
                if j != pc:
                    by_free.setdefault(j, []).append((pc, v))
        for f in self.free_columns:
            vec = {f: Fraction(1)}
            for pc, v in by_free.get(f, []):
                vec[pc] = -v
            basis.append(primitive_vector(vec))
        return basis


def reduce_rows(rows: Sequence[Mapping], ncols: int) -> EliminationResult:
    """Fraction-free reduction of ``rows`` (each ``{column: scalar}``)."""
    rows = [{j: c for j, c in row.items() if c != 0} for row in rows]
    d = _common_d(rows)
    quad = d is not None
    if quad and d.denominator != 1:
        raise ValueError("discriminant must be an integer")
    ops = _QuadOps(int(d)) if quad else _IntOps()
    ring_rows = [_row_to_ring(row, quad) for row in rows]
    pivot_rows: dict = {}
    blocks = 0
    for cols, rids in _components(ring_rows, ncols):
        if not rids:
            continue
        blocks += 1
        piv = _reduce_back(ops, _echelon(ops, (ring_rows[i] for i in rids)))
        for pc, row in piv.items():
            lead = _ring_to_scalar(row[pc], d)
            pivot_rows[pc] = {j: _div(_ring_to_scalar(v, d), lead) for j, v in row.items()}
    return EliminationResult(ncols=ncols, nrows=len(rows), rank=len(pivot_rows),
                             pivot_rows=pivot_rows, discriminant=d, blocks=blocks)


def primitive_vector(vec: Mapping[int, object]) -> dict:
    """Scale so the first nonzero entry is a positive rational and all parts are coprime integers."""
    vec = {j: c for j, c in vec.items() if c != 0}
    if not vec:
        return {}
    first = vec[min(vec)]
    vec = {j: _div(c, first) for j, c in vec.items()}
    den = 1
    for c in vec.values():
        if isinstance(c, FieldScalar):
            den = lcm(den, c.rat.denominator, c.surd.denominator)
        else:
            den = lcm(den, c.denominator)
    g = 0
    for c in vec.values():
        c = c * den
        if isinstance(c, FieldScalar):
            g = gcd(gcd(g, int(c.rat)), int(c.surd))
        else:
            g = gcd(g, int(c))
    return {j: c * Fraction(den, g) for j, c in vec.items()}


def nullspace(rows: Sequence[Mapping], ncols: int) -> list[dict]:
    return reduce_rows(rows, ncols).nullspace()


def rank_of_vectors(vectors: Sequence[Mapping[Hashable, object]]) -> int:
    """Rank of a family of sparse vectors keyed by arbitrary hashable labels."""
    index: dict = {}
    rows = []
    for v in vectors:
        rows.append({index.setdefault(k, len(index)): c for k, c in v.items()})
    return reduce_rows(rows, len(index)).rank


def independent_subset(vectors: Sequence[Mapping[Hashable, object]]) -> list[int]:
    """Indices of a maximal independent subfamily, chosen greedily in order."""
    index: dict = {}
    kept: list[int] = []
    current: list[dict] = []
    rank = 0
    for i, v in enumerate(vectors):
        row = {index.setdefault(k, len(index)): c for k, c in v.items()}
        trial = reduce_rows(current + [row], len(index)).rank
        if trial > rank:
            kept.append(i)
            current.append(row)
            rank = trial
    return kept


def solve_combination(columns: Sequence[Mapping[Hashable, object]],
                      target: Mapping[Hashable, object]) -> list | None:
    """Find exact ``c`` with ``sum_j c_j * columns[j] == target``; None if inconsistent.

    Free parameters (when the columns are dependent) are set to zero.
    """
    n = len(columns)
    by_label: dict = {}
    for j, col in enumerate(columns):
        for k, c in col.items():
            by_label.setdefault(k, {})[j] = c
    for k, c in target.items():
        by_label.setdefault(k, {})[n] = -c
    res = reduce_rows(list(by_label.values()), n + 1)
    if n in res.pivot_rows:
        return None
    sol: list = [Fraction(0)] * n
    for pc, row in res.pivot_rows.items():
        sol[pc] = -row.get(n, Fraction(0))
    return sol
