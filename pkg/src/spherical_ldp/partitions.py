"""Exact symmetric-function computations.

Kostka numbers and Schur polynomials go through Gelfand–Tsetlin patterns,
Littlewood–Richardson coefficients through lattice-word skew tableaux.
Everything is exact: Python integers and ``fractions.Fraction``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence


@dataclass(frozen=True)
class Partition:
    parts: tuple[int, ...]

    def __init__(self, parts: Sequence[int] = ()):
        p = [int(x) for x in parts]
        if any(x < 0 for x in p):
            raise ValueError("partition parts must be nonnegative")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValueError(f"partition parts must be weakly decreasing: {p}")
        while p and p[-1] == 0:
            p.pop()
        object.__setattr__(self, "parts", tuple(p))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        text = text.strip()
        if not text:
            return cls(())
        return cls([int(x) for x in text.split(",")])

    @property
    def size(self) -> int:
        return sum(self.parts)

    def __len__(self):
        return len(self.parts)

    def padded(self, n: int) -> tuple[int, ...]:
        if len(self.parts) > n:
            raise ValueError(f"partition has more than {n} parts")
        return self.parts + (0,) * (n - len(self.parts))

    def __str__(self):
        return ",".join(map(str, self.parts)) or "∅"


def _as_partition(x) -> Partition:
    return x if isinstance(x, Partition) else Partition(x)


def partitions(n: int, max_part: int | None = None, max_len: int | None = None) -> Iterator[Partition]:
    """All partitions of n in reverse lexicographic order."""
    def rec(rem, cap, length):
        if rem == 0:
            yield ()
            return
        if max_len is not None and length >= max_len:
            return
        for first in range(min(rem, cap), 0, -1):
            for rest in rec(rem - first, first, length + 1):
                yield (first,) + rest
    cap = n if max_part is None else max_part
    for p in rec(n, cap, 0):
        yield Partition(p)


def dominance(lam, eta) -> bool:
    lam, eta = _as_partition(lam), _as_partition(eta)
    if lam.size != eta.size:
        return False
    n = max(len(lam), len(eta))
    a, b = lam.padded(n), eta.padded(n)
    sa = sb = 0
    for i in range(n):
        sa += a[i]
        sb += b[i]
        if sa < sb:
            return False
    return True


# Gelfand–Tsetlin machinery ------------------------------------------------------


def _interlacing_rows(row: tuple[int, ...], total: int) -> Iterator[tuple[int, ...]]:
    """Rows r of length len(row)-1 with row[i] >= r[i] >= row[i+1] and sum(r) = total."""
    k = len(row) - 1
    if k == 0:
        if total == 0:
            yield ()
        return
    lo_suffix = [0] * (k + 1)
    hi_suffix = [0] * (k + 1)
    for i in range(k - 1, -1, -1):
        lo_suffix[i] = lo_suffix[i + 1] + row[i + 1]
        hi_suffix[i] = hi_suffix[i + 1] + row[i]

    def rec(i, rem, prefix):
        if i == k:
            if rem == 0:
                yield tuple(prefix)
            return
        lo = max(row[i + 1], rem - hi_suffix[i + 1])
        hi = min(row[i], rem - lo_suffix[i + 1])
        for v in range(lo, hi + 1):
            prefix.append(v)
            yield from rec(i + 1, rem - v, prefix)
            prefix.pop()

    yield from rec(0, total, [])


def kostka(lam, eta: Sequence[int]) -> int:
    """Number of semistandard tableaux of shape lam and content eta (any composition)."""
    lam = _as_partition(lam)
    content = [int(x) for x in (eta.parts if isinstance(eta, Partition) else eta)]
    if any(c < 0 for c in content):
        raise ValueError("content must be nonnegative")
    if lam.size != sum(content):
        return 0
    n = len(content)
    if len(lam) > n:
        return 0
    if n == 0:
        return 1
    partial = [0]
    for c in content:
        partial.append(partial[-1] + c)

    @lru_cache(maxsize=None)
    def count(row: tuple[int, ...]) -> int:
        k = len(row)
        if k == 1:
            return 1
        return sum(count(r) for r in _interlacing_rows(row, partial[k - 1]))

    return count(lam.padded(n))


def lr_coefficient(lam, eta, kappa) -> int:
    """c^κ_{λη}: LR fillings of κ/λ with content η whose reverse reading word is a lattice word."""
    lam, eta, kappa = _as_partition(lam), _as_partition(eta), _as_partition(kappa)
    if kappa.size != lam.size + eta.size:
        return 0
    rows = len(kappa)
    lp = lam.padded(max(rows, len(lam)))
    if len(lam) > rows or any(lp[i] > kappa.parts[i] for i in range(rows)):
        return 0
    if eta.size == 0:
        return 1
    cells = [(i, j) for i in range(rows) for j in range(kappa.parts[i] - 1, lp[i] - 1, -1)]
    filling: dict[tuple[int, int], int] = {}
    need = list(eta.parts)
    used = [0] * len(need)

    def rec(idx):
        if idx == len(cells):
            return 1
        i, j = cells[idx]
        hi = len(need)
        right = filling.get((i, j + 1))
        if right is not None:
            hi = min(hi, right)
        above = filling.get((i - 1, j)) if i > 0 and j >= lp[i - 1] else None
        lo = 1 if above is None else above + 1
        total = 0
        for v in range(lo, hi + 1):
            k = v - 1
            if used[k] >= need[k]:
                continue
            if k > 0 and used[k] + 1 > used[k - 1]:
                continue
            used[k] += 1
            filling[(i, j)] = v
            total += rec(idx + 1)
            del filling[(i, j)]
            used[k] -= 1
        return total

    return rec(0)


# evaluation -----------------------------------------------------------------------


def det_generic(mat: list[list]):
    """Determinant by Gaussian elimination with nonzero pivoting; exact for Fractions."""
    a = [list(r) for r in mat]
    n = len(a)
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return a[0][0] * 0 if n else 1
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        p = a[c][c]
        det = det * p
        for r in range(c + 1, n):
            f = a[r][c] / p
            if f != 0:
                row_r, row_c = a[r], a[c]
                for k in range(c, n):
                    row_r[k] = row_r[k] - f * row_c[k]
    return det


def _exact(points):
    return [x if isinstance(x, Fraction) else Fraction(x) for x in points]


def schur_bialternant(lam, points: Sequence) -> Fraction:
    """det[x_i^{λ_j+N-j}] / det[x_i^{N-j}]."""
    lam = _as_partition(lam)
    x = _exact(points)
    n = len(x)
    if len(set(x)) != n:
        raise ValueError("degenerate alternant")
    if len(lam) > n:
        return Fraction(0)
    lp = lam.padded(n)
    num = det_generic([[xi ** (lp[j] + n - 1 - j) for j in range(n)] for xi in x])
    den = Fraction(1)
    for i in range(n):
        for j in range(i + 1, n):
            den *= x[i] - x[j]
    return Fraction(num) / den


def schur_combinatorial(lam, points: Sequence) -> Fraction:
    """Sum over Gelfand–Tsetlin patterns with top row λ of the monomial weight."""
    lam = _as_partition(lam)
    x = _exact(points)
    n = len(x)
    if len(lam) > n:
        return Fraction(0)
    if n == 0:
        return Fraction(1)

    @lru_cache(maxsize=None)
    def f(row: tuple[int, ...]) -> Fraction:
        k = len(row)
        s = sum(row)
        if k == 1:
            return x[0] ** s
        total = Fraction(0)
        lo = sum(row[1:])
        hi = sum(row[:-1])
        for t in range(lo, hi + 1):
            weight = x[k - 1] ** (s - t)
            sub = sum((f(r) for r in _interlacing_rows(row, t)), Fraction(0))
            total += weight * sub
        return total

    return f(lam.padded(n))


def distinct_permutations(items: Sequence[int]) -> Iterator[tuple[int, ...]]:
    counts: dict[int, int] = {}
    for v in items:
        counts[v] = counts.get(v, 0) + 1
    keys = sorted(counts)
    n = len(items)
    out: list[int] = []

    def rec():
        if len(out) == n:
            yield tuple(out)
            return
        for k in keys:
            if counts[k]:
                counts[k] -= 1
                out.append(k)
                yield from rec()
                out.pop()
                counts[k] += 1

    yield from rec()


def monomial_eval(eta, points: Sequence):
    """m_η(x): sum over distinct rearrangements of η (padded with zeros) of ∏ x_i^{e_i}."""
    eta = _as_partition(eta)
    n = len(points)
    if len(eta) > n:
        return 0 * points[0] if n else 0
    total = None
    for perm in distinct_permutations(eta.padded(n)):
        term = 1
        for xi, e in zip(points, perm):
            term = term * xi ** e
        total = term if total is None else total + term
    return total if total is not None else 1


@dataclass
class MonomialBracket:
    value: float
    lower: float
    upper: float
    inside: bool


def monomial_bracket(eta, y: Sequence[float]) -> MonomialBracket:
    """Evaluate m_η(e^y) in log scale with the bracket e^{Σ η_i y_i} ≤ m_η ≤ N!·e^{Σ η_i y_i} (y sorted decreasing)."""
    eta = _as_partition(eta)
    ys = sorted((float(v) for v in y), reverse=True)
    n = len(ys)
    ep = eta.padded(n)
    lead = sum(e * v for e, v in zip(ep, ys))
    terms = [sum(e * v for e, v in zip(perm, ys)) for perm in distinct_permutations(ep)]
    mx = max(terms)
    log_value = mx + math.log(sum(math.exp(t - mx) for t in terms))
    lower, upper = lead, lead + math.lgamma(n + 1)
    inside = lower - 1e-12 * max(1.0, abs(lower)) <= log_value <= upper + 1e-12 * max(1.0, abs(upper))
    if not inside:
        raise AssertionError("monomial value outside its exponential bracket")
    return MonomialBracket(log_value, lower, upper, inside)


def ssyt_bruteforce(lam, content: Sequence[int]) -> int:
    """Direct enumeration of semistandard tableaux; an oracle for small shapes."""
    lam = _as_partition(lam)
    n = len(content)
    if lam.size != sum(content) or len(lam) > n:
        return 0
    cells = [(i, j) for i in range(len(lam)) for j in range(lam.parts[i])]
    t: dict[tuple[int, int], int] = {}
    left = list(content)

    def rec(idx):
        if idx == len(cells):
            return 1
        i, j = cells[idx]
        lo = 1
        if j > 0:
            lo = max(lo, t[(i, j - 1)])
        if i > 0:
            lo = max(lo, t[(i - 1, j)] + 1)
        c = 0
        for v in range(lo, n + 1):
            if left[v - 1]:
                left[v - 1] -= 1
                t[(i, j)] = v
                c += rec(idx + 1)
                left[v - 1] += 1
        t.pop((i, j), None)
        return c

    return rec(0)
