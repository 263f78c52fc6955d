"""Exact rational feasibility LP (phase-one simplex with Bland's rule).

Only feasibility is needed: the search asks whether some belief makes an
action a best response, which is a small system of linear inequalities.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Row = tuple[Sequence, str, object]  # (coefficients, "<=" | ">=" | "=", rhs)


def feasible_point(rows: Sequence[Row], n: int) -> list[Fraction] | None:
    """A point x >= 0 satisfying every row, or None if there is none."""
    norm = []
    for coeffs, sense, rhs in rows:
        a = [Fraction(v) for v in coeffs]
        b = Fraction(rhs)
        if b < 0:
            a = [-v for v in a]
            b = -b
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
        norm.append((a, sense, b))
    m = len(norm)
    n_slack = sum(1 for _, s, _ in norm if s != "=")
    n_art = sum(1 for _, s, _ in norm if s != "<=")
    width = n + n_slack + n_art
    tab: list[list[Fraction]] = []
    basis: list[int] = []
    slack = n
    art = n + n_slack
    artificial = set()
    for a, sense, b in norm:
        row = a + [Fraction(0)] * (n_slack + n_art) + [b]
        if sense == "<=":
            row[slack] = Fraction(1)
            basis.append(slack)
            slack += 1
        else:
            if sense == ">=":
                row[slack] = Fraction(-1)
                slack += 1
            row[art] = Fraction(1)
            basis.append(art)
            artificial.add(art)
            art += 1
        tab.append(row)
    # phase-one objective: minimize the sum of artificials
    obj = [Fraction(0)] * (width + 1)
    for i, bv in enumerate(basis):
        if bv in artificial:
            for c in range(width + 1):
                obj[c] -= tab[i][c]
    for c in artificial:
        obj[c] += 1
    while True:
        entering = next((c for c in range(width) if obj[c] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            if tab[i][entering] > 0:
                ratio = tab[i][-1] / tab[i][entering]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            break  # unbounded direction; cannot happen for phase one
        _pivot(tab, obj, best[1], entering)
        basis[best[1]] = entering
    if -obj[-1] != 0:
        return None
    x = [Fraction(0)] * width
    for i, bv in enumerate(basis):
        x[bv] = tab[i][-1]
    return x[:n]


def _pivot(tab: list[list[Fraction]], obj: list[Fraction], r: int, c: int) -> None:
    piv = tab[r][c]
    tab[r] = [v / piv for v in tab[r]]
    for i, row in enumerate(tab):
        if i != r and row[c] != 0:
            f = row[c]
            tab[i] = [v - f * w for v, w in zip(row, tab[r])]
    if obj[c] != 0:
        f = obj[c]
        obj[:] = [v - f * w for v, w in zip(obj, tab[r])]


def best_response_belief(payoffs: Sequence[Sequence], action: int) -> list[Fraction] | None:
    """Distribution q over states making ``action`` a best response.

    ``payoffs[a][x]`` is the payoff of action a at state x. Returns q or
    None when the action is never a best response.
    """
    n = len(payoffs[action])
    rows: list[Row] = [([1] * n, "=", 1)]
    for b, pb in enumerate(payoffs):
        if b != action:
            rows.append(([payoffs[action][x] - pb[x] for x in range(n)], ">=", 0))
    return feasible_point(rows, n)
