"""Two-player 2x2 transferable-utility (TU) game solver.

A TU game between a row player and a column player is described by two 2x2
payoff matrices ``A`` and ``B`` (row player's and column player's payoffs, in
currency units).  Because utility is transferable via a side payment, the
rational joint action maximizes the *total* payoff ``A + B``.  The split of
that total is anchored at the disagreement (threat) point: each player's
guaranteed expected payoff when both play the zero-sum game with payoff
matrix ``C = A - B``.  The side payment ``sigma`` implements the natural
compromise, the midpoint of the Pareto frontier between the two extreme
allocations, which leaves the row player with ``(omega* + S_A - S_B) / 2``
and the column player with ``(omega* - S_A + S_B) / 2``.

All functions are pure and operate on plain 2x2 arrays; actions are 1-based
``(m, n)`` pairs to match the usual row/column convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "TOLERANCE",
    "SidePaymentMismatchError",
    "ThreatPoint",
    "TuSolution",
    "as_payoff_matrix",
    "best_joint_action",
    "solve_minimax_2x2",
    "threat_strategy",
    "solve_tu_game",
]

# Absolute tolerance, in currency units (cents), for all equality checks.
TOLERANCE = 1e-9

# Closed-form mixed strategies are used only when their shared denominator
# is safely away from zero; otherwise fall through to the minimax program.
_MIN_DENOMINATOR = 1e-12

Action = tuple[int, int]


class SidePaymentMismatchError(ArithmeticError):
    """The two algebraically identical side-payment formulas disagreed.

    This signals an arithmetic bug, never an expected runtime condition.
    """


def as_payoff_matrix(entries) -> np.ndarray:
    """Validate and return a finite 2x2 float payoff matrix."""
    m = np.asarray(entries, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"payoff matrix must be 2x2, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("payoff matrix entries must be finite")
    return m


@dataclass(frozen=True)
class ThreatPoint:
    """Disagreement point of the TU game.

    ``p`` (``q``) is the probability that the row (column) player plays their
    preferred action 1.  ``s_a`` and ``s_b`` are the expected payoffs
    ``p^T A q`` and ``p^T B q`` under the threat strategies.  ``kind`` records
    whether the zero-sum difference game had a pure saddle point.
    """

    p: float
    q: float
    s_a: float
    s_b: float
    kind: Literal["saddle", "mixed"]


@dataclass(frozen=True)
class TuSolution:
    """Solved TU game: joint action, total payoff, threat point, transfer.

    ``sigma > 0`` is a payment from the row player to the column player.
    """

    action: Action
    omega_star: float
    threat: ThreatPoint
    sigma: float

    @property
    def payoff_a(self) -> float:
        """Row player's post-transfer payoff, ``(omega* + S_A - S_B) / 2``."""
        return (self.omega_star + self.threat.s_a - self.threat.s_b) / 2.0

    @property
    def payoff_b(self) -> float:
        """Column player's post-transfer payoff, ``(omega* - S_A + S_B) / 2``."""
        return (self.omega_star - self.threat.s_a + self.threat.s_b) / 2.0


def best_joint_action(a, b) -> tuple[Action, float]:
    """Return the joint action maximizing total payoff and its value.

    Ties are broken by the lexicographically smallest ``(m, n)``.
    """
    a = as_payoff_matrix(a)
    b = as_payoff_matrix(b)
    total = a + b
    best: Action = (1, 1)
    best_value = total[0, 0]
    for m in (1, 2):
        for n in (1, 2):
            value = total[m - 1, n - 1]
            if value > best_value:
                best, best_value = (m, n), value
    return best, float(best_value)


def _pure_saddle(c: np.ndarray) -> Action | None:
    """Lexicographically smallest entry that is a row min and column max."""
    for m in (1, 2):
        for n in (1, 2):
            value = c[m - 1, n - 1]
            if value <= c[m - 1, :].min() and value >= c[:, n - 1].max():
                return (m, n)
    return None


def solve_minimax_2x2(c) -> tuple[float, float, float]:
    """Mixed minimax solution of the 2x2 zero-sum game with payoff ``c``.

    The column player minimizes the upper envelope of the two row-payoff
    lines over ``q in [0, 1]``; the row player symmetrically maximizes the
    lower envelope.  Both are piecewise linear, so the optimum is at an
    endpoint or at the lines' intersection, clamped to the unit interval.
    Returns ``(p, q, value)`` with ``value == p^T C q``.
    """
    c = as_payoff_matrix(c)

    def envelope_argopt(s0, i0, s1, i1, minimize):
        # Lines s*x + i; candidates: interior crossing first, then endpoints.
        candidates = []
        if abs(s0 - s1) > 0.0:
            x = (i1 - i0) / (s0 - s1)
            if 0.0 <= x <= 1.0:
                candidates.append(x)
        candidates.extend((0.0, 1.0))
        pick = (max, min) if minimize else (min, max)
        best_x = candidates[0]
        best_val = pick[0](s0 * best_x + i0, s1 * best_x + i1)
        for x in candidates[1:]:
            val = pick[0](s0 * x + i0, s1 * x + i1)
            if (val < best_val) if minimize else (val > best_val):
                best_x, best_val = x, val
        return best_x

    q = envelope_argopt(c[0, 0] - c[0, 1], c[0, 1], c[1, 0] - c[1, 1], c[1, 1], minimize=True)
    p = envelope_argopt(c[0, 0] - c[1, 0], c[1, 0], c[0, 1] - c[1, 1], c[1, 1], minimize=False)
    pv = np.array([p, 1.0 - p])
    qv = np.array([q, 1.0 - q])
    return float(p), float(q), float(pv @ c @ qv)


def threat_strategy(a, b) -> ThreatPoint:
    """Threat strategies of the zero-sum difference game ``C = A - B``.

    A pure saddle point, when one exists, is returned as degenerate
    probabilities.  Otherwise the closed-form indifference strategies are
    used when well defined and inside ``[0, 1]``; any degenerate case falls
    through to the minimax program (never an error to the caller).
    """
    a = as_payoff_matrix(a)
    b = as_payoff_matrix(b)
    c = a - b

    saddle = _pure_saddle(c)
    if saddle is not None:
        m, n = saddle
        p = 1.0 if m == 1 else 0.0
        q = 1.0 if n == 1 else 0.0
        return ThreatPoint(p=p, q=q, s_a=float(a[m - 1, n - 1]), s_b=float(b[m - 1, n - 1]), kind="saddle")

    denom = c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0]
    p = q = None
    if abs(denom) > _MIN_DENOMINATOR:
        p_closed = (c[1, 1] - c[1, 0]) / denom
        q_closed = (c[1, 1] - c[0, 1]) / denom
        if 0.0 <= p_closed <= 1.0 and 0.0 <= q_closed <= 1.0:
            p, q = float(p_closed), float(q_closed)
    if p is None:
        p, q, _ = solve_minimax_2x2(c)

    pv = np.array([p, 1.0 - p])
    qv = np.array([q, 1.0 - q])
    return ThreatPoint(p=p, q=q, s_a=float(pv @ a @ qv), s_b=float(pv @ b @ qv), kind="mixed")


def solve_tu_game(a, b) -> TuSolution:
    """Solve the TU game: joint action, threat point, and side payment.

    The side payment is computed from the row player's equation and
    cross-checked against the column player's; the two are algebraically
    identical, so disagreement beyond ``TOLERANCE`` raises
    :class:`SidePaymentMismatchError`.
    """
    a = as_payoff_matrix(a)
    b = as_payoff_matrix(b)
    action, omega = best_joint_action(a, b)
    threat = threat_strategy(a, b)
    m, n = action
    a_star = float(a[m - 1, n - 1])
    b_star = float(b[m - 1, n - 1])
    sigma_row = (-omega - threat.s_a + threat.s_b) / 2.0 + a_star
    sigma_col = (omega - threat.s_a + threat.s_b) / 2.0 - b_star
    if abs(sigma_row - sigma_col) > TOLERANCE:
        raise SidePaymentMismatchError(
            f"side payment formulas disagree: {sigma_row!r} vs {sigma_col!r}"
        )
    return TuSolution(action=action, omega_star=omega, threat=threat, sigma=sigma_row)
