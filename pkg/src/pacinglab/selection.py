"""Top-1 selection with a reserve utility (the max-form threshold rule)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def _check_nonneg(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise InvalidInputError(f"{name} must be finite")
    if np.any(values < 0):
        raise InvalidInputError(f"{name} must be nonnegative")


def max_form(scores, reserve: float) -> np.ndarray:
    """f_i = r_i - max(r_j for j != i, reserve), for every seller i."""
    r = np.asarray(scores, dtype=float)
    n = r.shape[-1]
    if n == 1:
        return r - reserve
    order = np.argsort(-r, kind="stable")
    first, second = r[order[0]], r[order[1]]
    rival = np.full(n, first)
    rival[order[0]] = second
    return r - np.maximum(rival, reserve)


@dataclass(frozen=True)
class SelectionRule:
    """Recommend the single highest score if it reaches the reserve.

    ``reserve`` is the per-grid-point reserve utility series.  Exact ties are
    resolved in favour of the lowest seller index.
    """

    reserve: np.ndarray
    form: str = "top1-with-reserve"

    def __post_init__(self):
        reserve = np.asarray(self.reserve, dtype=float)
        _check_nonneg("reserve", reserve)
        object.__setattr__(self, "reserve", reserve)

    def at(self, k: int) -> float:
        return float(self.reserve[k])


def evaluate_selection(rule: SelectionRule | None, scores, reserve: float):
    """Return ``(f, indicators)`` for one request.

    ``rule`` only fixes the functional form; the reserve for the request is
    passed explicitly.
    """
    if rule is not None and rule.form != "top1-with-reserve":
        raise InvalidInputError(f"unsupported selection form {rule.form!r}")
    r = np.asarray(scores, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise InvalidInputError("scores must be a non-empty vector")
    _check_nonneg("scores", r)
    _check_nonneg("reserve", np.asarray(reserve, dtype=float))
    f = max_form(r, float(reserve))
    indicators = np.zeros(r.size, dtype=np.int8)
    eligible = np.flatnonzero(f >= 0)
    if eligible.size:
        indicators[eligible[0]] = 1
    return f, indicators


def select_top1(scores: np.ndarray, reserve) -> np.ndarray:
    """Batched selection: ``scores`` has shape (R, N); returns a bool mask.

    Equivalent to ``evaluate_selection`` row by row (``argmax`` returns the
    first maximiser, which is the lowest-index tie break).
    """
    rows = np.arange(scores.shape[0])
    winner = np.argmax(scores, axis=1)
    top = scores[rows, winner]
    ok = top >= reserve
    mask = np.zeros(scores.shape, dtype=bool)
    mask[rows[ok], winner[ok]] = True
    return mask
