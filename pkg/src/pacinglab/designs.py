"""Seller-side experiment designs: assignment, naive pooling, counterfactual
interleaving, and the list merge used to build a served ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .core import CONTROL, INTERLEAVING, NAIVE, OTHER, TREATMENT, Scenario, Trajectory, integrate
from .errors import ConfigurationError, InvalidInputError

_LABEL_CODES = {"T": TREATMENT, "C": CONTROL, "O": OTHER, TREATMENT: TREATMENT, CONTROL: CONTROL, OTHER: OTHER}


@dataclass(frozen=True)
class Assignment:
    labels: np.ndarray
    p_T: float
    p_C: float
    seed: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def p_O(self) -> float:
        return max(0.0, 1.0 - self.p_T - self.p_C)

    @property
    def n_sellers(self) -> int:
        return self.labels.size

    @property
    def treatment(self) -> np.ndarray:
        return np.flatnonzero(self.labels == TREATMENT)

    @property
    def control(self) -> np.ndarray:
        return np.flatnonzero(self.labels == CONTROL)

    @property
    def other(self) -> np.ndarray:
        return np.flatnonzero(self.labels == OTHER)

    @property
    def degenerate(self) -> bool:
        return self.treatment.size == 0 or self.control.size == 0

    @classmethod
    def uniform(cls, n: int, label: int) -> "Assignment":
        p_T = 1.0 if label == TREATMENT else 0.0
        p_C = 1.0 if label == CONTROL else 0.0
        return cls(np.full(n, label, dtype=np.int8), p_T, p_C)


def _check_probabilities(p_T: float, p_C: float) -> None:
    if not all(math.isfinite(p) and 0 <= p <= 1 for p in (p_T, p_C)) or p_T + p_C > 1 + 1e-12:
        raise ConfigurationError(f"invalid group probabilities p_T={p_T}, p_C={p_C}")


def _draw(rng: np.random.Generator, shape, p_T: float, p_C: float) -> np.ndarray:
    u = rng.random(shape)
    return np.where(u < p_T, TREATMENT, np.where(u < p_T + p_C, CONTROL, OTHER)).astype(np.int8)


def sample_assignment(n: int, p_T: float, p_C: float, seed) -> Assignment:
    """Independent per-seller labels; Other gets the leftover probability."""
    _check_probabilities(p_T, p_C)
    if n < 1:
        raise ConfigurationError("need at least one seller")
    rng = np.random.default_rng(seed)
    return Assignment(_draw(rng, n, p_T, p_C), p_T, p_C, seed)


def draw_assignments(n: int, p_T: float, p_C: float, count: int, seed, max_resamples: int | None = None):
    """Draw ``count`` non-degenerate label vectors, resampling empty-group draws.

    A draw is degenerate when a group with positive probability is empty.
    Returns ``(labels, resamples)`` with labels of shape (count, n).
    """
    _check_probabilities(p_T, p_C)
    if p_T == 0 and p_C == 0:
        raise ConfigurationError("p_T and p_C cannot both be zero")
    if max_resamples is None:
        max_resamples = 1000 * count
    rng = np.random.default_rng(seed)
    out = np.empty((count, n), dtype=np.int8)
    resamples = 0
    for j in range(count):
        while True:
            row = _draw(rng, n, p_T, p_C)
            if (p_T == 0 or (row == TREATMENT).any()) and (p_C == 0 or (row == CONTROL).any()):
                out[j] = row
                break
            resamples += 1
            if resamples > max_resamples:
                raise ConfigurationError(f"resample budget of {max_resamples} exhausted; groups are almost always empty")
    return out, resamples


def _labels_for(scenario: Scenario, a: Assignment) -> np.ndarray:
    if a.n_sellers != scenario.n_sellers:
        raise InvalidInputError(f"assignment covers {a.n_sellers} sellers, scenario has {scenario.n_sellers}")
    return a.labels


def simulate_naive(scenario: Scenario, a: Assignment) -> Trajectory:
    return integrate(scenario, _labels_for(scenario, a), NAIVE, record=True).trajectories[0]


def simulate_interleaving(scenario: Scenario, a: Assignment) -> Trajectory:
    return integrate(scenario, _labels_for(scenario, a), INTERLEAVING, record=True).trajectories[0]


def simulate_design(scenario: Scenario, design: str, a: Assignment) -> Trajectory:
    if design == NAIVE:
        return simulate_naive(scenario, a)
    if design == INTERLEAVING:
        return simulate_interleaving(scenario, a)
    raise InvalidInputError(f"unknown design {design!r}")


def merge_rankings(
    rank_C: Sequence[Hashable],
    rank_T: Sequence[Hashable],
    labels: Mapping[Hashable, object] | Assignment,
    seed=None,
    coin: Callable[[Hashable, Hashable], Hashable] | None = None,
) -> list:
    """Build the served list from the two rankings.

    Control sellers claim their ranking-C slot and Treatment sellers their
    ranking-T slot.  When two sellers claim one slot, ``coin`` (a fair coin
    seeded by ``seed`` unless given) names the one that stays; the other moves
    down a slot and may collide again.  Other sellers fill the gaps in their
    ranking-C order.
    """
    rank_C, rank_T = list(rank_C), list(rank_T)
    if len(set(rank_C)) != len(rank_C) or set(rank_C) != set(rank_T) or len(rank_C) != len(rank_T):
        raise InvalidInputError("rank_C and rank_T must be permutations of the same sellers")
    if isinstance(labels, Assignment):
        labels = {i: int(lab) for i, lab in enumerate(labels.labels)}
    try:
        group = {s: _LABEL_CODES[labels[s]] for s in rank_C}
    except KeyError as exc:
        raise InvalidInputError(f"no valid label for seller {exc.args[0]!r}") from None
    if coin is None:
        rng = np.random.default_rng(seed)

        def coin(first, second):
            return first if rng.random() < 0.5 else second

    pos_C = {s: k for k, s in enumerate(rank_C)}
    pos_T = {s: k for k, s in enumerate(rank_T)}
    claims: dict[int, list] = {}
    for s in rank_C:
        if group[s] == CONTROL:
            claims.setdefault(pos_C[s], []).append(s)
    for s in rank_T:
        if group[s] == TREATMENT:
            claims.setdefault(pos_T[s], []).append(s)

    slots: dict[int, Hashable] = {}
    carried: list = []
    slot = 0
    last_claim = max(claims, default=-1)
    while carried or slot <= last_claim:
        pending = carried + claims.get(slot, [])
        carried = []
        if pending:
            keep = pending[0]
            for challenger in pending[1:]:
                winner = coin(keep, challenger)
                carried.append(challenger if winner == keep else keep)
                keep = winner
            slots[slot] = keep
        slot += 1

    others = iter([s for s in rank_C if group[s] == OTHER])
    merged = []
    for k in range(max(slot, len(rank_C))):
        if k in slots:
            merged.append(slots[k])
        else:
            nxt = next(others, None)
            if nxt is not None:
                merged.append(nxt)
    merged.extend(others)
    return merged
