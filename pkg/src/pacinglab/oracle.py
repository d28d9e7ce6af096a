"""Brute-force reference machinery for small instances.

``enumerate_expected_gte_hat`` replaces Monte Carlo by an exact sum over
every assignment.  ``independent_loop`` re-derives the grid loop in plain
Python from the scenario's serialisable pieces (policy specs and score
arrays) without calling the vectorised engine, so the two can certify each
other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import CONTROL, INTERLEAVING, NAIVE, OTHER, TREATMENT, Scenario, integrate
from .errors import CapacityError, DegenerateSampleError, InvalidInputError
from .presets import load_preset

MAX_ENUMERATION_SELLERS = 12
MAX_LOOP_CELLS = 2_000_000
BUILDABLE = ("prop1", "prop2", "boost", "thm1", "thm2", "thm3", "sec5", "aa")


@dataclass
class OracleResult:
    design: str
    exact_expected_gte_hat: float
    table: list[tuple[tuple[int, ...], float, float]] = field(repr=False)
    excluded_mass: float
    tolerance: float = 1e-12

    @property
    def assignments(self) -> int:
        return len(self.table)

    def to_dict(self) -> dict:
        return {
            "design": self.design,
            "exact_expected_gte_hat": self.exact_expected_gte_hat,
            "assignments": self.assignments,
            "excluded_mass": self.excluded_mass,
            "tolerance": self.tolerance,
        }


def _enumerated_labels(n: int, p_T: float, p_C: float):
    p_O = max(0.0, 1.0 - p_T - p_C)
    options = [(g, p) for g, p in ((TREATMENT, p_T), (CONTROL, p_C), (OTHER, p_O)) if p > 0]
    rows, weights = [], []
    for combo in itertools.product(options, repeat=n):
        rows.append([g for g, _ in combo])
        weights.append(math.prod(p for _, p in combo))
    return np.array(rows, dtype=np.int8), np.array(weights)


def _row_estimate(outcomes, labels, p_T, p_C) -> float:
    n = labels.size
    total = 0.0
    if p_T > 0:
        total += math.fsum(o for o, g in zip(outcomes, labels) if g == TREATMENT) / (n * p_T)
    if p_C > 0:
        total -= math.fsum(o for o, g in zip(outcomes, labels) if g == CONTROL) / (n * p_C)
    return total


def enumerate_expected_gte_hat(
    scenario: Scenario, design: str, p_T: float | None = None, p_C: float | None = None
) -> OracleResult:
    """Exact expectation of the estimator over all assignments.

    Assignments leaving a positive-probability group empty are dropped and
    the remaining weights renormalised; the dropped mass is reported.
    """
    if design not in (NAIVE, INTERLEAVING):
        raise InvalidInputError(f"design must be naive or interleaving, got {design!r}")
    n = scenario.n_sellers
    if n > MAX_ENUMERATION_SELLERS:
        raise CapacityError(f"enumeration supports at most {MAX_ENUMERATION_SELLERS} sellers, got {n}")
    p_T = scenario.p_T if p_T is None else p_T
    p_C = scenario.p_C if p_C is None else p_C
    labels, weights = _enumerated_labels(n, p_T, p_C)
    keep = np.ones(len(labels), dtype=bool)
    if p_T > 0:
        keep &= (labels == TREATMENT).any(axis=1)
    if p_C > 0:
        keep &= (labels == CONTROL).any(axis=1)
    if not keep.any():
        raise DegenerateSampleError("every assignment leaves a group empty")
    labels, excluded = labels[keep], math.fsum(weights[~keep])
    weights = weights[keep] / math.fsum(weights[keep])
    outcomes = integrate(scenario, labels, design).outcomes
    table = []
    for lab, w, out in zip(labels, weights, outcomes):
        table.append((tuple(int(g) for g in lab), float(w), _row_estimate(out.tolist(), lab, p_T, p_C)))
    exact = math.fsum(w * g for _, w, g in table)
    return OracleResult(design, exact, table, excluded)


# -- independent loop -----------------------------------------------------------


def _psi(spec: dict, state: float, ehat: float) -> float:
    kind = spec["kind"]
    if kind == "identity":
        return ehat
    if kind == "linear_damping":
        return ehat * max(0.0, 1.0 - state / spec["budget"])
    if kind == "exponential_damping":
        return ehat * math.exp(-state / spec["budget"])
    if kind == "hyperbolic_damping":
        return ehat / (1.0 + state / spec["budget"]) ** spec["power"]
    if kind == "alpha_scaled":
        return spec["alpha"] * _psi(spec["base"], state, ehat)
    if kind == "lambda_calibration":
        return _lam(spec, state) * ehat
    raise InvalidInputError(f"unknown policy kind {kind!r}")


def _lam(spec: dict, s: float) -> float:
    if spec["kind"] == "alpha_scaled":
        return spec["alpha"] * _lam(spec["base"], s)
    raw = 1.0 + spec["gain"] * (1.0 / s - 1.0) if s > 0 else math.inf
    return min(max(raw, spec["lambda_min"]), spec["lambda_max"])


def _uses_ratio(spec: dict) -> bool:
    return spec["kind"] == "lambda_calibration" or (spec["kind"] == "alpha_scaled" and _uses_ratio(spec["base"]))


def _top(scores: list[float], reserve: float):
    best = None
    for i, r in enumerate(scores):
        if best is None or r > scores[best]:
            best = i
    return best if best is not None and scores[best] >= reserve else None


def independent_loop(scenario: Scenario, which: str, labels=None) -> list[float]:
    """Integrated outcome per seller from a plain-Python replay.

    ``which`` is ``"GT"``, ``"GC"``, ``"naive"`` or ``"interleaving"``;
    the designs need ``labels`` (one group code per seller).
    """
    n, steps = scenario.n_sellers, scenario.grid.steps
    if n * steps > MAX_LOOP_CELLS:
        raise CapacityError(f"independent loop supports at most {MAX_LOOP_CELLS} seller-steps, got {n * steps}")
    if which in ("GT", "GC"):
        group = [TREATMENT if which == "GT" else CONTROL] * n
        pooled = True
    elif which in (NAIVE, INTERLEAVING):
        if labels is None:
            raise InvalidInputError("design runs need labels")
        group = [int(g) for g in labels]
        pooled = which == NAIVE
    else:
        raise InvalidInputError(f"unknown regime or design {which!r}")

    spec_T, spec_C = scenario.pacing_T.to_spec(), scenario.pacing_C.to_spec()
    ratio = _uses_ratio(spec_T)
    dt = scenario.grid.dt
    e_T, e_C = scenario.e_T.tolist(), scenario.e_C.tolist()
    ehat_T, ehat_C = scenario.ehat_T.tolist(), scenario.ehat_C.tolist()
    reserve = scenario.reserve.tolist()
    consumed = [float(x) for x in scenario.s0]
    cum_r = list(consumed) if ratio else [0.0] * n
    cum_e = list(consumed) if ratio else [0.0] * n
    total = [0.0] * n

    for k in range(steps):
        if ratio:
            state = [cum_r[i] / cum_e[i] if cum_e[i] > 0 else 1.0 for i in range(n)]
        else:
            state = consumed
        r_T = [_psi(spec_T, state[i], ehat_T[i][k]) for i in range(n)]
        r_C = [_psi(spec_C, state[i], ehat_C[i][k]) for i in range(n)]
        own = [r_T[i] if group[i] == TREATMENT else r_C[i] for i in range(n)]
        served = [False] * n
        if pooled:
            w = _top(own, reserve[k])
            if w is not None:
                served[w] = True
        else:
            w = _top(r_T, reserve[k])
            if w is not None and group[w] == TREATMENT:
                served[w] = True
            w = _top(r_C, reserve[k])
            if w is not None and group[w] != TREATMENT:
                served[w] = True
        for i in range(n):
            e = e_T[i][k] if group[i] == TREATMENT else e_C[i][k]
            o = e if served[i] else 0.0
            total[i] += o * dt
            consumed[i] = consumed[i] + o * dt
            if ratio:
                cum_r[i] = cum_r[i] + (own[i] if served[i] else 0.0) * dt
                cum_e[i] = cum_e[i] + o * dt
    return total


def build_theorem_scenario(which: str) -> Scenario:
    """Small scenario built to meet the named result's preconditions."""
    if which not in BUILDABLE:
        raise InvalidInputError(f"unknown theorem scenario {which!r}; choose from {', '.join(BUILDABLE)}")
    return load_preset(which)
