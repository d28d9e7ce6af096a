"""Pacing policies Psi(S, e_hat) and their assumption validators.

Two state conventions exist.  Damping policies read the seller's cumulative
consumption ``S``.  The lambda-calibration family reads the ratio state
``s = cum_r / cum_e`` (charged score over realised value, 1 before any
delivery) and multiplies the estimated score by ``lambda(s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, ConfigurationError
from .selection import max_form

CONSUMPTION = "consumption"
RATIO = "ratio"


class PacingPolicy:
    """Base class.  Subclasses are immutable and vectorised over numpy arrays."""

    kind: str = ""
    state_kind: str = CONSUMPTION

    def __call__(self, state, ehat):
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    def lam(self, state):
        """Adjustment factor; only meaningful for ratio-state policies."""
        return None

    def __eq__(self, other):
        return isinstance(other, PacingPolicy) and self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(self.to_spec()))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()})"


class Identity(PacingPolicy):
    """No feedback: the ranking score is the estimated score."""

    kind = "identity"

    def __call__(self, state, ehat):
        ehat, _ = np.broadcast_arrays(np.asarray(ehat, dtype=float), np.asarray(state))
        return ehat.copy()

    def to_spec(self):
        return {"kind": self.kind}


class LinearDamping(PacingPolicy):
    kind = "linear_damping"

    def __init__(self, budget: float):
        self.budget = float(budget)

    def __call__(self, state, ehat):
        return np.asarray(ehat, dtype=float) * np.maximum(0.0, 1.0 - np.asarray(state) / self.budget)

    def to_spec(self):
        return {"kind": self.kind, "budget": self.budget}


class ExponentialDamping(PacingPolicy):
    kind = "exponential_damping"

    def __init__(self, budget: float):
        self.budget = float(budget)

    def __call__(self, state, ehat):
        return np.asarray(ehat, dtype=float) * np.exp(-np.asarray(state) / self.budget)

    def to_spec(self):
        return {"kind": self.kind, "budget": self.budget}


class HyperbolicDamping(PacingPolicy):
    """``e_hat / (1 + S/B)**power``.  A negative power gives an amplifying
    (assumption-violating) policy, which the validators must catch."""

    kind = "hyperbolic_damping"

    def __init__(self, budget: float, power: float = 1.0):
        self.budget = float(budget)
        self.power = float(power)

    def __call__(self, state, ehat):
        return np.asarray(ehat, dtype=float) / (1.0 + np.asarray(state) / self.budget) ** self.power

    def to_spec(self):
        return {"kind": self.kind, "budget": self.budget, "power": self.power}


class AlphaScaled(PacingPolicy):
    """Psi_T = alpha * Psi_base: a uniformly faster pacing speed."""

    kind = "alpha_scaled"

    def __init__(self, base: PacingPolicy, alpha: float):
        self.base = base
        self.alpha = float(alpha)
        self.state_kind = base.state_kind

    def __call__(self, state, ehat):
        return self.alpha * self.base(state, ehat)

    def lam(self, state):
        lam = self.base.lam(state)
        return None if lam is None else self.alpha * lam

    def to_spec(self):
        return {"kind": self.kind, "alpha": self.alpha, "base": self.base.to_spec()}


class LambdaCalibration(PacingPolicy):
    """r = lambda(s) * e_hat with lambda(s) = clip(1 + gain*(1/s - 1), lo, hi).

    ``gain=1`` with a wide range is the plain inverse-ratio response.  A
    narrower range or a gain below one shrinks the swing of lambda around 1.
    """

    kind = "lambda_calibration"
    state_kind = RATIO

    def __init__(self, lambda_min: float = 0.5, lambda_max: float = 2.0, gain: float = 1.0):
        self.lambda_min = float(lambda_min)
        self.lambda_max = float(lambda_max)
        self.gain = float(gain)

    def lam(self, state):
        s = np.asarray(state, dtype=float)
        with np.errstate(divide="ignore"):
            inv = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), np.inf)
        raw = 1.0 + self.gain * (inv - 1.0)
        return np.clip(raw, self.lambda_min, self.lambda_max)

    def __call__(self, state, ehat):
        return self.lam(state) * np.asarray(ehat, dtype=float)

    def to_spec(self):
        return {
            "kind": self.kind,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "gain": self.gain,
        }


def _positive(spec: dict, key: str, default=None) -> float:
    value = spec.get(key, default)
    if value is None:
        raise ConfigurationError(f"pacing policy {spec.get('kind')!r} needs {key!r}")
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ConfigurationError(f"{key} must be a positive finite number, got {value}")
    return value


def make_policy(spec: dict, *, validate: bool = True) -> PacingPolicy:
    """Build a policy from its config mapping.

    With ``validate`` the construction-time spot check runs
    :func:`validate_assumptions` and raises :class:`AssumptionError` on the
    first failing clause.
    """
    if isinstance(spec, PacingPolicy):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("pacing spec must be a mapping with a 'kind' key")
    kind = spec["kind"]
    if kind == "identity":
        policy = Identity()
    elif kind == "linear_damping":
        policy = LinearDamping(_positive(spec, "budget"))
    elif kind == "exponential_damping":
        policy = ExponentialDamping(_positive(spec, "budget"))
    elif kind == "hyperbolic_damping":
        power = float(spec.get("power", 1.0))
        if not math.isfinite(power):
            raise ConfigurationError("power must be finite")
        policy = HyperbolicDamping(_positive(spec, "budget"), power)
    elif kind == "alpha_scaled":
        alpha = _positive(spec, "alpha")
        if alpha <= 1:
            raise ConfigurationError(f"alpha must exceed 1, got {alpha}")
        if "base" not in spec:
            raise ConfigurationError("alpha_scaled needs a 'base' policy")
        policy = AlphaScaled(make_policy(spec["base"], validate=validate), alpha)
    elif kind == "lambda_calibration":
        lo = _positive(spec, "lambda_min", 0.5)
        hi = _positive(spec, "lambda_max", 2.0)
        gain = _positive(spec, "gain", 1.0)
        if not lo <= 1.0 <= hi:
            raise ConfigurationError(f"lambda range must bracket 1, got [{lo}, {hi}]")
        policy = LambdaCalibration(lo, hi, gain)
    else:
        raise ConfigurationError(f"unknown pacing policy kind {kind!r}")
    if validate:
        report = validate_assumptions(policy)
        failure = report.first_failure()
        if failure is not None:
            raise AssumptionError("policy violates a monotonicity assumption", failure.clause, failure.witness)
    return policy


def apply_pacing(policy: PacingPolicy, S: float, ehat: float) -> float:
    """Scalar Psi(S, e_hat) with input checks."""
    from .errors import InvalidInputError

    for name, v in (("S", S), ("ehat", ehat)):
        if not math.isfinite(v) or v < 0:
            raise InvalidInputError(f"{name} must be finite and nonnegative, got {v}")
    return float(policy(np.float64(S), np.float64(ehat)))


# -- lambda state -----------------------------------------------------------


@dataclass(frozen=True)
class LambdaState:
    cum_r: float = 0.0
    cum_e: float = 0.0
    s: float = 1.0
    lam: float = 1.0


def ratio_state(cum_r, cum_e):
    """s = cum_r / cum_e, defined as 1 where nothing has been delivered yet."""
    cum_r = np.asarray(cum_r, dtype=float)
    cum_e = np.asarray(cum_e, dtype=float)
    safe = np.where(cum_e > 0, cum_e, 1.0)
    return np.where(cum_e > 0, cum_r / safe, 1.0)


def lambda_update(state: LambdaState, r: float, e: float, dt: float, policy: LambdaCalibration) -> LambdaState:
    from .errors import InvalidInputError

    if r < 0 or e < 0 or not (math.isfinite(r) and math.isfinite(e)):
        raise InvalidInputError("r and e must be finite and nonnegative")
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    cum_r = state.cum_r + r * dt
    cum_e = state.cum_e + e * dt
    s = float(ratio_state(cum_r, cum_e))
    return LambdaState(cum_r, cum_e, s, float(policy.lam(s)))


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    passed: bool
    checks: int
    witness: dict | None = None


@dataclass
class ValidationReport:
    policy: dict
    clauses: list[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def first_failure(self) -> ClauseResult | None:
        return next((c for c in self.clauses if not c.passed), None)

    def clause(self, name: str) -> ClauseResult:
        return next(c for c in self.clauses if c.clause == name)


@dataclass(frozen=True)
class SampleGrid:
    """States, estimated scores, and score vectors for the sweeps."""

    states: np.ndarray
    ehats: np.ndarray
    score_vectors: np.ndarray
    reserves: np.ndarray

    @property
    def size(self) -> int:
        return self.states.size * self.ehats.size


def default_grid(policy: PacingPolicy | None = None, size: int = 10, vectors: int = 200, seed: int = 0) -> SampleGrid:
    scale = 1.0
    base = policy.base if isinstance(policy, AlphaScaled) else policy
    if base is not None and hasattr(base, "budget"):
        scale = base.budget
    if policy is not None and policy.state_kind == RATIO:
        states = np.geomspace(0.25, 4.0, size)
    else:
        states = np.linspace(0.0, 2.0 * scale, size)
    rng = np.random.default_rng(seed)
    return SampleGrid(
        states=states,
        ehats=np.linspace(0.0, 2.0, size),
        score_vectors=rng.uniform(0.0, 1.0, size=(vectors, 4)),
        reserves=rng.uniform(0.0, 0.6, size=vectors),
    )


def _monotone_clause(name, values, axis_values, other_values, increasing, axis_label, other_label):
    # values[a, b]: a indexes the swept argument, b the held-fixed one
    checks = 0
    for b, other in enumerate(other_values):
        for a1 in range(len(axis_values)):
            for a2 in range(len(axis_values)):
                if axis_values[a2] < axis_values[a1]:
                    continue
                checks += 1
                v1, v2 = values[a1, b], values[a2, b]
                bad = v2 < v1 if increasing else v2 > v1
                if bad:
                    witness = {
                        f"{axis_label}1": float(axis_values[a1]),
                        f"{axis_label}2": float(axis_values[a2]),
                        other_label: float(other),
                        "psi1": float(v1),
                        "psi2": float(v2),
                    }
                    return ClauseResult(name, False, checks, witness)
    return ClauseResult(name, True, checks)


def validate_assumptions(policy: PacingPolicy, grid: SampleGrid | None = None, *, alpha: float | None = None) -> ValidationReport:
    """Numerically check the monotonicity assumptions on a sample grid.

    Clauses: ``nonnegative``; ``A1.1`` (max-form rule monotone in rival
    scores, selected-set sum monotone in own score); ``A1.2`` (Psi
    non-increasing in state); ``A1.3`` (Gamma = I*e >= 0); ``A1.4`` (Psi
    non-decreasing in e_hat); and, when ``alpha`` is given or the policy is
    alpha-scaled, ``A4`` (scaling all scores by alpha keeps selected sellers'
    f non-decreasing, and Psi_T == alpha * Psi_C).
    """
    grid = grid or default_grid(policy)
    if grid.size < 100:
        raise ConfigurationError(f"sample grid needs at least 100 (S, e_hat) points, got {grid.size}")
    report = ValidationReport(policy.to_spec())
    S, E = np.meshgrid(grid.states, grid.ehats, indexing="ij")
    with np.errstate(all="ignore"):
        psi = np.asarray(policy(S, E), dtype=float)

    bad = ~np.isfinite(psi) | (psi < 0)
    if bad.any():
        a, b = np.argwhere(bad)[0]
        report.clauses.append(
            ClauseResult("nonnegative", False, psi.size, {"S": float(S[a, b]), "ehat": float(E[a, b]), "psi": float(psi[a, b])})
        )
    else:
        report.clauses.append(ClauseResult("nonnegative", True, psi.size))

    report.clauses.append(_selection_monotonicity(grid))
    report.clauses.append(
        _monotone_clause("A1.2", psi, grid.states, grid.ehats, False, "S", "ehat")
    )
    gamma_ok = bool(np.all(np.outer([0.0, 1.0], grid.ehats) >= 0))
    report.clauses.append(ClauseResult("A1.3", gamma_ok, 2 * grid.ehats.size))
    report.clauses.append(
        _monotone_clause("A1.4", psi.T, grid.ehats, grid.states, True, "ehat", "S")
    )

    if isinstance(policy, AlphaScaled) and alpha is None:
        alpha = policy.alpha
    if alpha is not None:
        report.clauses.append(_alpha_clause(policy, grid, alpha, S, E, psi))
    return report


def _selection_monotonicity(grid: SampleGrid) -> ClauseResult:
    # the sweep only depends on the sampled score vectors, so repeat calls are cached
    key = (grid.score_vectors.tobytes(), grid.score_vectors.shape, grid.reserves.tobytes())
    if key not in _SELECTION_CACHE:
        _SELECTION_CACHE[key] = _selection_sweep(grid)
    return _SELECTION_CACHE[key]


_SELECTION_CACHE: dict = {}


def _selection_sweep(grid: SampleGrid) -> ClauseResult:
    checks = 0
    for r, R in zip(grid.score_vectors, grid.reserves):
        f = max_form(r, R)
        selected = np.flatnonzero(f >= 0)
        for i in range(r.size):
            for j in range(r.size):
                if i == j:
                    continue
                lowered = r.copy()
                lowered[j] *= 0.5
                checks += 1
                if max_form(lowered, R)[i] < f[i]:
                    return ClauseResult("A1.1", False, checks, {"scores": r.tolist(), "reserve": float(R), "i": i, "j": j})
        for i in selected:
            raised = r.copy()
            raised[i] += 0.25
            checks += 1
            if max_form(raised, R)[selected].sum() < f[selected].sum():
                return ClauseResult("A1.1", False, checks, {"scores": r.tolist(), "reserve": float(R), "i": int(i)})
    return ClauseResult("A1.1", True, checks)


def _alpha_clause(policy, grid, alpha, S, E, psi) -> ClauseResult:
    checks = 0
    for r, R in zip(grid.score_vectors, grid.reserves):
        f = max_form(r, R)
        g = max_form(alpha * r, R)
        for i in np.flatnonzero(f >= 0):
            checks += 1
            if g[i] < f[i]:
                return ClauseResult("A4", False, checks, {"scores": r.tolist(), "reserve": float(R), "i": int(i), "alpha": alpha})
    if isinstance(policy, AlphaScaled):
        base = np.asarray(policy.base(S, E), dtype=float)
        mismatch = (base > 0) & (psi != alpha * base)
        checks += base.size
        if mismatch.any():
            a, b = np.argwhere(mismatch)[0]
            return ClauseResult("A4", False, checks, {"S": float(S[a, b]), "ehat": float(E[a, b]), "ratio": float(psi[a, b] / base[a, b])})
    return ClauseResult("A4", True, checks)


def narrower_range(treatment: PacingPolicy, control: PacingPolicy, states=None) -> ClauseResult:
    """|lambda_T(s) - 1| <= |lambda_C(s) - 1| on a sweep of ratio states."""
    states = np.geomspace(0.05, 20.0, 400) if states is None else np.asarray(states, dtype=float)
    lt, lc = treatment.lam(states), control.lam(states)
    if lt is None or lc is None:
        raise ConfigurationError("narrower_range needs ratio-state policies")
    bad = np.abs(lt - 1) > np.abs(lc - 1)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        return ClauseResult("narrow-range", False, states.size, {"s": float(states[k]), "lambda_T": float(lt[k]), "lambda_C": float(lc[k])})
    return ClauseResult("narrow-range", True, states.size)
