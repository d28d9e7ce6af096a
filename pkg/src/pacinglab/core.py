"""Discrete-time pipeline dynamics.

Each grid point carries one user request.  For every seller the loop is::

    r = Psi(state, e_hat)          # pacing-adjusted ranking score
    I = top-1 selection over r     # against the reserve utility
    O = I * e                      # observed outcome
    S <- S + O * dt                # consumption, left-Riemann

The integrator is batched over assignments: ``labels`` has shape (R, N) and
every row is an independent run.  Rows never interact, so the result of a row
does not depend on which other rows share its batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, StateError
from .pacing import RATIO, PacingPolicy, ratio_state
from .selection import SelectionRule, select_top1

CONTROL, TREATMENT, OTHER = 0, 1, 2
GROUP_NAMES = {CONTROL: "C", TREATMENT: "T", OTHER: "O"}

GT, GC, NAIVE, INTERLEAVING = "GT", "GC", "naive", "interleaving"


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    dt: float

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidInputError(f"horizon must be positive, got {self.horizon}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")

    @property
    def steps(self) -> int:
        ratio = self.horizon / self.dt
        nearest = round(ratio)
        # absorb representation error such as 0.3 / 0.1 = 2.9999999999999996
        if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
            return max(1, int(nearest))
        return math.ceil(ratio)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully materialised platform instance.

    Score arrays have shape (N, steps); ``reserve`` has shape (steps,).  The
    ``config`` mapping, when present, is the serialisable source the arrays
    were built from.
    """

    name: str
    grid: TimeGrid
    e_T: np.ndarray
    e_C: np.ndarray
    ehat_T: np.ndarray
    ehat_C: np.ndarray
    pacing_T: PacingPolicy
    pacing_C: PacingPolicy
    reserve: np.ndarray
    s0: np.ndarray
    p_T: float = 0.5
    p_C: float = 0.5
    seed: int = 0
    replications: int = 1000
    treatment_kind: str = "item_performance"
    config: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        n, steps = self.n_sellers, self.grid.steps
        for name in ("e_T", "e_C", "ehat_T", "ehat_C"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n, steps):
                raise InvalidInputError(f"{name} has shape {arr.shape}, expected {(n, steps)}")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InvalidInputError(f"{name} must be finite and nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        reserve = np.asarray(self.reserve, dtype=float)
        if reserve.shape != (steps,):
            raise InvalidInputError(f"reserve has shape {reserve.shape}, expected {(steps,)}")
        s0 = np.broadcast_to(np.asarray(self.s0, dtype=float), (n,)).copy()
        if np.any(s0 < 0) or not np.all(np.isfinite(s0)):
            raise InvalidInputError("initial state must be finite and nonnegative")
        object.__setattr__(self, "reserve", reserve)
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "rule", SelectionRule(reserve))
        if self.pacing_T.state_kind != self.pacing_C.state_kind:
            raise InvalidInputError("treatment and control policies must read the same kind of state")

    @property
    def n_sellers(self) -> int:
        return int(np.asarray(self.e_C).shape[0])

    @property
    def feedback(self) -> bool:
        return not (self.pacing_T.kind == "identity" and self.pacing_C.kind == "identity")


@dataclass
class Trajectory:
    """Per-seller time series of one run; arrays have shape (N, steps).

    ``r_T``/``r_C`` hold NaN where a score version was not computed (global
    and naive runs only compute the version each seller is ranked by).
    ``lam_T``/``lam_C`` are set for ratio-state policies.
    """

    design: str
    t: np.ndarray
    dt: float
    labels: np.ndarray
    I: np.ndarray
    O: np.ndarray
    S: np.ndarray
    r_T: np.ndarray
    r_C: np.ndarray
    lam_T: np.ndarray | None = None
    lam_C: np.ndarray | None = None

    @property
    def n_sellers(self) -> int:
        return self.O.shape[0]

    @property
    def complete(self) -> bool:
        return self.O.shape[1] == self.t.size and not np.isnan(self.O).any()

    def cumulative_outcomes(self) -> np.ndarray:
        """Prefix integrals of O, shape (N, steps): entry k covers [0, t_{k+1})."""
        return np.cumsum(self.O * self.dt, axis=1)

    def realized_lambda(self) -> np.ndarray | None:
        if self.lam_T is None:
            return None
        return np.where(self.labels[:, None] == TREATMENT, self.lam_T, self.lam_C)


def step_state(S: float, O: float, dt: float) -> float:
    """S' = S + O*dt; consumption never decreases."""
    for name, v in (("S", S), ("O", O)):
        if not math.isfinite(v) or v < 0:
            raise InvalidInputError(f"{name} must be finite and nonnegative, got {v}")
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    return S + O * dt


def integrate_outcomes(traj: Trajectory) -> np.ndarray:
    """Left-Riemann integral of O per seller."""
    if not traj.complete:
        raise StateError("trajectory does not cover the full grid")
    if traj.O.shape[1] == 0:
        return np.zeros(traj.n_sellers)
    return traj.cumulative_outcomes()[:, -1]


@dataclass
class BatchResult:
    """Cumulative outcomes of R independent runs, shape (R, N).

    ``trajectories`` is populated only when the run was recorded.
    ``group_means`` maps ``"r_T"``, ``"r_C"`` (and ``"lam_T"`` for ratio
    policies) to arrays of shape (R, 3, steps) holding per-group means,
    indexed by CONTROL, TREATMENT, OTHER; NaN marks an empty group.
    """

    design: str
    labels: np.ndarray
    outcomes: np.ndarray
    trajectories: list[Trajectory] | None = None
    group_means: dict[str, np.ndarray] | None = None


def integrate(scenario: Scenario, labels, design: str, record: bool = False, summarize: bool = False) -> BatchResult:
    """Run the feedback loop for a batch of assignments.

    ``design`` is ``"naive"`` (one pooled ranking, each seller scored by its
    own group's algorithm; Other sellers run control) or ``"interleaving"``
    (both algorithms score every seller; Treatment sellers are served from
    ranking T, Control and Other sellers from ranking C).
    """
    if design not in (NAIVE, INTERLEAVING):
        raise InvalidInputError(f"unknown design {design!r}")
    labels = np.atleast_2d(np.asarray(labels, dtype=np.int8))
    n_runs, n = labels.shape
    if n != scenario.n_sellers:
        raise InvalidInputError(f"assignment covers {n} sellers, scenario has {scenario.n_sellers}")
    if np.any((labels < 0) | (labels > 2)):
        raise InvalidInputError("labels must be CONTROL, TREATMENT or OTHER")

    steps, dt = scenario.grid.steps, scenario.grid.dt
    psi_T, psi_C = scenario.pacing_T, scenario.pacing_C
    ratio = psi_T.state_kind == RATIO
    is_T = labels == TREATMENT
    ranked_C = ~is_T

    S = np.broadcast_to(scenario.s0, (n_runs, n)).copy()
    # ratio state starts from a neutral prior of s0 delivered units: s(0) = 1
    cum_r = S.copy() if ratio else np.zeros((n_runs, n))
    cum_e = S.copy() if ratio else np.zeros((n_runs, n))
    cum_O = np.zeros((n_runs, n))

    if summarize:
        masks = np.stack([labels == g for g in (CONTROL, TREATMENT, OTHER)], axis=1).astype(float)
        with np.errstate(divide="ignore"):
            inv_count = np.where(masks.sum(2) > 0, 1.0 / masks.sum(2), np.nan)
        keys = ("r_T", "r_C", "lam_T") if ratio else ("r_T", "r_C")
        means = {key: np.empty((n_runs, 3, steps)) for key in keys}

    if record:
        shape = (n_runs, n, steps)
        rec = {key: np.full(shape, np.nan) for key in ("O", "S", "r_T", "r_C")}
        rec["I"] = np.zeros(shape, dtype=np.int8)
        if ratio:
            rec["lam_T"] = np.full(shape, np.nan)
            rec["lam_C"] = np.full(shape, np.nan)

    for k in range(steps):
        state = ratio_state(cum_r, cum_e) if ratio else S
        rT = psi_T(state, scenario.ehat_T[:, k])
        rC = psi_C(state, scenario.ehat_C[:, k])
        reserve = scenario.reserve[k]
        if design == NAIVE:
            pooled = np.where(is_T, rT, rC)
            selected = select_top1(pooled, reserve)
        else:
            selected = (select_top1(rT, reserve) & is_T) | (select_top1(rC, reserve) & ranked_C)
        realized_r = np.where(is_T, rT, rC)
        e_k = np.where(is_T, scenario.e_T[:, k], scenario.e_C[:, k])
        O = np.where(selected, e_k, 0.0)

        if summarize:
            means["r_T"][:, :, k] = np.einsum("rgn,rn->rg", masks, rT) * inv_count
            means["r_C"][:, :, k] = np.einsum("rgn,rn->rg", masks, rC) * inv_count
            if ratio:
                means["lam_T"][:, :, k] = np.einsum("rgn,rn->rg", masks, psi_T.lam(state)) * inv_count
        if record:
            rec["I"][:, :, k] = selected
            rec["O"][:, :, k] = O
            rec["S"][:, :, k] = state
            if design == NAIVE:
                rec["r_T"][:, :, k] = np.where(is_T, rT, np.nan)
                rec["r_C"][:, :, k] = np.where(is_T, np.nan, rC)
            else:
                rec["r_T"][:, :, k] = rT
                rec["r_C"][:, :, k] = rC
            if ratio:
                rec["lam_T"][:, :, k] = psi_T.lam(state)
                rec["lam_C"][:, :, k] = psi_C.lam(state)

        cum_O += O * dt
        S = S + O * dt
        if ratio:
            cum_r = cum_r + np.where(selected, realized_r, 0.0) * dt
            cum_e = cum_e + O * dt

    trajectories = None
    if record:
        t = scenario.grid.times
        trajectories = [
            Trajectory(
                design=design,
                t=t,
                dt=dt,
                labels=labels[j].copy(),
                I=rec["I"][j],
                O=rec["O"][j],
                S=rec["S"][j],
                r_T=rec["r_T"][j],
                r_C=rec["r_C"][j],
                lam_T=rec["lam_T"][j] if ratio else None,
                lam_C=rec["lam_C"][j] if ratio else None,
            )
            for j in range(n_runs)
        ]
    return BatchResult(design, labels, cum_O, trajectories, means if summarize else None)


def simulate_global(scenario: Scenario, regime: str) -> Trajectory:
    """Everyone on the treatment (``"GT"``) or control (``"GC"``) algorithm."""
    if regime not in (GT, GC):
        raise InvalidInputError(f"regime must be GT or GC, got {regime!r}")
    label = TREATMENT if regime == GT else CONTROL
    labels = np.full(scenario.n_sellers, label, dtype=np.int8)
    traj = integrate(scenario, labels, NAIVE, record=True).trajectories[0]
    traj.design = regime
    return traj
