"""GTE, the two-group estimator, Monte-Carlo expectations, prefix audits and
interference detection."""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (
    CONTROL,
    GC,
    GT,
    INTERLEAVING,
    NAIVE,
    OTHER,
    TREATMENT,
    Scenario,
    Trajectory,
    integrate,
    integrate_outcomes,
    simulate_global,
)
from .designs import Assignment, draw_assignments, simulate_design
from .errors import DegenerateSampleError, InvalidInputError, PreconditionError
from .pacing import AlphaScaled, validate_assumptions

EPSILON = 1e-9
CHUNK = 250


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("PACINGLAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


# -- estimand and estimator ---------------------------------------------------


def gte_true(scenario: Scenario) -> float:
    """(1/N) sum_i [int O_i^GT - int O_i^GC]."""
    total_T = integrate_outcomes(simulate_global(scenario, GT))
    total_C = integrate_outcomes(simulate_global(scenario, GC))
    return math.fsum(total_T - total_C) / scenario.n_sellers


def _estimate(outcomes: np.ndarray, labels: np.ndarray, p_T: float, p_C: float) -> float:
    n = labels.size
    value = 0.0
    for group, p, sign in ((TREATMENT, p_T, 1.0), (CONTROL, p_C, -1.0)):
        members = labels == group
        if p == 0:
            continue
        if not members.any():
            name = "treatment" if group == TREATMENT else "control"
            raise DegenerateSampleError(f"the {name} group is empty; the estimator is undefined")
        value += sign * math.fsum(outcomes[members]) / (n * p)
    return value


def gte_hat(trajectories, a: Assignment, p_T: float | None = None, p_C: float | None = None) -> float:
    """Inverse-probability difference of group totals.

    ``trajectories`` is a design :class:`Trajectory` or the vector of
    integrated outcomes per seller.  N counts every seller, Other included.
    A group whose probability is zero contributes nothing.
    """
    p_T = a.p_T if p_T is None else p_T
    p_C = a.p_C if p_C is None else p_C
    if p_T < 0 or p_C < 0 or (p_T == 0 and p_C == 0):
        raise InvalidInputError("p_T and p_C must be nonnegative and not both zero")
    if isinstance(trajectories, Trajectory):
        outcomes = integrate_outcomes(trajectories)
    else:
        outcomes = np.asarray(trajectories, dtype=float)
    labels = np.asarray(a.labels)
    if outcomes.shape != labels.shape:
        raise InvalidInputError(f"outcomes have shape {outcomes.shape}, assignment covers {labels.size} sellers")
    return _estimate(outcomes, labels, p_T, p_C)


def gte_hat_batch(outcomes: np.ndarray, labels: np.ndarray, p_T: float, p_C: float) -> np.ndarray:
    """Row-wise :func:`gte_hat` for outcomes and labels of shape (R, N)."""
    return np.array([_estimate(o, lab, p_T, p_C) for o, lab in zip(outcomes, labels)])


# -- Monte Carlo ----------------------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    design: str
    gte_true: float
    gte_hat_mean: float
    gte_hat_stddev: float
    ci_low: float
    ci_high: float
    replications: int
    resamples: int
    seed: int

    @property
    def bias(self) -> float:
        return self.gte_hat_mean - self.gte_true

    @property
    def stderr(self) -> float:
        return self.gte_hat_stddev / math.sqrt(self.replications)

    def to_dict(self) -> dict:
        return {**asdict(self), "bias": self.bias, "stderr": self.stderr}


def run_batched(scenario: Scenario, labels: np.ndarray, design: str, threads: int | None = None, **kwargs):
    """Integrate fixed-size chunks of assignments, possibly in parallel.

    Chunk boundaries do not depend on the thread count and rows never
    interact, so results are identical for any level of parallelism.
    """
    chunks = [labels[i : i + CHUNK] for i in range(0, len(labels), CHUNK)]
    workers = min(_threads(threads), len(chunks))
    if workers <= 1:
        return [integrate(scenario, c, design, **kwargs) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: integrate(scenario, c, design, **kwargs), chunks))


def sample_estimates(scenario: Scenario, design: str, replications: int, seed: int, threads: int | None = None):
    """Per-assignment estimates over freshly drawn non-degenerate assignments."""
    labels, resamples = draw_assignments(scenario.n_sellers, scenario.p_T, scenario.p_C, replications, seed)
    results = run_batched(scenario, labels, design, threads)
    outcomes = np.concatenate([r.outcomes for r in results])
    return gte_hat_batch(outcomes, labels, scenario.p_T, scenario.p_C), resamples


def expected_gte_hat(
    scenario: Scenario,
    design: str,
    replications: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> EstimateReport:
    """Monte-Carlo mean of the estimator with a normal 95% interval."""
    if design not in (NAIVE, INTERLEAVING):
        raise InvalidInputError(f"design must be naive or interleaving, got {design!r}")
    replications = scenario.replications if replications is None else int(replications)
    seed = scenario.seed if seed is None else int(seed)
    if replications < 1:
        raise InvalidInputError("replications must be at least 1")
    values, resamples = sample_estimates(scenario, design, replications, seed, threads)
    mean = math.fsum(values) / replications
    sd = statistics.stdev(values.tolist()) if replications >= 2 else 0.0
    half = statistics.NormalDist().inv_cdf(0.975) * sd / math.sqrt(replications)
    return EstimateReport(
        design=design,
        gte_true=gte_true(scenario),
        gte_hat_mean=mean,
        gte_hat_stddev=sd,
        ci_low=mean - half,
        ci_high=mean + half,
        replications=replications,
        resamples=resamples,
        seed=seed,
    )


# -- prefix audits ---------------------------------------------------------------


@dataclass
class AuditReport:
    theorem: str
    design: str
    passed: bool
    checks: int
    gte_hat: float
    violation: dict | None = None
    equality: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _same_array(x: np.ndarray, y: np.ndarray) -> bool:
    return x.shape == y.shape and bool(np.array_equal(x, y))


def audit_theorem(scenario: Scenario, design: str) -> str:
    """Name the dominance result whose preconditions the scenario meets.

    Raises :class:`PreconditionError` when none applies.
    """
    if design not in (NAIVE, INTERLEAVING):
        raise InvalidInputError(f"design must be naive or interleaving, got {design!r}")
    reports = getattr(scenario, "validation", None) or {
        "T": validate_assumptions(scenario.pacing_T),
        "C": validate_assumptions(scenario.pacing_C),
    }
    for version, report in reports.items():
        failure = report.first_failure()
        if failure is not None:
            raise PreconditionError(f"policy {version} fails clause {failure.clause}")

    same_ehat = _same_array(scenario.ehat_T, scenario.ehat_C)
    same_e = _same_array(scenario.e_T, scenario.e_C)
    if not scenario.feedback:
        if design == NAIVE and not same_ehat:
            raise PreconditionError("without feedback the naive design needs identical estimated scores")
        return "no-feedback"
    kind = scenario.treatment_kind
    if kind == "item_performance":
        if not same_ehat:
            raise PreconditionError("item-performance treatment needs identical estimated scores")
        if scenario.pacing_T != scenario.pacing_C:
            raise PreconditionError("item-performance treatment needs identical pacing policies")
        if np.any(scenario.e_T < scenario.e_C):
            raise PreconditionError("item-performance treatment needs e_T >= e_C everywhere")
        return "item-performance-naive" if design == NAIVE else "item-performance-interleaving"
    if kind == "ranking_boost":
        if design != INTERLEAVING:
            raise PreconditionError("the scaled-ranking result covers the interleaving design only")
        if not (same_e and same_ehat):
            raise PreconditionError("scaled-ranking treatment needs identical realized and estimated scores")
        policy = scenario.pacing_T
        if not (isinstance(policy, AlphaScaled) and policy.base == scenario.pacing_C and policy.alpha > 1):
            raise PreconditionError("scaled-ranking treatment needs Psi_T = alpha * Psi_C with alpha > 1")
        return "scaled-ranking"
    raise PreconditionError(f"no dominance result covers treatment kind {kind!r}")


def _first_violation(design_cum, labels, gt_cum, gc_cum, t):
    """Check one run; returns (violation or None, checks, equality)."""
    violation, checks, equality = None, 0, True
    for group, ref_cum, sign in ((CONTROL, gc_cum, 1.0), (TREATMENT, gt_cum, -1.0)):
        members = np.flatnonzero(labels == group)
        # sign * (design - global) >= 0 is the required direction
        gap = sign * (design_cum[members] - ref_cum[members])
        checks += gap.size
        equality &= bool(np.all(gap == 0))
        bad = np.argwhere(gap < 0)
        if bad.size and violation is None:
            row, step = bad[0]
            seller = int(members[row])
            violation = {
                "seller": seller,
                "group": "C" if group == CONTROL else "T",
                "step": int(step),
                "t": float(t[step]),
                "design_cumulative": float(design_cum[seller, step]),
                "global_cumulative": float(ref_cum[seller, step]),
            }
    return violation, checks, equality


def _globals(scenario: Scenario, globals_):
    gt, gc = globals_ if globals_ is not None else (simulate_global(scenario, GT), simulate_global(scenario, GC))
    return gt.cumulative_outcomes(), gc.cumulative_outcomes()


def _estimate_or_nan(outcomes, labels, p_T, p_C) -> float:
    # the inequalities are still checked when a group is empty; only the estimate is undefined
    try:
        return _estimate(outcomes, labels, p_T, p_C)
    except DegenerateSampleError:
        return math.nan


def theorem_audit(scenario: Scenario, design: str, a: Assignment, globals_=None) -> AuditReport:
    """Check both dominance inequalities at every seller and grid prefix.

    Control sellers must collect at least their all-control outcome and
    Treatment sellers at most their all-treatment outcome.  ``globals_``
    may pass precomputed (GT, GC) trajectories.
    """
    theorem = audit_theorem(scenario, design)
    gt_cum, gc_cum = _globals(scenario, globals_)
    traj = simulate_design(scenario, design, a)
    violation, checks, equality = _first_violation(traj.cumulative_outcomes(), a.labels, gt_cum, gc_cum, traj.t)
    return AuditReport(
        theorem=theorem,
        design=design,
        passed=violation is None,
        checks=checks,
        gte_hat=_estimate_or_nan(integrate_outcomes(traj), a.labels, scenario.p_T, scenario.p_C),
        violation=violation,
        equality=equality,
    )


def audit_assignments(scenario: Scenario, design: str, labels, chunk: int = 128, globals_=None) -> list[AuditReport]:
    """:func:`theorem_audit` for many assignments, simulated in batches."""
    theorem = audit_theorem(scenario, design)
    gt_cum, gc_cum = _globals(scenario, globals_)
    labels = np.atleast_2d(np.asarray(labels, dtype=np.int8))
    t, dt = scenario.grid.times, scenario.grid.dt
    reports = []
    for i in range(0, len(labels), chunk):
        batch = integrate(scenario, labels[i : i + chunk], design, record=True)
        for lab, traj, total in zip(batch.labels, batch.trajectories, batch.outcomes):
            violation, checks, equality = _first_violation(np.cumsum(traj.O * dt, axis=1), lab, gt_cum, gc_cum, t)
            reports.append(
                AuditReport(
                    theorem=theorem,
                    design=design,
                    passed=violation is None,
                    checks=checks,
                    gte_hat=_estimate_or_nan(total, lab, scenario.p_T, scenario.p_C),
                    violation=violation,
                    equality=equality,
                )
            )
    return reports


# -- detection ---------------------------------------------------------------------


@dataclass
class DetectionReport:
    """Group-mean score series of one interleaving run.

    ``delta`` is mean_T(r_T) - mean_C(r_T).  ``statistic`` is the largest
    relative divergence over the grid; ``signed_statistic`` is the relative
    divergence at that same grid point, keeping its sign.
    """

    t: np.ndarray
    mean_T_rT: np.ndarray
    mean_C_rT: np.ndarray
    mean_T_rC: np.ndarray
    mean_C_rC: np.ndarray
    delta: np.ndarray
    statistic: float
    signed_statistic: float
    argmax: int
    epsilon: float = EPSILON
    lambda_bar: dict[str, np.ndarray] | None = None

    def to_dict(self) -> dict:
        out = {
            "statistic": self.statistic,
            "signed_statistic": self.signed_statistic,
            "argmax": self.argmax,
            "epsilon": self.epsilon,
        }
        if self.lambda_bar is not None:
            out["lambda_bar_final"] = {g: float(v[-1]) for g, v in self.lambda_bar.items()}
        return out


def divergence(mean_T_rT: np.ndarray, mean_C_rT: np.ndarray, epsilon: float = EPSILON):
    """Return (delta, statistic, signed_statistic, argmax) for the series."""
    delta = mean_T_rT - mean_C_rT
    rel = delta / (np.abs(mean_C_rT) + epsilon)
    k = int(np.argmax(np.abs(rel)))
    return delta, float(abs(rel[k])), float(rel[k]), k


def _group_mean(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return values[mask].mean(axis=0)


def detect_interference(traj: Trajectory, a: Assignment | None = None, epsilon: float = EPSILON) -> DetectionReport:
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    if traj.design != INTERLEAVING or np.isnan(traj.r_T).any() or np.isnan(traj.r_C).any():
        raise InvalidInputError("detection needs an interleaving run with both scores for every seller")
    labels = traj.labels if a is None else np.asarray(a.labels)
    is_T, is_C = labels == TREATMENT, labels == CONTROL
    if not is_T.any() or not is_C.any():
        raise DegenerateSampleError("detection needs nonempty treatment and control groups")
    mean_T_rT, mean_C_rT = _group_mean(traj.r_T, is_T), _group_mean(traj.r_T, is_C)
    delta, stat, signed, k = divergence(mean_T_rT, mean_C_rT, epsilon)
    lambda_bar = None
    if traj.lam_T is not None:
        lambda_bar = {
            name: _group_mean(traj.lam_T, labels == g)
            for g, name in ((TREATMENT, "T"), (CONTROL, "C"), (OTHER, "O"))
            if (labels == g).any()
        }
    return DetectionReport(
        t=traj.t,
        mean_T_rT=mean_T_rT,
        mean_C_rT=mean_C_rT,
        mean_T_rC=_group_mean(traj.r_C, is_T),
        mean_C_rC=_group_mean(traj.r_C, is_C),
        delta=delta,
        statistic=stat,
        signed_statistic=signed,
        argmax=k,
        epsilon=epsilon,
        lambda_bar=lambda_bar,
    )


def aa_twin(scenario: Scenario) -> Scenario:
    """The same platform with the control algorithm in both arms."""
    config = None
    if scenario.config is not None:
        config = dict(scenario.config, pacing={"T": scenario.pacing_C.to_spec(), "C": scenario.pacing_C.to_spec()})
    return replace(
        scenario,
        name=f"{scenario.name}-aa",
        e_T=scenario.e_C,
        ehat_T=scenario.ehat_C,
        pacing_T=scenario.pacing_C,
        treatment_kind="none",
        config=config,
    )


@dataclass
class NullCalibration:
    """Detection statistics of identical-algorithm runs over many assignments."""

    statistics: np.ndarray
    signed: np.ndarray
    quantile: float
    threshold: float
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def runs(self) -> int:
        return self.statistics.size

    def signed_mean(self) -> tuple[float, float]:
        """Mean and standard error of the signed statistic."""
        values = self.signed.tolist()
        mean = math.fsum(values) / len(values)
        se = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
        return mean, se

    def to_dict(self) -> dict:
        mean, se = self.signed_mean()
        return {
            "runs": self.runs,
            "quantile": self.quantile,
            "threshold": self.threshold,
            "statistic_mean": math.fsum(self.statistics.tolist()) / self.runs,
            "signed_mean": mean,
            "signed_stderr": se,
            "seed": self.seed,
        }


def detection_statistics(
    scenario: Scenario, runs: int, seed: int, epsilon: float = EPSILON, threads: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(statistic, signed_statistic) for ``runs`` interleaving assignments."""
    labels, _ = draw_assignments(scenario.n_sellers, scenario.p_T, scenario.p_C, runs, seed)
    stats, signed = [], []
    for result in run_batched(scenario, labels, INTERLEAVING, threads, summarize=True):
        means = result.group_means["r_T"]
        for row in means:
            _, s, sg, _ = divergence(row[TREATMENT], row[CONTROL], epsilon)
            stats.append(s)
            signed.append(sg)
    return np.array(stats), np.array(signed)


def calibrate_threshold(
    scenario: Scenario,
    runs: int = 200,
    quantile: float = 0.99,
    seed: int | None = None,
    epsilon: float = EPSILON,
    threads: int | None = None,
) -> NullCalibration:
    """Null distribution of the statistic from the scenario's A/A twin."""
    seed = scenario.seed if seed is None else int(seed)
    stats, signed = detection_statistics(aa_twin(scenario), runs, seed, epsilon, threads)
    return NullCalibration(stats, signed, quantile, float(np.quantile(stats, quantile)), seed)
