"""Named scenario configurations.

Each preset is a plain config mapping accepted by
:func:`pacinglab.scenario.build_scenario`; ``preset_config`` hands out a
copy so callers can tweak it freely.
"""

from __future__ import annotations

import copy

from .scenario import SCHEMA_VERSION, build_scenario

# the boost preset's naive estimate exceeds the true effect by more than this
BOOST_MARGIN = 0.1

# per-seller constants keep every score continuous in time
_SELLER_EHAT = [1.0, 0.9, 0.8, 0.7, 0.6]


def _const(values):
    return {"kind": "constant", "values": list(values)} if isinstance(values, list) else {"kind": "constant", "value": values}


def _scaled(of, factor):
    return {"kind": "scaled", "of": of, "factor": factor}


PRESETS: dict[str, dict] = {
    "prop1": {
        "schema_version": SCHEMA_VERSION,
        "name": "prop1",
        "design": "naive",
        "description": "No feedback, identical estimated scores, treatment lifts realized outcomes by 50%.",
        "n_sellers": 5,
        "horizon": 2.0,
        "dt": 0.1,
        "p_T": 0.5,
        "p_C": 0.5,
        "seed": 1,
        "replications": 1000,
        "treatment_kind": "item_performance",
        "scores": {
            "e_C": {"kind": "random", "seed": 101, "distribution": "uniform", "low": 0.2, "high": 1.0},
            "e_T": _scaled("e_C", 1.5),
            "ehat_C": {"kind": "random", "seed": 102, "distribution": "uniform", "low": 0.1, "high": 1.0},
            "ehat_T": _scaled("ehat_C", 1.0),
        },
        "pacing": {"T": {"kind": "identity"}, "C": {"kind": "identity"}},
        "reserve": {"kind": "constant", "value": 0.3},
    },
    "prop2": {
        "schema_version": SCHEMA_VERSION,
        "name": "prop2",
        "design": "interleaving",
        "description": "No feedback, treatment changes both estimated and realized scores.",
        "n_sellers": 5,
        "horizon": 2.0,
        "dt": 0.1,
        "p_T": 0.5,
        "p_C": 0.5,
        "seed": 2,
        "replications": 1000,
        "treatment_kind": "item_performance",
        "scores": {
            "e_C": {"kind": "random", "seed": 201, "distribution": "uniform", "low": 0.2, "high": 1.0},
            "e_T": {"kind": "random", "seed": 202, "distribution": "uniform", "low": 0.2, "high": 1.2},
            "ehat_C": {"kind": "random", "seed": 203, "distribution": "uniform", "low": 0.1, "high": 1.0},
            "ehat_T": {"kind": "random", "seed": 204, "distribution": "uniform", "low": 0.1, "high": 1.0},
        },
        "pacing": {"T": {"kind": "identity"}, "C": {"kind": "identity"}},
        "reserve": {"kind": "constant", "value": 0.3},
    },
    "boost": {
        "schema_version": SCHEMA_VERSION,
        "name": "boost",
        "design": "naive",
        "description": (
            "No feedback, treatment multiplies estimated scores by 1.5 and leaves realized outcomes alone. "
            "The pooled ranking lets boosted sellers displace control sellers, so the naive estimate "
            "exceeds the true effect by more than 0.1."
        ),
        "n_sellers": 6,
        "horizon": 2.0,
        "dt": 0.1,
        "p_T": 0.5,
        "p_C": 0.5,
        "seed": 3,
        "replications": 1000,
        "treatment_kind": "ranking_boost",
        "scores": {
            "e_C": {"kind": "random", "seed": 301, "distribution": "uniform", "low": 0.5, "high": 1.0},
            "e_T": _scaled("e_C", 1.0),
            "ehat_C": {"kind": "random", "seed": 302, "distribution": "uniform", "low": 0.1, "high": 1.0},
            "ehat_T": _scaled("ehat_C", 1.5),
        },
        "pacing": {"T": {"kind": "identity"}, "C": {"kind": "identity"}},
        "reserve": {"kind": "constant", "value": 0.5},
    },
    "thm1": {
        "schema_version": SCHEMA_VERSION,
        "name": "thm1",
        "design": "naive",
        "description": "Linear budget damping, treatment lifts realized outcomes by 20%, naive design.",
        "n_sellers": 5,
        "horizon": 10.0,
        "dt": 0.25,
        "p_T": 0.4,
        "p_C": 0.4,
        "seed": 4,
        "replications": 1000,
        "treatment_kind": "item_performance",
        "scores": {
            "e_C": _const(1.0),
            "e_T": _scaled("e_C", 1.2),
            "ehat_C": _const(_SELLER_EHAT),
            "ehat_T": _scaled("ehat_C", 1.0),
        },
        "pacing": {"T": {"kind": "linear_damping", "budget": 3.0}, "C": {"kind": "linear_damping", "budget": 3.0}},
        "reserve": {"kind": "constant", "value": 0.05},
    },
    "thm2": {
        "schema_version": SCHEMA_VERSION,
        "name": "thm2",
        "design": "interleaving",
        "description": "Exponential budget damping, treatment lifts realized outcomes by 20%, interleaving design.",
        "n_sellers": 5,
        "horizon": 10.0,
        "dt": 0.25,
        "p_T": 0.4,
        "p_C": 0.4,
        "seed": 5,
        "replications": 1000,
        "treatment_kind": "item_performance",
        "scores": {
            "e_C": _const(1.0),
            "e_T": _scaled("e_C", 1.2),
            "ehat_C": _const(_SELLER_EHAT),
            "ehat_T": _scaled("ehat_C", 1.0),
        },
        "pacing": {
            "T": {"kind": "exponential_damping", "budget": 2.0},
            "C": {"kind": "exponential_damping", "budget": 2.0},
        },
        "reserve": {"kind": "constant", "value": 0.05},
    },
    "thm3": {
        "schema_version": SCHEMA_VERSION,
        "name": "thm3",
        "design": "interleaving",
        "description": (
            "Linear budget damping with a binding reserve and a promotion slot that rotates through the "
            "sellers.  Treatment scales the paced score by 1.5, so treated sellers keep clearing the "
            "reserve after control sellers have stopped."
        ),
        "n_sellers": 12,
        "horizon": 16.0,
        "dt": 0.05,
        "p_T": 0.5,
        "p_C": 0.5,
        "seed": 6,
        "replications": 1000,
        "treatment_kind": "ranking_boost",
        "scores": {
            "e_C": _const(1.0),
            "e_T": _scaled("e_C", 1.0),
            "ehat_C": {"kind": "rotating", "value": 1.0, "boost": 0.2, "period": 0.25},
            "ehat_T": _scaled("ehat_C", 1.0),
        },
        "pacing": {
            "T": {"kind": "alpha_scaled", "alpha": 1.5, "base": {"kind": "linear_damping", "budget": 4.0}},
            "C": {"kind": "linear_damping", "budget": 4.0},
        },
        "reserve": {"kind": "constant", "value": 1.0},
    },
    "sec5": {
        "schema_version": SCHEMA_VERSION,
        "name": "sec5",
        "design": "interleaving",
        "description": (
            "Ratio-state lambda calibration.  Estimated scores overstate realized value 3.5-fold and "
            "occasional demand spikes lift single sellers.  Treatment narrows the lambda range to "
            "[0.8, 1.25] and damps its response (gain 0.3); control keeps [0.5, 2] with gain 1."
        ),
        "n_sellers": 100,
        "horizon": 160.0,
        "dt": 0.01,
        "p_T": 0.4,
        "p_C": 0.4,
        "seed": 7,
        "replications": 1000,
        "treatment_kind": "lambda_range",
        "initial_state": 0.4,
        "scores": {
            "e_C": {"kind": "random", "seed": 701, "distribution": "bernoulli", "prob": 0.02, "scale": 0.3, "offset": 1.0},
            "e_T": _scaled("e_C", 1.0),
            "ehat_C": _scaled("e_C", 3.5),
            "ehat_T": _scaled("e_C", 3.5),
        },
        "pacing": {
            "T": {"kind": "lambda_calibration", "lambda_min": 0.8, "lambda_max": 1.25, "gain": 0.3},
            "C": {"kind": "lambda_calibration", "lambda_min": 0.5, "lambda_max": 2.0, "gain": 1.0},
        },
        "reserve": {"kind": "random", "seed": 702, "distribution": "uniform", "low": 1.5, "high": 2.5},
    },
}

# identical algorithms in both arms on the sec5 platform
PRESETS["aa"] = copy.deepcopy(PRESETS["sec5"])
PRESETS["aa"].update(
    name="aa",
    description="The sec5 platform with the control calibration in both arms.",
    treatment_kind="none",
    pacing={"T": dict(PRESETS["sec5"]["pacing"]["C"]), "C": dict(PRESETS["sec5"]["pacing"]["C"])},
)


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_config(name: str) -> dict:
    from .errors import ConfigurationError

    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def load_preset(name: str, *, dt: float | None = None):
    return build_scenario(preset_config(name), dt=dt)
