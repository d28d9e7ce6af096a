import copy

import numpy as np
import pytest

from pacinglab.scenario import SCHEMA_VERSION, build_scenario


def config(n=3, horizon=2.0, dt=0.1, e=1.0, ehat=1.0, e_T=None, ehat_T=None, pacing="identity",
           pacing_T=None, reserve=0.0, p_T=0.5, p_C=0.5, **extra):
    """Small scenario config; scalars or per-seller lists for the scores."""

    def score(v):
        return {"kind": "constant", "values": list(v)} if isinstance(v, (list, tuple)) else {"kind": "constant", "value": v}

    def policy(p):
        return {"kind": p} if isinstance(p, str) else p

    cfg = {
        "schema_version": SCHEMA_VERSION,
        "name": "test",
        "n_sellers": n,
        "horizon": horizon,
        "dt": dt,
        "p_T": p_T,
        "p_C": p_C,
        "seed": 11,
        "scores": {
            "e_C": score(e),
            "e_T": score(e if e_T is None else e_T),
            "ehat_C": score(ehat),
            "ehat_T": score(ehat if ehat_T is None else ehat_T),
        },
        "pacing": {"T": policy(pacing if pacing_T is None else pacing_T), "C": policy(pacing)},
        "reserve": {"kind": "constant", "value": reserve},
    }
    cfg.update(copy.deepcopy(extra))
    return cfg


def scenario(**kw):
    return build_scenario(config(**kw))


@pytest.fixture
def make_scenario():
    return scenario


@pytest.fixture
def damping3():
    """Three sellers under linear damping, 20 steps."""
    return scenario(
        n=3, horizon=2.0, dt=0.1, e=[1.0, 0.8, 0.6], e_T=[1.2, 1.0, 0.7], ehat=[0.9, 0.7, 0.5],
        pacing={"kind": "linear_damping", "budget": 0.5}, reserve=0.1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting -----------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.details = number, title, []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc_type is not None and not self.details:
            detail = f"{exc_type.__name__}: {exc}".splitlines()[0]
        _CRITERIA[self.number] = (status, self.title, detail)
        print(f"criterion {self.number:2d} {status}  {self.title}  {detail}")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}  {detail}")
