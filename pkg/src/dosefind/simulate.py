"""Monte Carlo engine: scenario generation, vectorized trial replay, and
operating-characteristic aggregation.

Every trial owns an RNG stream keyed by (master_seed, scenario_id, trial_id),
and patient-level DLT indicators are drawn as uniforms compared against the
true curve, so results are bit-identical for any worker count and all designs
see common random numbers: a design with PESS = 0 walks exactly the same dose
path as its noninformative counterpart, trial by trial.

Trials of one (design, scenario) block advance together as numpy arrays; the
per-cohort decision is an integer table lookup for BOIN/keyboard and a batch
posterior-mean computation for CRM. MTD selection at the end is a vectorized
weighted isotonic regression using the min-max representation of the
projection (exact for the handful of admissible doses a trial can have).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (SCENARIO_GEN_STREAM, PriorSpec, Scenario, TrialSettings,
                   derive_rng_stream, prior_mtd_index, validate_settings)
from .conduct import FLAT_PRIOR_COUNT, EliminationRule, elimination_min_dlt
from .crm import DEFAULT_NONINFORMATIVE_SIGMA2, CrmBatch, CrmModel
from .priors import calibrate_sigma, moment_match, robustify_pess
from . import boin, keyboard

__all__ = [
    "REFERENCE_SCENARIOS",
    "REFERENCE_SKELETONS",
    "DesignConfig",
    "design_preset",
    "SimulationPlan",
    "OpCharacteristics",
    "SimulationResult",
    "generate_random_scenario",
    "misspecified_family",
    "run_simulation",
    "write_oc_csv",
    "write_summary_csv",
]

REJECTION_BUDGET = 10 ** 6

# Benchmark dose-toxicity scenarios (true curve, elicited prior curve); target 0.30.
REFERENCE_SCENARIOS: tuple[dict, ...] = (
    {"name": "Scenario 1", "true_p": (0.30, 0.42, 0.50, 0.60, 0.65),
     "skeleton": (0.30, 0.42, 0.54, 0.64, 0.73)},
    {"name": "Scenario 2", "true_p": (0.15, 0.27, 0.40, 0.50, 0.65),
     "skeleton": (0.19, 0.30, 0.42, 0.54, 0.64)},
    {"name": "Scenario 3", "true_p": (0.08, 0.15, 0.31, 0.45, 0.55),
     "skeleton": (0.10, 0.19, 0.30, 0.42, 0.54)},
    {"name": "Scenario 4", "true_p": (0.09, 0.12, 0.15, 0.30, 0.45),
     "skeleton": (0.04, 0.10, 0.19, 0.30, 0.42)},
    {"name": "Scenario 5", "true_p": (0.05, 0.08, 0.10, 0.14, 0.30),
     "skeleton": (0.01, 0.04, 0.10, 0.19, 0.30)},
    {"name": "Scenario 6", "true_p": (0.09, 0.12, 0.15, 0.30, 0.45),
     "skeleton": (0.01, 0.04, 0.10, 0.19, 0.30)},
    {"name": "Scenario 7", "true_p": (0.08, 0.15, 0.31, 0.45, 0.55),
     "skeleton": (0.19, 0.30, 0.42, 0.54, 0.64)},
    {"name": "Scenario 8", "true_p": (0.08, 0.15, 0.31, 0.45, 0.55),
     "skeleton": (0.01, 0.04, 0.10, 0.19, 0.30)},
    {"name": "Scenario 9", "true_p": (0.04, 0.08, 0.10, 0.18, 0.27),
     "skeleton": (0.04, 0.09, 0.30, 0.40, 0.45)},
    {"name": "Scenario 10", "true_p": (0.08, 0.10, 0.28, 0.40, 0.45),
     "skeleton": (0.30, 0.42, 0.54, 0.64, 0.73)},
)

# Elicited skeletons of the correctly-specified scenarios, keyed by prior MTD level.
REFERENCE_SKELETONS: dict[int, tuple[float, ...]] = {
    1: (0.30, 0.42, 0.54, 0.64, 0.73),
    2: (0.19, 0.30, 0.42, 0.54, 0.64),
    3: (0.10, 0.19, 0.30, 0.42, 0.54),
    4: (0.04, 0.10, 0.19, 0.30, 0.42),
    5: (0.01, 0.04, 0.10, 0.19, 0.30),
}

MISSPECIFICATION_LEVELS = {
    "one-below": (+1, (2, 3, 4, 5)),   # prior MTD one below the true MTD
    "one-above": (-1, (1, 2, 3, 4)),
    "two-below": (+2, (3, 4, 5)),
    "two-above": (-2, (1, 2, 3)),
}


# ---------------------------------------------------------------------------
# scenario generation
# ---------------------------------------------------------------------------

_ATTEMPT_BATCH = 500
_BATCHES_PER_BOUND = 40     # 20k attempts per drawn upper bound


def _generate_scenario_at(phi: float, J: int, mtd_level: int, rng) -> Scenario:
    """Rejection-sample a sorted curve whose unique MTD is mtd_level (1-based).

    Upper bound B = phi + (1-phi)*M with M ~ Beta(max(J-j, 0.5), 1); candidate
    curves are J sorted uniforms on [0, B], accepted when the MTD lands on the
    requested level within [phi-0.05, phi+0.05] and both MTD-adjacent gaps lie
    strictly inside (0.05, 0.3). Some (level, M) pairs make the constraints
    contradictory (a B barely above phi leaves no room for the upper gap), so
    M is redrawn after a bounded number of failed attempts. Attempts are drawn
    in batches; the accepted curve is the same one a per-attempt loop over the
    stream would find.
    """
    j = mtd_level - 1
    shape = max(J - mtd_level, 0.5)
    attempts = 0
    while attempts < REJECTION_BUDGET:
        M = rng.random() ** (1.0 / shape)        # Beta(shape, 1) by inversion
        B = phi + (1.0 - phi) * M
        for _ in range(_BATCHES_PER_BOUND):
            attempts += _ATTEMPT_BATCH
            p = np.sort(rng.random((_ATTEMPT_BATCH, J)) * B, axis=1)
            dist = np.abs(p - phi)
            closest = np.argmin(dist, axis=1)
            ok = closest == j
            ok &= np.count_nonzero(dist == dist[np.arange(len(p)), closest][:, None],
                                   axis=1) == 1
            ok &= dist[:, j] <= 0.05
            if j + 1 < J:
                gap = p[:, j + 1] - p[:, j]
                ok &= (gap > 0.05) & (gap < 0.3)
            if j > 0:
                gap = p[:, j] - p[:, j - 1]
                ok &= (gap > 0.05) & (gap < 0.3)
            hits = np.nonzero(ok)[0]
            if hits.size:
                row = p[hits[0]]
                return Scenario(true_p=tuple(float(x) for x in row),
                                mtd_index=mtd_level)
    raise RuntimeError(f"rejection budget exhausted for MTD level {mtd_level}")


def generate_random_scenario(phi: float, J: int, rng) -> Scenario:
    """Random scenario with the MTD level uniform over 1..J."""
    level = int(rng.random() * J) + 1
    return _generate_scenario_at(phi, J, level, rng)


def misspecified_family(kind: str, phi: float, rng,
                        skeleton_bank: Optional[dict[int, tuple[float, ...]]] = None
                        ) -> tuple[Scenario, tuple[float, ...]]:
    """Random scenario plus a prior skeleton whose prior MTD is offset from
    the true MTD by the requested misspecification."""
    if kind not in MISSPECIFICATION_LEVELS:
        raise ValueError(f"unknown misspecification kind {kind!r}")
    bank = REFERENCE_SKELETONS if skeleton_bank is None else skeleton_bank
    J = len(next(iter(bank.values())))
    offset, levels = MISSPECIFICATION_LEVELS[kind]
    level = levels[int(rng.random() * len(levels))]
    scenario = _generate_scenario_at(phi, J, level, rng)
    return scenario, tuple(bank[level - offset])


# ---------------------------------------------------------------------------
# design configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignConfig:
    """One design arm of a simulation plan.

    informative arms consume the scenario's assigned skeleton with the plan's
    PESS; fixed_skeleton overrides the assignment (a noninformative CRM
    baseline must not inherit a scenario-located skeleton). sigma2 overrides
    the CRM prior variance; informative CRM arms default to calibrating it so
    the PESS at the prior MTD matches the plan's PESS there.
    """

    name: str
    method: str                      # "boin" | "keyboard" | "crm"
    informative: bool = False
    robust: bool = False
    mixture_weight: Optional[float] = None
    sigma2: Optional[float] = None
    fixed_skeleton: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.method not in ("boin", "keyboard", "crm"):
            raise ValueError(f"unknown design method {self.method!r}")
        if self.method == "crm" and (self.robust or self.mixture_weight is not None):
            raise ValueError("robust/mixture transforms apply to interval designs only")

    def to_json_dict(self) -> dict:
        d = {"name": self.name, "method": self.method, "informative": self.informative}
        if self.robust:
            d["robust"] = True
        if self.mixture_weight is not None:
            d["mixture_weight"] = self.mixture_weight
        if self.sigma2 is not None:
            d["sigma2"] = self.sigma2
        if self.fixed_skeleton is not None:
            d["fixed_skeleton"] = list(self.fixed_skeleton)
        return d


_PRESETS: dict[str, dict] = {
    "BOIN": dict(method="boin", informative=False),
    "iBOIN": dict(method="boin", informative=True),
    "iBOIN_R": dict(method="boin", informative=True, robust=True),
    "iBOIN_M50": dict(method="boin", informative=True, mixture_weight=0.5),
    "iBOIN_M90": dict(method="boin", informative=True, mixture_weight=0.9),
    "Keyboard": dict(method="keyboard", informative=False),
    "iKeyboard": dict(method="keyboard", informative=True),
    "iKeyboard_R": dict(method="keyboard", informative=True, robust=True),
    "iKeyboard_M50": dict(method="keyboard", informative=True, mixture_weight=0.5),
    "iKeyboard_M90": dict(method="keyboard", informative=True, mixture_weight=0.9),
    "CRM": dict(method="crm", informative=False),
    "iCRM": dict(method="crm", informative=True),
}


def design_preset(name: str, **overrides) -> DesignConfig:
    if name not in _PRESETS:
        raise ValueError(f"unknown design preset {name!r}; "
                         f"known: {', '.join(sorted(_PRESETS))}")
    return DesignConfig(name=name, **{**_PRESETS[name], **overrides})


def _design_from_json(entry) -> DesignConfig:
    if isinstance(entry, str):
        return design_preset(entry)
    entry = dict(entry)
    name = entry.pop("name")
    if "method" not in entry and name in _PRESETS:
        base = {**_PRESETS[name], **entry}
    else:
        base = entry
    if "fixed_skeleton" in base and base["fixed_skeleton"] is not None:
        base["fixed_skeleton"] = tuple(float(x) for x in base["fixed_skeleton"])
    return DesignConfig(name=name, **base)


# ---------------------------------------------------------------------------
# simulation plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanScenario:
    scenario: Scenario
    skeleton: tuple[float, ...]


@dataclass(frozen=True)
class RandomScenarioSpec:
    count: int
    misspecification: str = "correct"   # correct | one-below | one-above | two-below | two-above

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("random scenario count must be positive")
        if self.misspecification != "correct" and \
                self.misspecification not in MISSPECIFICATION_LEVELS:
            raise ValueError(f"unknown misspecification {self.misspecification!r}")


@dataclass(frozen=True)
class SimulationPlan:
    settings: TrialSettings
    prior: PriorSpec
    designs: tuple[DesignConfig, ...]
    n_trials: int
    master_seed: int
    scenarios: tuple[PlanScenario, ...] = ()
    random_scenarios: Optional[RandomScenarioSpec] = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if not self.designs:
            raise ValueError("plan needs at least one design")
        if not self.scenarios and self.random_scenarios is None:
            raise ValueError("plan needs fixed scenarios or a random-scenario spec")

    @classmethod
    def from_json_dict(cls, d: dict) -> "SimulationPlan":
        settings = TrialSettings.from_json_dict(d["settings"])
        prior = PriorSpec.from_json_dict(d["prior"])
        settings, prior, _ = validate_settings(settings, prior)
        designs = tuple(_design_from_json(e) for e in d["designs"])
        scenarios: list[PlanScenario] = []
        for s in d.get("scenarios", ()):
            scen = Scenario.from_curve(s["true_p"], settings.target,
                                       name=s.get("name", ""))
            skel = tuple(float(x) for x in s.get("skeleton", prior.skeleton))
            scenarios.append(PlanScenario(scenario=scen, skeleton=skel))
        rand = None
        if "random_scenarios" in d and d["random_scenarios"] is not None:
            r = d["random_scenarios"]
            rand = RandomScenarioSpec(count=int(r["count"]),
                                      misspecification=r.get("misspecification", "correct"))
        return cls(settings=settings, prior=prior, designs=designs,
                   n_trials=int(d["n_trials"]), master_seed=int(d["master_seed"]),
                   scenarios=tuple(scenarios), random_scenarios=rand)

    def to_json_dict(self) -> dict:
        d = {
            "settings": self.settings.to_json_dict(),
            "prior": self.prior.to_json_dict(),
            "designs": [c.to_json_dict() for c in self.designs],
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
        }
        if self.scenarios:
            d["scenarios"] = [
                dict(ps.scenario.to_json_dict(), skeleton=list(ps.skeleton))
                for ps in self.scenarios
            ]
        if self.random_scenarios is not None:
            d["random_scenarios"] = {
                "count": self.random_scenarios.count,
                "misspecification": self.random_scenarios.misspecification,
            }
        return d


@dataclass(frozen=True)
class OpCharacteristics:
    pcs: float
    pct_at_mtd: float
    pct_above_mtd: float
    risk_overdosing: float
    risk_poor_allocation: float

    def __post_init__(self):
        for name in ("pcs", "pct_at_mtd", "pct_above_mtd",
                     "risk_overdosing", "risk_poor_allocation"):
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise ValueError(f"{name}={v} outside [0, 100]")


@dataclass
class SimulationResult:
    plan: SimulationPlan
    rows: list[dict]            # one per design x scenario
    scenarios: list[PlanScenario]
    trials: Optional[list[dict]] = None

    def summary(self) -> list[dict]:
        """Per-design means and standard deviations of each metric over
        scenarios (the boxplot-style aggregate for random-scenario studies)."""
        metrics = ("pcs", "pct_at_mtd", "pct_above_mtd",
                   "risk_overdosing", "risk_poor_allocation")
        out = []
        for cfg in self.plan.designs:
            rows = [r for r in self.rows if r["design"] == cfg.name]
            entry = {"design": cfg.name, "n_scenarios": len(rows)}
            for m in metrics:
                vals = np.array([r[m] for r in rows])
                entry[f"mean_{m}"] = float(vals.mean())
                entry[f"sd_{m}"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            out.append(entry)
        return out

    def to_json_dict(self) -> dict:
        return {
            "plan": self.plan.to_json_dict(),
            "conventions": {
                "pcs_denominator": "all simulated trials; early-terminated trials "
                                   "select no dose and count as incorrect",
                "patient_percentages": "computed over actually enrolled patients",
            },
            "rows": self.rows,
            "summary": self.summary(),
        }


# ---------------------------------------------------------------------------
# policies: per (design, skeleton) decision machinery for the vectorized runner
# ---------------------------------------------------------------------------

class _TablePolicy:
    kind = "table"

    def __init__(self, actions: np.ndarray, sel_a: np.ndarray, sel_b: np.ndarray):
        self.actions = actions    # int8 [J, N+1, N+1]: -1 de-escalate, 0 stay, +1 escalate
        self.sel_a = sel_a
        self.sel_b = sel_b


class _CrmPolicy:
    kind = "crm"

    def __init__(self, batch: CrmBatch, sel_a: np.ndarray, sel_b: np.ndarray):
        self.batch = batch
        self.sel_a = sel_a
        self.sel_b = sel_b


def _selection_counts(skeleton: tuple[float, ...], eff_pess: tuple[float, ...]
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Per-dose prior pseudo-observations used by MTD selection for interval
    designs: (n0*q, n0*(1-q)) wherever the effective PESS is positive, the
    flat 0.05 elsewhere."""
    a = np.array([n0 * q if n0 > 0 else FLAT_PRIOR_COUNT
                  for q, n0 in zip(skeleton, eff_pess)])
    b = np.array([n0 * (1.0 - q) if n0 > 0 else FLAT_PRIOR_COUNT
                  for q, n0 in zip(skeleton, eff_pess)])
    return a, b


_policy_cache: dict = {}


def build_policy(config: DesignConfig, settings: TrialSettings,
                 skeleton: tuple[float, ...], pess: tuple[float, ...],
                 plan_mixture_weight: Optional[float] = None):
    """Assemble the decision machinery for one design on one skeleton.

    Cached per process: random-scenario studies reuse a handful of skeletons
    across thousands of scenarios. Selection pseudo-counts follow the design's
    own prior: (n0*q, n0*(1-q)) for interval designs (scaled by the mixture
    weight when one is set), the moment-matched induced beta for CRM arms.
    """
    if config.fixed_skeleton is not None:
        skeleton = config.fixed_skeleton
    w = config.mixture_weight if config.mixture_weight is not None else plan_mixture_weight
    key = (config, settings, skeleton, pess, w)
    hit = _policy_cache.get(key)
    if hit is not None:
        return hit

    J, N = settings.num_doses, settings.max_n
    phi = settings.target

    if config.method == "crm":
        if config.sigma2 is not None:
            sigma2 = config.sigma2
        elif config.informative:
            j_star = prior_mtd_index(skeleton, phi)
            sigma2 = calibrate_sigma(skeleton, j_star, pess[j_star - 1])
        else:
            sigma2 = DEFAULT_NONINFORMATIVE_SIGMA2
        ab = [moment_match(q, sigma2) for q in skeleton]
        policy = _CrmPolicy(CrmBatch(CrmModel(skeleton, sigma2)),
                            np.array([x.a for x in ab]),
                            np.array([x.b for x in ab]))
        _policy_cache[key] = policy
        return policy

    if config.informative:
        prior = PriorSpec(skeleton, pess, robustify=config.robust, mixture_weight=w)
        eff = robustify_pess(pess, prior_mtd_index(skeleton, phi), J) \
            if config.robust else pess
        if w is not None:
            eff = tuple(w * v for v in eff)
    else:
        prior = PriorSpec(skeleton, (0.0,) * J)
        eff = (0.0,) * J

    actions = np.zeros((J, N + 1, N + 1), dtype=np.int8)
    if config.method == "boin":
        table = boin.decision_table(settings, prior)
        for j in range(J):
            for c, n in enumerate(table.n_grid):
                ys = np.arange(n + 1)
                actions[j, n, :n + 1] = np.where(
                    ys <= table.escalate[j][c], 1,
                    np.where(ys >= table.deescalate[j][c], -1, 0))
    else:
        table = keyboard.keyboard_decision_table(settings, prior)
        lut = {"E": 1, "S": 0, "D": -1, "X": -1}
        for j in range(J):
            for c, n in enumerate(table.n_grid):
                actions[j, n, :n + 1] = [lut[ch] for ch in table.grid[j][c]]
    policy = _TablePolicy(actions, *_selection_counts(skeleton, eff))
    _policy_cache[key] = policy
    return policy


# ---------------------------------------------------------------------------
# vectorized trial replay
# ---------------------------------------------------------------------------

def _elimination_array(settings: TrialSettings,
                       rule: EliminationRule = EliminationRule()) -> np.ndarray:
    """elim[n] = smallest DLT count that eliminates at n patients (n+1 when
    no count can)."""
    N = settings.max_n
    elim = np.full(N + 1, N + 2, dtype=np.int64)
    for n in range(1, N + 1):
        v = elimination_min_dlt(settings.target, n, rule)
        elim[n] = (n + 1) if v is None else v
    return elim


def _run_block(policy, settings: TrialSettings, true_p: np.ndarray,
               uniforms: np.ndarray, elim: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Replay one block of trials under one design.

    Returns (n, y, elim_from) with elim_from in 0..J (J = nothing eliminated;
    0 = dose 1 eliminated, trial terminated without selection).
    """
    J, N, cohort = settings.num_doses, settings.max_n, settings.cohort_size
    T = uniforms.shape[0]
    n = np.zeros((T, J), dtype=np.int64)
    y = np.zeros((T, J), dtype=np.int64)
    d = np.full(T, settings.start_dose - 1, dtype=np.int64)
    elim_from = np.full(T, J, dtype=np.int64)
    active = np.ones(T, dtype=bool)
    steps = N // cohort

    for step in range(steps):
        if not active.any():
            break
        idx = np.where(active)[0]
        dd = d[idx]
        dlts = (uniforms[idx, step * cohort:(step + 1) * cohort]
                < true_p[dd][:, None]).sum(axis=1)
        n[idx, dd] += cohort
        y[idx, dd] += dlts
        nd = n[idx, dd]
        yd = y[idx, dd]

        trig = yd >= elim[nd]
        elim_from[idx] = np.where(trig, np.minimum(elim_from[idx], dd), elim_from[idx])
        active[idx[trig & (dd == 0)]] = False
        if step == steps - 1:
            break

        if policy.kind == "table":
            act = policy.actions[dd, nd, yd].astype(np.int64)
        else:
            phat = policy.batch.posterior_means(n[idx], y[idx])
            dist = np.abs(phat - settings.target)
            dist[np.arange(J)[None, :] >= elim_from[idx][:, None]] = np.inf
            cand = np.argmin(dist, axis=1)
            act = np.clip(cand - dd, -1, 1)
        act = np.where(trig, -1, act)
        nxt = dd + act
        blocked = (act == 1) & (nxt >= np.minimum(elim_from[idx], J))
        nxt = np.where(blocked, dd, nxt)
        d[idx] = np.clip(nxt, 0, J - 1)

    return n, y, elim_from


# exact weighted isotonic regression for m <= 6 points via the min-max
# representation iso_i = min_{v >= i} max_{u <= i} weighted-mean(u..v)
def _batch_pava(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    T, m = values.shape
    sw = np.cumsum(weights, axis=1)
    svw = np.cumsum(weights * values, axis=1)
    zeros = np.zeros((T, 1))
    sw = np.hstack([zeros, sw])
    svw = np.hstack([zeros, svw])
    mean = np.empty((T, m, m))
    for u in range(m):
        for v in range(u, m):
            mean[:, u, v] = (svw[:, v + 1] - svw[:, u]) / (sw[:, v + 1] - sw[:, u])
    iso = np.empty((T, m))
    for i in range(m):
        inner = mean[:, :i + 1, i:].max(axis=1)   # max over u <= i, per v >= i
        iso[:, i] = inner.min(axis=1)
    return iso


def _select_batch(n: np.ndarray, y: np.ndarray, elim_from: np.ndarray,
                  sel_a: np.ndarray, sel_b: np.ndarray, phi: float) -> np.ndarray:
    """Vectorized MTD selection; returns 0-based doses, -1 = none selected."""
    T, J = n.shape
    selected = np.full(T, -1, dtype=np.int64)
    tried = n > 0
    admissible = tried & (np.arange(J)[None, :] < elim_from[:, None])
    ok = (elim_from > 0) & admissible.any(axis=1)
    if not ok.any():
        return selected

    ok_idx = np.nonzero(ok)[0]
    uniq, inverse = np.unique(admissible[ok_idx], axis=0, return_inverse=True)
    for gi in range(len(uniq)):
        cols = np.nonzero(uniq[gi])[0]
        rows = ok_idx[inverse == gi]
        a = y[rows][:, cols] + sel_a[cols][None, :]
        b = n[rows][:, cols] - y[rows][:, cols] + sel_b[cols][None, :]
        mean = a / (a + b)
        var = a * b / ((a + b) ** 2 * (a + b + 1.0))
        iso = _batch_pava(mean, 1.0 / var)
        iso = iso + (np.arange(len(cols)) + 1)[None, :] * 1e-10
        pick = np.argmin(np.abs(iso - phi), axis=1)
        selected[rows] = cols[pick]
    return selected


def _trial_uniforms(master_seed: int, scenario_id: int, n_trials: int,
                    max_n: int) -> np.ndarray:
    u = np.empty((n_trials, max_n))
    for t in range(n_trials):
        u[t] = derive_rng_stream(master_seed, scenario_id, t).random(max_n)
    return u


def _aggregate(settings: TrialSettings, scenario: Scenario, design: str,
               n: np.ndarray, y: np.ndarray, elim_from: np.ndarray,
               selected: np.ndarray) -> dict:
    T = n.shape[0]
    mtd0 = scenario.mtd_index - 1
    enrolled = n.sum(axis=1)
    at_mtd = n[:, mtd0]
    above = n[:, mtd0 + 1:].sum(axis=1)
    oc = OpCharacteristics(
        pcs=100.0 * float(np.mean(selected == mtd0)),
        pct_at_mtd=100.0 * float(at_mtd.sum() / enrolled.sum()),
        pct_above_mtd=100.0 * float(above.sum() / enrolled.sum()),
        risk_overdosing=100.0 * float(np.mean(above >= 0.5 * enrolled)),
        risk_poor_allocation=100.0 * float(np.mean(at_mtd < 6)),
    )
    return {
        "design": design,
        "scenario": scenario.name,
        "mtd": scenario.mtd_index,
        "n_trials": T,
        "pcs": oc.pcs,
        "pct_at_mtd": oc.pct_at_mtd,
        "pct_above_mtd": oc.pct_above_mtd,
        "risk_overdosing": oc.risk_overdosing,
        "risk_poor_allocation": oc.risk_poor_allocation,
        "mean_enrolled": float(enrolled.mean()),
        "pct_terminated": 100.0 * float(np.mean(elim_from == 0)),
    }


def _resolve_scenarios(plan: SimulationPlan) -> list[PlanScenario]:
    if plan.scenarios:
        out = []
        for i, ps in enumerate(plan.scenarios):
            scen = ps.scenario
            if not scen.name:
                scen = Scenario(true_p=scen.true_p, mtd_index=scen.mtd_index,
                                name=f"scenario_{i + 1}")
            out.append(PlanScenario(scenario=scen, skeleton=ps.skeleton))
        return out
    spec = plan.random_scenarios
    if plan.settings.num_doses != 5:
        raise ValueError("random-scenario studies pair scenarios with the "
                         "five-dose skeleton bank; num_doses must be 5")
    out = []
    for i in range(spec.count):
        rng = derive_rng_stream(plan.master_seed, i, SCENARIO_GEN_STREAM)
        if spec.misspecification == "correct":
            scen = generate_random_scenario(plan.settings.target,
                                            plan.settings.num_doses, rng)
            skel = REFERENCE_SKELETONS[scen.mtd_index]
        else:
            scen, skel = misspecified_family(spec.misspecification,
                                             plan.settings.target, rng)
        scen = Scenario(true_p=scen.true_p, mtd_index=scen.mtd_index,
                        name=f"random_{i + 1}")
        out.append(PlanScenario(scenario=scen, skeleton=skel))
    return out


def _simulate_one_scenario(plan: SimulationPlan, scenario_id: int,
                           ps: PlanScenario, emit_trials: bool
                           ) -> tuple[list[dict], list[dict]]:
    settings = plan.settings
    elim = _elimination_array(settings)
    uniforms = _trial_uniforms(plan.master_seed, scenario_id,
                               plan.n_trials, settings.max_n)
    true_p = np.asarray(ps.scenario.true_p)
    rows, trial_records = [], []
    for cfg in plan.designs:
        policy = build_policy(cfg, settings, ps.skeleton, plan.prior.pess,
                              plan.prior.mixture_weight)
        n, y, elim_from = _run_block(policy, settings, true_p, uniforms, elim)
        selected = _select_batch(n, y, elim_from, policy.sel_a, policy.sel_b,
                                 settings.target)
        rows.append(_aggregate(settings, ps.scenario, cfg.name,
                               n, y, elim_from, selected))
        if emit_trials:
            for t in range(plan.n_trials):
                trial_records.append({
                    "design": cfg.name,
                    "scenario": ps.scenario.name,
                    "trial": t,
                    "npts": n[t].tolist(),
                    "ndlt": y[t].tolist(),
                    "selected": None if selected[t] < 0 else int(selected[t]) + 1,
                    "eliminated_from": None if elim_from[t] >= settings.num_doses
                                       else int(elim_from[t]) + 1,
                })
    return rows, trial_records


def _worker(args):
    plan, scenario_id, ps, emit_trials = args
    return scenario_id, _simulate_one_scenario(plan, scenario_id, ps, emit_trials)


def run_simulation(plan: SimulationPlan, workers: int = 1,
                   emit_trials: bool = False,
                   progress: Optional[Callable[[int, int], None]] = None,
                   cancelled: Optional[Callable[[], bool]] = None
                   ) -> Optional[SimulationResult]:
    """Run the full plan; deterministic for a fixed master seed regardless of
    the worker count (each trial owns its own counter-derived stream and the
    reduction is ordered by scenario).

    Returns None when `cancelled` reports True before completion.
    """
    scenarios = _resolve_scenarios(plan)
    total = len(scenarios)
    results: dict[int, tuple[list[dict], list[dict]]] = {}

    if workers <= 1:
        for i, ps in enumerate(scenarios):
            if cancelled is not None and cancelled():
                return None
            results[i] = _simulate_one_scenario(plan, i, ps, emit_trials)
            if progress is not None:
                progress(i + 1, total)
    else:
        import multiprocessing as mp
        jobs = [(plan, i, ps, emit_trials) for i, ps in enumerate(scenarios)]
        with mp.Pool(processes=workers) as pool:
            done = 0
            for scenario_id, payload in pool.imap_unordered(_worker, jobs, chunksize=1):
                results[scenario_id] = payload
                done += 1
                if progress is not None:
                    progress(done, total)
                if cancelled is not None and cancelled():
                    pool.terminate()
                    return None

    rows: list[dict] = []
    trials: list[dict] = []
    for i in range(total):
        r, t = results[i]
        rows.extend(r)
        trials.extend(t)
    # group rows by design for stable output: design-major, scenario order
    by_design = {cfg.name: [] for cfg in plan.designs}
    for r in rows:
        by_design[r["design"]].append(r)
    ordered = [r for cfg in plan.designs for r in by_design[cfg.name]]
    return SimulationResult(plan=plan, rows=ordered, scenarios=scenarios,
                            trials=trials if emit_trials else None)


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

_OC_COLUMNS = ("design", "scenario", "mtd", "n_trials", "pcs", "pct_at_mtd",
               "pct_above_mtd", "risk_overdosing", "risk_poor_allocation",
               "mean_enrolled", "pct_terminated")


def write_oc_csv(result: SimulationResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_OC_COLUMNS)
    for r in result.rows:
        w.writerow([r["design"], r["scenario"], r["mtd"], r["n_trials"],
                    *[f"{r[k]:.4f}" for k in _OC_COLUMNS[4:]]])
    return buf.getvalue()


def write_summary_csv(result: SimulationResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = result.summary()
    cols = list(rows[0].keys())
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], (str, int)) else f"{r[c]:.4f}"
                    for c in cols])
    return buf.getvalue()


def write_trials_jsonl(result: SimulationResult) -> str:
    if result.trials is None:
        raise ValueError("plan was run without emit_trials")
    return "\n".join(json.dumps(t, sort_keys=True) for t in result.trials) + "\n"
