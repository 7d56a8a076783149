"""Shared domain types, validation, and seeded RNG-stream derivation.

Dose indices are 1-based in every public interface ("dose level j"); the
simulation internals are free to use 0-based arrays. All types are immutable
after construction; trial-state transitions return new values, so replay is
lock-free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox

__all__ = [
    "TrialSettings",
    "PriorSpec",
    "DoseData",
    "TrialState",
    "Decision",
    "Scenario",
    "ValidationError",
    "validate_settings",
    "prior_mtd_index",
    "derive_rng_stream",
    "SCENARIO_GEN_STREAM",
]

_MASK64 = (1 << 64) - 1


class ValidationError(ValueError):
    """Raised when settings/prior validation fails; carries all messages."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class Decision(Enum):
    ESCALATE = "escalate"
    STAY = "stay"
    DEESCALATE = "deescalate"
    ELIMINATE_AND_DEESCALATE = "eliminate_and_deescalate"
    TERMINATE_TRIAL = "terminate_trial"


@dataclass(frozen=True)
class TrialSettings:
    """Trial-level design parameters.

    phi1/phi2 left as None default to 0.6*phi / 1.4*phi during validation.
    """

    num_doses: int
    target: float
    max_n: int
    cohort_size: int = 3
    phi1: Optional[float] = None
    phi2: Optional[float] = None
    start_dose: int = 1

    def to_json_dict(self) -> dict:
        return {
            "num_doses": self.num_doses,
            "target": self.target,
            "phi1": self.phi1,
            "phi2": self.phi2,
            "max_n": self.max_n,
            "cohort_size": self.cohort_size,
            "start_dose": self.start_dose,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrialSettings":
        return cls(
            num_doses=int(d["num_doses"]),
            target=float(d["target"]),
            max_n=int(d["max_n"]),
            cohort_size=int(d.get("cohort_size", 3)),
            phi1=None if d.get("phi1") is None else float(d["phi1"]),
            phi2=None if d.get("phi2") is None else float(d["phi2"]),
            start_dose=int(d.get("start_dose", 1)),
        )


@dataclass(frozen=True)
class PriorSpec:
    """Skeleton and prior effective sample size, plus robust/mixture flags."""

    skeleton: tuple[float, ...]
    pess: tuple[float, ...]
    robustify: bool = False
    mixture_weight: Optional[float] = None

    def __init__(self, skeleton: Sequence[float], pess: Sequence[float],
                 robustify: bool = False, mixture_weight: Optional[float] = None):
        object.__setattr__(self, "skeleton", tuple(float(q) for q in skeleton))
        object.__setattr__(self, "pess", tuple(float(v) for v in pess))
        object.__setattr__(self, "robustify", bool(robustify))
        object.__setattr__(self, "mixture_weight",
                           None if mixture_weight is None else float(mixture_weight))

    def to_json_dict(self) -> dict:
        return {
            "skeleton": list(self.skeleton),
            "pess": list(self.pess),
            "robustify": self.robustify,
            "mixture_weight": self.mixture_weight,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PriorSpec":
        return cls(
            skeleton=[float(x) for x in d["skeleton"]],
            pess=[float(x) for x in d["pess"]],
            robustify=bool(d.get("robustify", False)),
            mixture_weight=d.get("mixture_weight"),
        )


@dataclass(frozen=True)
class DoseData:
    """Counts observed at one dose: n patients treated, y DLTs."""

    n: int = 0
    y: int = 0

    def __post_init__(self):
        if not (0 <= self.y <= self.n):
            raise ValueError(f"invalid dose data n={self.n}, y={self.y}")

    @property
    def rate(self) -> float:
        return self.y / self.n if self.n else 0.0


@dataclass(frozen=True)
class TrialState:
    """Immutable snapshot of a running trial.

    eliminated_from is a 1-based dose index: that dose and everything above
    it are out of the trial. None means nothing eliminated. history holds
    one record per applied cohort (dicts; see conduct.apply_cohort).
    """

    doses: tuple[DoseData, ...]
    current_dose: int
    eliminated_from: Optional[int] = None
    terminated: bool = False
    history: tuple = ()

    def __post_init__(self):
        if self.eliminated_from == 1 and not self.terminated:
            raise ValueError("dose 1 eliminated implies termination")
        if (self.eliminated_from is not None and not self.terminated
                and self.current_dose >= self.eliminated_from):
            raise ValueError("current dose must sit below the eliminated range")

    @property
    def num_doses(self) -> int:
        return len(self.doses)

    @property
    def total_enrolled(self) -> int:
        return sum(d.n for d in self.doses)

    def dose_data(self, j: int) -> DoseData:
        """1-based accessor."""
        return self.doses[j - 1]

    def is_admissible(self, j: int) -> bool:
        return self.eliminated_from is None or j < self.eliminated_from

    def status(self, settings: TrialSettings) -> str:
        if self.terminated:
            return "terminated"
        if self.total_enrolled >= settings.max_n:
            return "complete"
        return "active"

    @classmethod
    def fresh(cls, settings: TrialSettings) -> "TrialState":
        return cls(doses=tuple(DoseData() for _ in range(settings.num_doses)),
                   current_dose=settings.start_dose)

    def to_json_dict(self) -> dict:
        return {
            "doses": [{"n": d.n, "y": d.y} for d in self.doses],
            "current_dose": self.current_dose,
            "eliminated_from": self.eliminated_from,
            "terminated": self.terminated,
            "history": list(self.history),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrialState":
        return cls(
            doses=tuple(DoseData(int(x["n"]), int(x["y"])) for x in d["doses"]),
            current_dose=int(d["current_dose"]),
            eliminated_from=(None if d.get("eliminated_from") is None
                             else int(d["eliminated_from"])),
            terminated=bool(d.get("terminated", False)),
            history=tuple(d.get("history", ())),
        )


@dataclass(frozen=True)
class Scenario:
    """A true dose-toxicity curve with its MTD index (1-based).

    Construction rejects ties for the closest-to-target dose: downstream
    operating characteristics are meaningless when the MTD is ambiguous.
    """

    true_p: tuple[float, ...]
    mtd_index: int
    name: str = ""

    @classmethod
    def from_curve(cls, true_p: Sequence[float], target: float, name: str = "") -> "Scenario":
        p = tuple(float(x) for x in true_p)
        if any(b < a for a, b in zip(p, p[1:])):
            raise ValueError("true DLT curve must be non-decreasing")
        dist = [abs(x - target) for x in p]
        m = min(dist)
        winners = [i for i, d in enumerate(dist) if d == m]
        if len(winners) != 1:
            raise ValueError(f"MTD tie at doses {[w + 1 for w in winners]}: "
                             "scenario rejected")
        return cls(true_p=p, mtd_index=winners[0] + 1, name=name)

    def to_json_dict(self) -> dict:
        d = {"true_p": list(self.true_p), "mtd_index": self.mtd_index}
        if self.name:
            d["name"] = self.name
        return d


def prior_mtd_index(skeleton: Sequence[float], target: float) -> int:
    """1-based index j* of the skeleton value closest to the target.

    Ties are rejected: the robust prior needs an unambiguous j*.
    """
    dist = [abs(float(q) - target) for q in skeleton]
    m = min(dist)
    winners = [i for i, d in enumerate(dist) if d == m]
    if len(winners) != 1:
        raise ValidationError(
            [f"skeleton ties for the prior MTD at doses {[w + 1 for w in winners]}"])
    return winners[0] + 1


def validate_settings(settings: TrialSettings, prior: PriorSpec
                      ) -> tuple[TrialSettings, PriorSpec, int]:
    """Validate and normalize a (settings, prior) pair.

    Returns (settings with phi1/phi2 defaulted, prior, j*) or raises
    ValidationError listing every problem found.
    """
    errors: list[str] = []
    J = settings.num_doses
    phi = settings.target

    if J < 2:
        errors.append("num_doses must be at least 2")
    if not (0.0 < phi < 1.0):
        errors.append("target must lie in (0, 1)")

    phi1 = settings.phi1 if settings.phi1 is not None else 0.6 * phi
    phi2 = settings.phi2 if settings.phi2 is not None else 1.4 * phi
    if not (0.0 < phi1 < phi < phi2 < 1.0):
        errors.append(f"need 0 < phi1 < target < phi2 < 1, got "
                      f"phi1={phi1:.4g}, target={phi:.4g}, phi2={phi2:.4g}")

    if settings.cohort_size < 1:
        errors.append("cohort_size must be positive")
    elif settings.max_n < settings.cohort_size or settings.max_n % settings.cohort_size != 0:
        errors.append(f"max_n={settings.max_n} must be a positive multiple of "
                      f"cohort_size={settings.cohort_size}")
    if not (1 <= settings.start_dose <= J):
        errors.append(f"start_dose={settings.start_dose} outside 1..{J}")

    q = prior.skeleton
    if len(q) != J:
        errors.append(f"skeleton length {len(q)} != num_doses {J}")
    else:
        if any(not (0.0 < x < 1.0) for x in q):
            errors.append("skeleton values must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(q, q[1:])):
            errors.append("skeleton must be strictly increasing")
    if len(prior.pess) != J:
        errors.append(f"pess length {len(prior.pess)} != num_doses {J}")
    elif any(not np.isfinite(v) or v < 0 for v in prior.pess):
        errors.append("pess entries must be finite and non-negative")
    if prior.mixture_weight is not None and not (0.0 <= prior.mixture_weight <= 1.0):
        errors.append("mixture_weight must lie in [0, 1]")

    j_star = 0
    if len(q) == J and not errors:
        try:
            j_star = prior_mtd_index(q, phi)
        except ValidationError as e:
            errors.extend(e.errors)

    if errors:
        raise ValidationError(errors)
    normalized = replace(settings, phi1=phi1, phi2=phi2)
    return normalized, prior, j_star


# Reserved trial_id for the scenario-generation stream of each scenario_id.
SCENARIO_GEN_STREAM = 1 << 62


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: deterministic 64-bit avalanche."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_rng_stream(master_seed: int, scenario_id: int, trial_id: int) -> Generator:
    """Independent, portable RNG stream for one (seed, scenario, trial) triple.

    The triple is absorbed through a SplitMix64 chain into a 128-bit Philox
    key, so identical triples give bit-identical streams on any platform and
    distinct triples give statistically independent streams.
    """
    h = _mix64(master_seed & _MASK64)
    h = _mix64(h ^ _mix64(scenario_id & _MASK64))
    h = _mix64(h ^ _mix64(trial_id & _MASK64))
    key = np.array([h, _mix64(h)], dtype=np.uint64)
    return Generator(Philox(key=key))


def dumps_canonical(obj: dict) -> str:
    """Stable JSON encoding used for hashing and on-disk records."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
