"""Keyboard engine: equal-width key construction, posterior key masses under
the beta-binomial model, strongest-key decisions, and decision-grid tables.

Keys tile outward from the target key as far as whole keys fit inside (0, 1);
the residual edge strips are not keys and never enter the argmax. The
informative variant sets the beta prior to (n0*q, n0*(1-q)) per dose; the
mixture variant carries a two-component beta prior whose weights update with
the beta-binomial marginal likelihoods before key masses are compared.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import betainc, betaln

from .core import Decision, PriorSpec, TrialSettings, TrialState, prior_mtd_index
from .conduct import EliminationRule, elimination_min_dlt
from .priors import keyboard_hyperparams, robustify_pess

__all__ = [
    "Keys",
    "BetaMixture",
    "build_keys",
    "key_masses",
    "strongest_key",
    "keyboard_next_dose",
    "KeyboardTable",
    "keyboard_decision_table",
    "dose_beta_priors",
]

MASS_TIE_TOL = 1e-12
DEFAULT_HALF_WIDTH = 0.05

_DECISION_LETTER = {
    Decision.ESCALATE: "E",
    Decision.STAY: "S",
    Decision.DEESCALATE: "D",
    Decision.ELIMINATE_AND_DEESCALATE: "X",
    Decision.TERMINATE_TRIAL: "X",
}


@dataclass(frozen=True)
class Keys:
    edges: tuple[float, ...]   # K+1 ascending edges of the K contiguous keys
    target_index: int          # 0-based position of the target key

    @property
    def count(self) -> int:
        return len(self.edges) - 1

    def interval(self, k: int) -> tuple[float, float]:
        return self.edges[k], self.edges[k + 1]

    @property
    def target_key(self) -> tuple[float, float]:
        return self.interval(self.target_index)


@dataclass(frozen=True)
class BetaMixture:
    """Two-component beta prior: (weight, a, b) per component."""

    weights: tuple[float, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]

    @classmethod
    def single(cls, a: float, b: float) -> "BetaMixture":
        return cls(weights=(1.0,), a=(a,), b=(b,))

    @classmethod
    def informative_mixture(cls, a: float, b: float, w: float) -> "BetaMixture":
        if w >= 1.0:
            return cls.single(a, b)
        if w <= 0.0:
            return cls.single(1.0, 1.0)
        return cls(weights=(w, 1.0 - w), a=(a, 1.0), b=(b, 1.0))

    def posterior_weights(self, n: int, y: int) -> np.ndarray:
        """Component weights after seeing (n, y), via beta-binomial marginal
        likelihoods (the binomial coefficient cancels)."""
        logm = np.array([
            betaln(y + a, n - y + b) - betaln(a, b)
            for a, b in zip(self.a, self.b)
        ])
        logw = np.log(self.weights) + logm
        w = np.exp(logw - logw.max())
        return w / w.sum()


def build_keys(phi: float, half_width: float = DEFAULT_HALF_WIDTH) -> Keys:
    """Keys of width 2*half_width tiled around the target key (phi-hw, phi+hw),
    extended as far as whole keys fit inside (0, 1)."""
    if not (0.0 < phi - half_width and phi + half_width < 1.0):
        raise ValueError("target key must fit strictly inside (0, 1)")
    width = 2.0 * half_width
    n_left = int(math.floor((phi - half_width) / width + 1e-9))
    n_right = int(math.floor((1.0 - phi - half_width) / width + 1e-9))
    lo = phi - half_width - n_left * width
    edges = tuple(lo + i * width for i in range(n_left + n_right + 2))
    return Keys(edges=edges, target_index=n_left)


def key_masses(keys: Keys, prior: BetaMixture, n: int, y: int) -> np.ndarray:
    """Posterior probability mass of each key under the (possibly mixture)
    beta posterior Beta(y+a, n-y+b) per component."""
    w = prior.posterior_weights(n, y)
    edges = np.asarray(keys.edges)
    masses = np.zeros(keys.count)
    for wk, a, b in zip(w, prior.a, prior.b):
        cdf = betainc(y + a, n - y + b, edges)
        masses += wk * np.diff(cdf)
    return masses


def strongest_key(keys: Keys, prior: BetaMixture, n: int, y: int) -> int:
    """0-based index of the key with the largest posterior mass.

    Masses within 1e-12 of the maximum count as tied; ties prefer the key
    nearest the target key, then the lower (safer) side.
    """
    masses = key_masses(keys, prior, n, y)
    best = masses.max()
    tied = [k for k in range(keys.count) if best - masses[k] <= MASS_TIE_TOL]
    return min(tied, key=lambda k: (abs(k - keys.target_index), k))


def keyboard_next_dose(keys: Keys, priors: Sequence[BetaMixture],
                       state: TrialState) -> tuple[Decision, int]:
    """Strongest key left of target: escalate; target: stay; right:
    de-escalate. Clipped at the dose ladder ends and eliminated doses."""
    j = state.current_dose
    data = state.dose_data(j)
    if data.n <= 0:
        raise ValueError("no patients treated at the current dose yet")
    k = strongest_key(keys, priors[j - 1], data.n, data.y)
    if k < keys.target_index:
        nxt = j + 1
        if nxt > state.num_doses or not state.is_admissible(nxt):
            return Decision.STAY, j
        return Decision.ESCALATE, nxt
    if k > keys.target_index:
        if j == 1:
            return Decision.STAY, j
        return Decision.DEESCALATE, j - 1
    return Decision.STAY, j


def dose_beta_priors(settings: TrialSettings, prior: PriorSpec
                     ) -> tuple[list[BetaMixture], list[str]]:
    """Per-dose beta priors from a PriorSpec, applying the robust truncation
    and wrapping a mixture when a weight is set."""
    notes: list[str] = []
    j_star = prior_mtd_index(prior.skeleton, settings.target)
    pess = prior.pess
    if prior.robustify:
        pess = robustify_pess(pess, j_star, settings.num_doses)
        if pess != prior.pess:
            notes.append(f"robust prior: PESS zeroed above the prior MTD (dose {j_star})")
    out = []
    for q, n0 in zip(prior.skeleton, pess):
        a, b = keyboard_hyperparams(q, n0)
        if prior.mixture_weight is not None and n0 > 0:
            out.append(BetaMixture.informative_mixture(a, b, prior.mixture_weight))
        else:
            out.append(BetaMixture.single(a, b))
    return out, notes


@dataclass(frozen=True)
class KeyboardTable:
    """Decision grid: one letter per (dose, n, y) on the cohort grid.

    E = escalate, S = stay, D = de-escalate, X = eliminate (and de-escalate,
    or terminate at dose 1). Clipping at the ladder ends happens at conduct
    time, not in the grid.
    """

    phi: float
    keys: Keys
    n_grid: tuple[int, ...]
    grid: tuple[tuple[str, ...], ...]      # [dose][col] -> letters indexed by y
    eliminate: tuple[Optional[int], ...]   # [col]
    notes: tuple[str, ...] = ()

    @property
    def num_doses(self) -> int:
        return len(self.grid)

    def column(self, n: int) -> int:
        try:
            return self.n_grid.index(n)
        except ValueError:
            raise KeyError(f"n={n} is not a column of this table (grid {self.n_grid})")

    def decision(self, dose: int, n: int, y: int) -> Decision:
        letter = self.grid[dose - 1][self.column(n)][y]
        if letter == "X":
            return (Decision.TERMINATE_TRIAL if dose == 1
                    else Decision.ELIMINATE_AND_DEESCALATE)
        return {"E": Decision.ESCALATE, "S": Decision.STAY,
                "D": Decision.DEESCALATE}[letter]

    def to_json_dict(self) -> dict:
        return {
            "phi": self.phi,
            "target_key": list(self.keys.target_key),
            "key_edges": list(self.keys.edges),
            "n_grid": list(self.n_grid),
            "doses": [
                {"dose": j + 1,
                 "decisions": {str(n): self.grid[j][c]
                               for c, n in enumerate(self.n_grid)}}
                for j in range(self.num_doses)
            ],
            "eliminate_min": [e for e in self.eliminate],
            "notes": list(self.notes),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        max_n = max(self.n_grid)
        w.writerow(["dose", "n", *[f"y={y}" for y in range(max_n + 1)]])
        for j in range(self.num_doses):
            for c, n in enumerate(self.n_grid):
                letters = list(self.grid[j][c])
                w.writerow([j + 1, n, *letters, *[""] * (max_n - n)])
        return buf.getvalue()


def keyboard_decision_table(settings: TrialSettings, prior: PriorSpec,
                            half_width: float = DEFAULT_HALF_WIDTH,
                            rule: EliminationRule = EliminationRule()) -> KeyboardTable:
    """Enumerate every (dose, n, y) on the cohort grid and record the
    strongest-key decision, with elimination overriding as X."""
    if settings.phi1 is None or settings.phi2 is None:
        raise ValueError("settings must be validated (phi1/phi2 resolved) first")
    keys = build_keys(settings.target, half_width)
    priors, notes = dose_beta_priors(settings, prior)
    n_grid = tuple(range(settings.cohort_size, settings.max_n + 1, settings.cohort_size))
    elim = tuple(elimination_min_dlt(settings.target, n, rule) for n in n_grid)
    rows = []
    for j in range(1, settings.num_doses + 1):
        cols = []
        for c, n in enumerate(n_grid):
            letters = []
            for y in range(n + 1):
                if elim[c] is not None and y >= elim[c]:
                    letters.append("X")
                    continue
                k = strongest_key(keys, priors[j - 1], n, y)
                if k < keys.target_index:
                    letters.append("E")
                elif k > keys.target_index:
                    letters.append("D")
                else:
                    letters.append("S")
            cols.append("".join(letters))
        rows.append(tuple(cols))
    return KeyboardTable(phi=settings.target, keys=keys, n_grid=n_grid,
                         grid=tuple(rows), eliminate=elim, notes=tuple(notes))
