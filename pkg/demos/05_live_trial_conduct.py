"""Conducting a live trial: cohorts in, recommendations out, MTD at the end.

The trial state machine is pure: each cohort outcome produces a new immutable
state plus an audit record, so the whole trial replays from its event log.
This walkthrough runs a ten-cohort trial against the informative BOIN table
and finishes with the isotonic MTD selection.
"""

from dosefind import (PriorSpec, TrialSettings, TrialState, apply_cohort,
                      select_mtd, validate_settings)
from dosefind.boin import boin_next_dose, decision_table
from dosefind.simulate import build_policy, design_preset

SKELETON3 = (0.10, 0.19, 0.30, 0.42, 0.54)
settings, prior, _ = validate_settings(
    TrialSettings(num_doses=5, target=0.3, max_n=30, cohort_size=3),
    PriorSpec(SKELETON3, (3,) * 5))

table = decision_table(settings, prior)
decide = lambda st: boin_next_dose(table, st)

# one plausible sequence of cohort outcomes (DLT counts observed)
outcomes = [0, 0, 1, 2, 1, 0, 1, 1, 2, 1]

state = TrialState.fresh(settings)
print(f"trial starts at dose {state.current_dose}\n")
for n_dlt in outcomes:
    dose_before = state.current_dose
    state, decision = apply_cohort(settings, state, n_dlt, decide)
    print(f"cohort at dose {dose_before}: {n_dlt}/3 DLTs -> {decision.value:<24}"
          f" next dose {state.current_dose}")
    if state.status(settings) != "active":
        break

print(f"\ntrial status: {state.status(settings)}")
print("per-dose data:", [(d.n, d.y) for d in state.doses])

# selection uses the design's own prior pseudo-observations
policy = build_policy(design_preset("iBOIN"), settings, SKELETON3, prior.pess)
sel = select_mtd(state, settings.target, prior_counts=(policy.sel_a, policy.sel_b))
print("\nisotonic estimates:",
      ["%.3f" % v for v in sel.isotonic_estimates],
      "over doses", sel.admissible_doses)
print(f"selected MTD: dose {sel.selected_dose}")

print("\naudit log:")
for event in state.history:
    print(" ", event)
