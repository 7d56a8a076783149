"""Pre-tabulated decision rules: the whole trial protocol fits on one page.

The hallmark of interval designs is that every possible decision can be
printed before the first patient enrolls. With an informative prior the
boundaries become dose-specific: a dose the prior calls safe gets a looser
escalation bound, a dose the prior calls toxic gets a tighter one, and both
drift back to the noninformative constants as real patients accumulate.
"""

from dosefind import PriorSpec, TrialSettings, validate_settings
from dosefind.boin import decision_table
from dosefind.keyboard import keyboard_decision_table

settings, prior, j_star = validate_settings(
    TrialSettings(num_doses=5, target=0.3, max_n=30, cohort_size=3),
    PriorSpec(skeleton=(0.10, 0.19, 0.30, 0.42, 0.54), pess=(3, 3, 3, 3, 3)))

table = decision_table(settings, prior)
print("informative BOIN decision table (CSV layout):\n")
print(table.to_csv())

flat = decision_table(settings, PriorSpec(prior.skeleton, (0,) * 5))
print("with PESS = 0 every dose shares the classic noninformative row:\n")
print(",".join(str(v) for v in flat.escalate[0]), " <- escalate if DLT <=")
print(",".join(str(v) for v in flat.deescalate[0]), " <- de-escalate if DLT >=")

kbd = keyboard_decision_table(settings, prior)
print("\nkeyboard decision grid, dose 3 row (letters indexed by DLT count;")
print("E escalate, S stay, D de-escalate, X eliminate):")
for c, n in enumerate(kbd.n_grid):
    print(f"  n={n:2d}: {kbd.grid[2][c]}")
