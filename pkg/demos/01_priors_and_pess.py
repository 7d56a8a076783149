"""From a skeleton to priors: induced betas, PESS, and hypothesis weights.

A skeleton is the elicited guess of the DLT probability at each dose. One
prior variance on the model parameter fixes how much those guesses are worth,
measured in pseudo-patients (PESS). This walkthrough reproduces the reference
numbers: sigma^2 ~ 0.72 is worth about 3 patients per dose.
"""

import numpy as np

from dosefind import calibrate_sigma, hypothesis_prior, keyboard_hyperparams, moment_match

skeleton = (0.10, 0.19, 0.30, 0.42, 0.54)
target = 0.30

print("skeleton:", skeleton, "| target DLT probability:", target)

# calibrate the model prior so the skeleton is worth ~3 patients at its MTD
sigma2 = calibrate_sigma(skeleton, j_star=3, target_pess=3.0)
print(f"\ncalibrated sigma^2 = {sigma2:.4f}  (PESS = 3 at the prior MTD)")

print("\ndose    q      mu     tau^2      a      b    PESS")
for j, q in enumerate(skeleton, start=1):
    m = moment_match(q, sigma2)
    print(f"  {j}   {q:.2f}  {m.mu:.4f}  {m.tau2:.5f}  {m.a:.3f}  {m.b:.3f}  {m.pess:5.2f}")

# the same prior information expressed for the interval designs
print("\nBOIN hypothesis priors (stay / escalate / de-escalate), PESS = 3:")
for j, q in enumerate(skeleton, start=1):
    pi = hypothesis_prior(q, 3, target, 0.6 * target, 1.4 * target).pi
    print(f"  dose {j} (q={q:.2f}): " + "  ".join(f"{p:.4f}" for p in pi))

print("\nkeyboard beta hyperparameters (a, b) = (n0*q, n0*(1-q)), PESS = 3:")
for j, q in enumerate(skeleton, start=1):
    a, b = keyboard_hyperparams(q, 3)
    print(f"  dose {j}: a = {a:.2f}, b = {b:.2f}")

print("\nWith no prior patients (PESS = 0) every design falls back to its "
      "noninformative form:\n  BOIN ->", hypothesis_prior(0.3, 0, 0.3, 0.18, 0.42).pi,
      "\n  keyboard ->", keyboard_hyperparams(0.3, 0))
