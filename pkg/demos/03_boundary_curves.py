"""How informative boundaries drift back to the noninformative constants.

For each dose the escalation/de-escalation boundaries carry a prior log-odds
term scaled by 1/n: a text plot of lambda_e and lambda_d against the number
of patients treated shows the informative curves approaching the flat
noninformative lines as data take over.
"""

import numpy as np

from dosefind.boin import boundaries
from dosefind.priors import HypothesisPrior, hypothesis_prior

PHI, PHI1, PHI2 = 0.30, 0.18, 0.42
UNIFORM = HypothesisPrior((1 / 3, 1 / 3, 1 / 3))

ns = list(range(3, 31, 3))
star = boundaries(PHI, PHI1, PHI2, UNIFORM, n=3)
print(f"noninformative constants: lambda_e* = {star.lambda_e:.4f}, "
      f"lambda_d* = {star.lambda_d:.4f}\n")

for q, n0 in ((0.10, 3), (0.10, 5), (0.54, 3)):
    pi = hypothesis_prior(q, n0, PHI, PHI1, PHI2)
    print(f"prior DLT probability q = {q}, PESS = {n0}:")
    print("   n   lambda_e  lambda_d")
    for n in ns:
        b = boundaries(PHI, PHI1, PHI2, pi, n)
        bar_e = "#" * int(round(b.lambda_e * 60))
        print(f"  {n:2d}   {b.lambda_e:.4f}    {b.lambda_d:.4f}   |{bar_e}")
    drift = [(b := boundaries(PHI, PHI1, PHI2, pi, n)).lambda_e - star.lambda_e
             for n in ns]
    side = "above" if drift[0] > 0 else "below"
    print(f"  escalation boundary starts {side} the noninformative line and "
          f"shrinks toward it like 1/n "
          f"(drift {drift[0]:+.4f} at n=3, {drift[-1]:+.4f} at n=30)\n")
