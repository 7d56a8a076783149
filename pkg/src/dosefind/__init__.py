"""Phase I dose-finding designs with informative priors.

CRM, BOIN, and keyboard designs sharing one prior language (skeleton + prior
effective sample size), with pre-tabulated decision rules, live trial
conduct, isotonic MTD selection, and a reproducible Monte Carlo engine for
operating characteristics.
"""

from .core import (Decision, DoseData, PriorSpec, Scenario, TrialSettings,
                   TrialState, ValidationError, derive_rng_stream,
                   prior_mtd_index, validate_settings)
from .priors import (InducedBeta, HypothesisPrior, calibrate_sigma,
                     hypothesis_prior, induced_density, keyboard_hyperparams,
                     mixture_hypothesis_prior, moment_match, prior_moments,
                     robustify_pess)
from .crm import CrmBatch, CrmModel, crm_next_dose, posterior_means
from .boin import (Boundaries, DecisionTable, boin_next_dose, boundaries,
                   decision_table)
from .keyboard import (BetaMixture, Keys, KeyboardTable, build_keys,
                       key_masses, keyboard_decision_table,
                       keyboard_next_dose, strongest_key)
from .conduct import (EliminationRule, MtdSelection, apply_cohort,
                      check_elimination, elimination_min_dlt, pava,
                      select_mtd)
from .simulate import (REFERENCE_SKELETONS, REFERENCE_SCENARIOS, DesignConfig,
                       OpCharacteristics, SimulationPlan, SimulationResult,
                       design_preset, generate_random_scenario,
                       misspecified_family, run_simulation, write_oc_csv,
                       write_summary_csv)

__version__ = "0.1.0"
