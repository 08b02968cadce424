"""Simulation and checking of multistable Levy motions.

Two processes share one stability-index function alpha(t):

* ``LI``: the independent-increments multistable motion (additive, pure jump);
* ``LF``: the field-based motion, a stable sum evaluated along the diagonal alpha(t).

Submodules: :mod:`.alpha`, :mod:`.stable`, :mod:`.series`, :mod:`.charfn`,
:mod:`.decomp`, :mod:`.localize`, :mod:`.suite`, :mod:`.config`, :mod:`.cli`.
"""
__version__ = "0.1.0"

from .alpha import AlphaDomainError, AlphaFunction, UnsupportedDerivativeError, eval_alpha, eval_alpha_deriv
from .charfn import (CFQuery, CFResult, CheckReport, cf_distance, cf_LF_joint, cf_LI_joint,
                     cf_LI_marginal, ecf, increment_independence_check)
from .decomp import (DecompositionResult, SimplePredictable, compute_A_field, decompose_LI_alternate,
                     decompose_LI_magnitude, g_deriv, g_eval, levy_measure_LI,
                     simple_predictable_integral, total_variation)
from .localize import TangentReport, tangent_check
from .series import (Kernel, PathSample, SeriesDraw, TimeGrid, draw_series, partial_sum_convergence,
                     sample_paths, simulate_general_fkl, simulate_LF_fkl, simulate_LI_fkl,
                     simulate_LI_poisson)
from .stable import StableParams, c_alpha, dlog_c_alpha, sample_stable_oracle, stable_cf
