"""Projection-free convex optimization with open-loop step-sizes.

Solvers (vanilla, away-step, and decomposition-invariant pairwise
Frank-Wolfe), closed-form linear minimization oracles, an exact kernel
herding backend, and a deterministic experiment harness for measuring
convergence rates.
"""

from .afw import ActiveSet, afw_run
from .analysis import (
    RateEstimate,
    burn_in_end,
    fit_loglog_rate,
    local_rate,
    min_prefix,
    rate_contour,
    rolling_rates,
)
from .core import (
    ConstantStep,
    DegenerateDirectionError,
    LineSearch,
    OpenLoop,
    RunTrace,
    ShortStep,
    constant_rate_step,
    golden_section,
    parse_rule,
    recurrence_bound,
    rule_label,
    simulate_recurrence,
    step_length,
)
from .difw import difw_run, pow2_round_down
from .fw import constant_rule_for_instance, fw_run
from .herding import (
    FourierDensity,
    HerdingState,
    herding_lmo,
    herding_run,
    kernel_eval,
    mean_embedding,
)
from .objectives import (
    InstanceSpec,
    QuadraticObjective,
    generate_instance,
    power_iteration_extremes,
    project_to_simplex,
    reference_optimum,
)
from .regions import (
    LpBall,
    ProbabilitySimplex,
    RegionSpec,
    jaggi_lower_bound,
    lp_ball_lmo,
    region_from_spec,
    simplex_away_lmo,
    simplex_lmo,
)

__version__ = "0.1.0"
