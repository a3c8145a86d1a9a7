"""Tools for analyzing mixture training on finite datasets: the closed-form
optimal classifier, dataset audits, midpoint recovery, and small trained
models for comparison."""

from .assumptions import (
    check_margin_condition,
    collinearity_violations,
    margin_radius,
    min_mix_clearance,
)
from .datasets import (
    LabeledDataset,
    alternating_line,
    four_point_cross,
    gaussian_binary,
    load_csv,
    load_idx,
    two_moons,
)
from .linear import (
    min_norm_interpolator,
    minimize_mixup_linear,
    mixup_linear_loss,
    optimal_margin_constant,
)
from .mixing import MixingDistribution, alpha_threshold
from .oracle import (
    GridSpec,
    boundary_grid,
    mix_mass_table,
    mixture_limit_probs,
    mixture_optimal_probs,
    mixture_optimal_probs_symmetric,
    segment_ball_interval,
)
from .recovery import (
    concat_rank,
    form_midpoints,
    pair_incidence_matrix,
    permutation_rank_trials,
    recover_labeled,
    recover_unlabeled_bruteforce,
)
from .training import AdamState, MlpModel, adam_step, evaluate, init_mlp, loss_and_grad, train

__version__ = "0.1.0"
