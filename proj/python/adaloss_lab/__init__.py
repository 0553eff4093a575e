"""Adaptive-stepsize optimization laboratory.

Thin python surface over the C++ core: problem generators, the AdaLoss /
AdaGrad-Norm controller family, the two testbeds, and the closed-form
bound evaluators.
"""

from ._core import (
    DataSet,
    LinRegProblem,
    StepsizeController,
    TwoLayerNetwork,
    __version__,
    bound_T,
    bound_b_limit,
    bound_crossing,
    bound_stochastic_N,
    gen_dataset,
    gen_problem,
    gram_infinity,
    hat_dynamics_step,
    make_dataset,
    normalize_rows,
    run_linreg,
    sample_gaussian_matrix,
    spectral_extremes,
    sym_eigendecompose,
    train_twolayer,
)

__all__ = [
    "DataSet",
    "LinRegProblem",
    "StepsizeController",
    "TwoLayerNetwork",
    "__version__",
    "bound_T",
    "bound_b_limit",
    "bound_crossing",
    "bound_stochastic_N",
    "gen_dataset",
    "gen_problem",
    "gram_infinity",
    "hat_dynamics_step",
    "make_dataset",
    "normalize_rows",
    "run_linreg",
    "sample_gaussian_matrix",
    "spectral_extremes",
    "sym_eigendecompose",
    "train_twolayer",
]
