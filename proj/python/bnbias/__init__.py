"""Batch-normalized linear models: gradient descent, margin solvers and checks.

Thin wrapper over the compiled ``_core`` module. Arrays come back as numpy
arrays; reports come back as plain dicts.
"""

from ._core import (
    BnbiasError,
    Dataset,
    bn_norm,
    check_aux_inequality,
    discrepancy,
    example1_dataset,
    example2_dataset,
    fit_rate,
    gamma_recurrence_bounds,
    gaussian_dataset,
    line_chart_svg,
    load_dataset_csv,
    loss_and_grads,
    margins,
    plain_loss_and_grad,
    run_example,
    solve_max_margin,
    solve_uniform_margin,
    span_spectrum,
    train,
    verify,
    wilson,
)

__all__ = [
    "BnbiasError",
    "Dataset",
    "bn_norm",
    "check_aux_inequality",
    "discrepancy",
    "example1_dataset",
    "example2_dataset",
    "fit_rate",
    "gamma_recurrence_bounds",
    "gaussian_dataset",
    "line_chart_svg",
    "load_dataset_csv",
    "loss_and_grads",
    "margins",
    "plain_loss_and_grad",
    "run_example",
    "solve_max_margin",
    "solve_uniform_margin",
    "span_spectrum",
    "train",
    "verify",
    "wilson",
]
