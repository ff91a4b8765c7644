"""Kernel-based regressors: epsilon-SVR (SMO) and Gaussian process regression."""

from sensorcal.kernel_models.gpr import (
    GprModel,
    gpr_fit,
    gpr_from_fields,
    gpr_log_marginal_likelihood,
    gpr_predict,
    gpr_to_fields,
)
from sensorcal.kernel_models.kernels import (
    KERNEL_IDS,
    kernel_eval,
    kernel_matrix,
    kernel_matrix_with_grads,
)
from sensorcal.kernel_models.svr import (
    RbfKernelCache,
    SvrModel,
    rbf_kernel,
    svr_fit,
    svr_from_fields,
    svr_kkt_violation,
    svr_predict,
    svr_to_fields,
)

__all__ = [
    "GprModel",
    "KERNEL_IDS",
    "RbfKernelCache",
    "SvrModel",
    "gpr_fit",
    "gpr_from_fields",
    "gpr_log_marginal_likelihood",
    "gpr_predict",
    "gpr_to_fields",
    "kernel_eval",
    "kernel_matrix",
    "kernel_matrix_with_grads",
    "rbf_kernel",
    "svr_fit",
    "svr_from_fields",
    "svr_kkt_violation",
    "svr_predict",
    "svr_to_fields",
]
