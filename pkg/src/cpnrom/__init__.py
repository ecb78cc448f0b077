"""Nonlinear model reduction with a linear encoder and a decoder built
from compositions of sparse polynomial maps."""

from .snapdata import (
    SnapshotSet,
    XGeometry,
    x_inner,
    x_norm,
    empirical_zero_error,
    load_snapshots,
    save_snapshots,
)
from .linred import (
    ReducedBasis,
    empirical_pca,
    greedy_basis,
    custom_basis,
    select_truncation,
    project_coeffs,
)
from .polyfit import (
    MultiIndexSet,
    PolynomialModel,
    build_index_set,
    legendre_eval,
    estimate_box,
    fit_sparse,
    lipschitz_estimate,
)
from .cpn import (
    CoefficientNode,
    CpnModel,
    FitConfig,
    Metrics,
    fit_adaptive,
    encode,
    decode,
    evaluate,
    update_budgets,
    decoder_lipschitz_check,
)
from .baselines import QuadraticModel, fit_linear, fit_quadratic
from .benchgen import gen_toy, gen_kdv, gen_allen_cahn
from .modelio import save_model, load_model

__version__ = "0.1.0"
