"""
Experiment analytics: strong convergence orders and invariant-law diagnostics.
"""

from .convergence import ErrorRow, ErrorTable, OrderFit, fit_order, order_plot_data, predicted_order, strong_error_table
from .measure import (
    CouplingCurve,
    EmpiricalMeasure,
    InvariantReport,
    KsResult,
    ReferenceKind,
    StationaryReference,
    bootstrap_stderr,
    density_plot_data,
    evolve_empirical_law,
    invariant_convergence_report,
    ks_statistic,
    load_snapshot,
    save_snapshot,
    two_initial_value_coupling,
    wasserstein_k,
)

__all__ = [
    "CouplingCurve",
    "EmpiricalMeasure",
    "ErrorRow",
    "ErrorTable",
    "InvariantReport",
    "KsResult",
    "OrderFit",
    "ReferenceKind",
    "StationaryReference",
    "bootstrap_stderr",
    "density_plot_data",
    "evolve_empirical_law",
    "fit_order",
    "invariant_convergence_report",
    "ks_statistic",
    "load_snapshot",
    "order_plot_data",
    "predicted_order",
    "save_snapshot",
    "strong_error_table",
    "two_initial_value_coupling",
    "wasserstein_k",
]
