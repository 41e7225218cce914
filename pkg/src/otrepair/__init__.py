"""Optimal-transport repair of conditional dependence on a protected attribute.

Repair plans are designed on a small (u, s)-labelled research sample and
applied record by record to large archival data.
"""

__version__ = "0.1.0"

from .density import (DiscreteDistribution, InterpolatedSupport, build_support,
                      kde_pmf, silverman_bandwidth)
from .estimators import DistributionalRepair, GeometricRepair
from .metrics import (FairnessReport, conditional_fairness, disparate_impact,
                      symmetrized_kld)
from .model import Dataset, GroupIndex, LabeledRecord, partition_groups, validate_dataset
from .persist import load_model, save_model
from .repair import (RepairModel, design_repair_model, geometric_repair,
                     repair_dataset, repair_value)
from .rng import RepairRng
from .transport import (CostSpec, TransportPlan, barycenter, lp_oracle_plan,
                        monotone_plan, transport_cost, wasserstein_p)

__all__ = [
    "CostSpec", "Dataset", "DiscreteDistribution", "DistributionalRepair",
    "FairnessReport", "GeometricRepair", "GroupIndex", "InterpolatedSupport",
    "LabeledRecord", "RepairModel", "RepairRng", "TransportPlan", "barycenter",
    "build_support", "conditional_fairness", "design_repair_model",
    "disparate_impact", "geometric_repair", "kde_pmf", "load_model",
    "lp_oracle_plan", "monotone_plan", "partition_groups", "repair_dataset",
    "repair_value", "save_model", "silverman_bandwidth", "symmetrized_kld",
    "transport_cost", "validate_dataset", "wasserstein_p",
]
