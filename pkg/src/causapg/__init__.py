"""Embedded causal analysis over property graphs.

The package keeps a versioned property graph (``graph``), lifts cohorts of
graph elements into causal variables (``cdah``), runs a declarative pattern
language over both layers (``query``), estimates and validates the causal
structure (``estimation``, ``analysis``), evaluates interventions and
counterfactuals (``scm``), pools models from several sources (``transport``)
and keeps models aligned with a changing graph (``maintenance``).
"""

__version__ = "0.1.0"

from .analysis import (SeparationResult, cramers_v, d_separated,
                       find_colliders, find_confounders, find_mediators,
                       scan_associations, tv_distance, validate_edge)
from .cdah import (ABSENT, CDAH, PRESENT, Binning, CausalEdge, Distribution,
                   HyperNode, Member, ValueRule, load_cdah, save_cdah)
from .equations import StructuralEquation, parse_equation
from .errors import (CausapgError, CohortSpecError, CycleError,
                     GraphFormatError, QuerySyntaxError)
from .estimation import estimate_all, estimate_cpd, estimate_edge, eval_probability
from .graph import (AddEdge, AddNode, Edge, GraphSnapshot, Node,
                    PropertyGraph, RemoveEdge, RemoveNode, SetEdgeProperty,
                    SetNodeProperty, UpdateReceipt, canonical_form, export,
                    ingest, update_from_json)
from .maintenance import MaintenanceOutcome, derive_triggers, on_update, rebuild
from .query.engine import QueryResult, evaluate, render_value
from .query.parser import parse, parse_script, pretty_print
from .scm import (abduct_noise, backdoor_adjust, backdoor_valid,
                  counterfactual, do_values, fit_all_linear, fit_linear)
from .transport import (AlignmentRule, MergeReport, RoleChange, diff_roles,
                        merge, structural_roles, transport_check)

__all__ = [
    "ABSENT", "AddEdge", "AddNode", "AlignmentRule", "Binning", "CDAH",
    "CausapgError", "CausalEdge", "CohortSpecError", "CycleError",
    "Distribution", "Edge", "GraphFormatError", "GraphSnapshot", "HyperNode",
    "MaintenanceOutcome", "Member", "MergeReport", "Node", "PRESENT",
    "PropertyGraph", "QueryResult", "QuerySyntaxError", "RemoveEdge",
    "RemoveNode", "RoleChange", "SeparationResult", "SetEdgeProperty",
    "SetNodeProperty", "StructuralEquation", "UpdateReceipt", "ValueRule",
    "abduct_noise", "backdoor_adjust", "backdoor_valid", "canonical_form",
    "counterfactual", "cramers_v", "d_separated", "derive_triggers",
    "diff_roles", "do_values", "estimate_all", "estimate_cpd",
    "estimate_edge", "eval_probability", "evaluate", "export",
    "find_colliders", "find_confounders", "find_mediators", "fit_all_linear",
    "fit_linear", "ingest", "load_cdah", "merge", "on_update", "parse",
    "parse_equation", "parse_script", "pretty_print", "rebuild",
    "render_value", "save_cdah", "scan_associations", "structural_roles",
    "transport_check", "tv_distance", "update_from_json", "validate_edge",
]
