"""Samplers and greedy search over Markov equivalence classes of DAGs."""

from .graph import PDAG, dag_to_cpdag, format_graph, mcs_extension, parse_graph, random_cpdag, random_dag
from .operators import (
    DELETE,
    INSERT,
    InvalidOperatorError,
    Operator,
    apply_operator,
    count_operators,
    delete,
    insert,
    list_operators,
    sample_operator_uniform,
)
from .scoring import BicScore, DataMatrix, ScoreCache, TargetDistribution, cpdag_log_score, operator_log_delta
from .samplers import ZANELLA, ZIGZAG, Balancing, LiftedState, RateTable, Trace, first_hitting_time, run, zanella_rates, zigzag_rates
from .ges import GesTrajectory, ges_run
from .synthetic import synthetic_dataset

__version__ = "0.1.0"
