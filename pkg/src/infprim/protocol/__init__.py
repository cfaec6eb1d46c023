from .engine import (Member, PoolState, hybrid_replace, pa_select_parents, pt_swap,
                     replacement_probability, run_protocol, schedule_from_config, swap_probability)
from .graph import (Edge, Node, PoolSpec, ProtocolGraph, dumps, graph_from_dict, parse_protocol,
                    serialize, template_local_search, template_parallel_tempering,
                    template_population_annealing, template_traditional, validate)
from .record import RunRecord

__all__ = [
    "Edge", "Member", "Node", "PoolSpec", "PoolState", "ProtocolGraph", "RunRecord", "dumps",
    "graph_from_dict", "hybrid_replace", "pa_select_parents", "parse_protocol", "pt_swap",
    "replacement_probability", "run_protocol", "schedule_from_config", "serialize",
    "swap_probability", "template_local_search", "template_parallel_tempering",
    "template_population_annealing", "template_traditional", "validate",
]
