"""Protocol graphs of primitive and processing nodes, templates and file I/O.

A protocol document is JSON. Either name a ``template``::

    {"template": "local_search", "rounds": 3, "p_ladder": [0.3, 0.2, 0.1],
     "backend": "piqa", "anneal_params": {"T": 0.8246, "tau": 20,
     "trotter_slices": 30, "reads": 50}, "seed": 7}

or spell the graph out with ``nodes`` and ``edges``. Edges marked
``"loop": true`` carry a processing node's output into the next round.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..backends import BACKENDS, AnnealParams
from ..errors import ProtocolError
from ..processing import ALL_FUNCTIONS, FUNCTION_PARAMS, MULTI_STREAM, REQUIRED_PARAMS

TEMPLATES = ("traditional", "local_search", "population_annealing", "parallel_tempering")
PEX_CONVENTIONS = ("literal", "metropolis")
TOP_KEYS = {"template", "nodes", "edges", "backend", "anneal_params", "pools", "rounds", "seed",
            "pex_convention", "p_ladder", "patience", "schedule", "align", "p_agree", "post"}
ANNEAL_KEYS = {"T": "temperature", "tau": "tau", "trotter_slices": "trotter_slices",
               "reads": "reads", "t_hot": "t_hot"}
POOL_KEYS = {"T_ladder", "pop", "genetic_count", "genetic"}
SCHEDULE_KEYS = {"schedule", "gamma0", "T_phys", "thermal", "file"}


@dataclass(frozen=True)
class Node:
    """``kind`` is ``"primitive"`` (a sampler call) or ``"processing"`` (a heuristic)."""

    id: str
    kind: str
    fn: str | None = None
    params: dict = field(default_factory=dict)
    n_inputs: int = 1
    backend: str | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    loop: bool = False
    dynamic: bool = False


@dataclass(frozen=True)
class PoolSpec:
    """Effective-temperature ladder (strictly increasing) and pool sizes."""

    T_ladder: tuple[float, ...]
    pop: int = 1
    genetic_count: int = 0
    genetic: bool = False


@dataclass(frozen=True)
class ProtocolGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    rounds: int = 1
    template: str | None = None
    backend: str = "piqa"
    anneal_params: AnnealParams = field(default_factory=AnnealParams)
    pools: PoolSpec | None = None
    p_ladder: tuple[float, ...] = ()
    patience: int | None = None
    pex_convention: str = "literal"
    seed: int | None = None
    schedule: dict = field(default_factory=lambda: {"schedule": "linear"})
    align: str | None = None
    p_agree: float = 0.1

    def node(self, node_id: str) -> Node:
        for nd in self.nodes:
            if nd.id == node_id:
                return nd
        raise KeyError(node_id)


# -- templates ------------------------------------------------------------------

def template_traditional(**kw) -> ProtocolGraph:
    nodes = (Node("init", "processing", "init", n_inputs=0),
             Node("phi", "primitive"),
             Node("post", "processing", "best"))
    edges = (Edge("init", "phi"), Edge("phi", "post"))
    return ProtocolGraph(nodes, edges, rounds=1, template="traditional", **kw)


def template_local_search(rounds: int, p_ladder, **kw) -> ProtocolGraph:
    """Global call followed by ``rounds`` refinements with ``p`` taken from ``p_ladder``.

    The graph executes ``rounds + 1`` passes; the refinement node uses
    ``p_ladder[r]`` after pass ``r``.
    """
    p_ladder = tuple(float(p) for p in p_ladder)
    if not p_ladder:
        raise ProtocolError("local_search: p_ladder must not be empty")
    if len(p_ladder) != rounds:
        raise ProtocolError(f"local_search: |p_ladder| = {len(p_ladder)} but rounds = {rounds}")
    nodes = (Node("init", "processing", "init", n_inputs=0),
             Node("phi", "primitive"),
             Node("ls", "processing", "local_search", params={"p_ladder": list(p_ladder)}))
    edges = (Edge("init", "phi"), Edge("phi", "ls"), Edge("ls", "phi", loop=True))
    return ProtocolGraph(nodes, edges, rounds=rounds + 1, template="local_search",
                         p_ladder=p_ladder, **kw)


def template_population_annealing(pop: int, T_ladder, genetic_count: int = 0, rounds: int | None = None,
                                  **kw) -> ProtocolGraph:
    """Population of ``pop`` calls per round, resampled at temperatures from the ladder (hot to cold)."""
    T_ladder = tuple(float(t) for t in T_ladder)
    nodes = [Node("init", "processing", "init", n_inputs=0)]
    edges = []
    for m in range(pop):
        nodes += [Node(f"phi{m}", "primitive"), Node(f"ls{m}", "processing", "local_search")]
        edges += [Edge("init", f"phi{m}"), Edge(f"phi{m}", f"ls{m}"), Edge(f"ls{m}", f"phi{m}", loop=True)]
    for g in range(genetic_count):
        nodes.append(Node(f"gen{g}", "processing", "genetic_agreement", n_inputs=2))
        # parents are drawn at run time; the declared sources are placeholders
        edges += [Edge(f"phi{(2 * g) % pop}", f"gen{g}", dynamic=True),
                  Edge(f"phi{(2 * g + 1) % pop}", f"gen{g}", dynamic=True),
                  Edge(f"gen{g}", f"phi{g}", loop=True, dynamic=True)]
    pools = PoolSpec(T_ladder, pop=pop, genetic_count=genetic_count)
    return ProtocolGraph(tuple(nodes), tuple(edges), rounds=rounds or len(T_ladder),
                         template="population_annealing", pools=pools, **kw)


def template_parallel_tempering(T_ladder, rounds: int, genetic: bool = False, **kw) -> ProtocolGraph:
    """One (or with ``genetic`` two) calls per ladder temperature with neighbour swaps."""
    T_ladder = tuple(float(t) for t in T_ladder)
    reps = 2 if genetic else 1
    nodes = [Node("init", "processing", "init", n_inputs=0)]
    edges = []
    for k in range(len(T_ladder)):
        for a in range(reps):
            m = f"{k}_{a}"
            nodes += [Node(f"phi{m}", "primitive"), Node(f"ls{m}", "processing", "local_search")]
            edges += [Edge("init", f"phi{m}"), Edge(f"phi{m}", f"ls{m}"),
                      Edge(f"ls{m}", f"phi{m}", loop=True)]
        if genetic:
            nodes += [Node(f"hyb{k}", "processing", "genetic_agreement", n_inputs=2),
                      Node(f"phi_hyb{k}", "primitive")]
            edges += [Edge(f"phi{k}_0", f"hyb{k}"), Edge(f"phi{k}_1", f"hyb{k}"),
                      Edge(f"hyb{k}", f"phi_hyb{k}")]
    pools = PoolSpec(T_ladder, pop=reps, genetic=genetic)
    return ProtocolGraph(tuple(nodes), tuple(edges), rounds=rounds, template="parallel_tempering",
                         pools=pools, **kw)


# -- validation ---------------------------------------------------------------

def validate(graph: ProtocolGraph) -> ProtocolGraph:
    """Check node kinds, bipartite alternation, in-degrees and pool settings."""
    ids = [nd.id for nd in graph.nodes]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ProtocolError(f"duplicate node ids: {sorted(dup)}")
    kinds = {}
    for nd in graph.nodes:
        if nd.kind == "primitive":
            if nd.backend is not None and nd.backend not in BACKENDS:
                raise ProtocolError(f"node {nd.id}: unknown backend {nd.backend!r}")
        elif nd.kind == "processing":
            if nd.fn not in ALL_FUNCTIONS:
                raise ProtocolError(f"node {nd.id}: unknown processing function {nd.fn!r}")
            extra = set(nd.params) - FUNCTION_PARAMS[nd.fn] - {"align"}
            if extra:
                raise ProtocolError(f"node {nd.id}: unknown parameters {sorted(extra)} for {nd.fn}")
            missing = REQUIRED_PARAMS.get(nd.fn, set()) - set(nd.params)
            if missing and graph.template is None:
                raise ProtocolError(f"node {nd.id}: missing parameters {sorted(missing)} for {nd.fn}")
            if nd.fn == "init" and nd.n_inputs != 0:
                raise ProtocolError(f"node {nd.id}: init takes no inputs")
            if nd.fn != "init" and nd.n_inputs < 1:
                raise ProtocolError(f"node {nd.id}: only init may have zero inputs")
            if nd.fn in MULTI_STREAM and nd.n_inputs < 2:
                raise ProtocolError(f"node {nd.id}: {nd.fn} needs at least two inputs")
        else:
            raise ProtocolError(f"node {nd.id}: kind must be 'primitive' or 'processing'")
        kinds[nd.id] = nd.kind

    indeg = {i: 0 for i in ids}
    prim_in = {i: [0, 0] for i in ids}
    for e in graph.edges:
        for end in (e.src, e.dst):
            if end not in kinds:
                raise ProtocolError(f"edge {e.src}->{e.dst}: unknown node {end!r}")
        if kinds[e.src] == kinds[e.dst]:
            raise ProtocolError(f"edge {e.src}->{e.dst}: connects two {kinds[e.src]} nodes")
        if kinds[e.dst] == "processing":
            if e.loop:
                raise ProtocolError(f"edge {e.src}->{e.dst}: loop edges must end at a primitive node")
            indeg[e.dst] += 1
        elif not e.dynamic:
            prim_in[e.dst][1 if e.loop else 0] += 1
    for nd in graph.nodes:
        if nd.kind == "processing" and indeg[nd.id] != nd.n_inputs:
            raise ProtocolError(f"node {nd.id}: in-degree {indeg[nd.id]} != declared n_inputs {nd.n_inputs}")
        if nd.kind == "primitive":
            plain, loop = prim_in[nd.id]
            if plain > 1 or loop > 1 or plain + loop == 0:
                raise ProtocolError(f"node {nd.id}: a primitive needs one belief input "
                                    f"(plus at most one loop input), got {plain} + {loop} loop")
    _topological_order(graph)

    if graph.rounds < 1:
        raise ProtocolError("rounds must be >= 1")
    if graph.patience is not None and graph.patience < 1:
        raise ProtocolError("patience must be >= 1")
    if graph.backend not in BACKENDS:
        raise ProtocolError(f"unknown backend {graph.backend!r}")
    if graph.pex_convention not in PEX_CONVENTIONS:
        raise ProtocolError(f"pex_convention must be one of {PEX_CONVENTIONS}")
    if graph.align not in (None, "majority", "search"):
        raise ProtocolError("align must be 'majority' or 'search'")
    if not 0 < graph.p_agree < 0.5:
        raise ProtocolError("p_agree must lie in (0, 0.5)")
    if graph.template is not None and graph.template not in TEMPLATES:
        raise ProtocolError(f"unknown template {graph.template!r}")
    if graph.template == "local_search":
        if any(not 0 <= p <= 0.5 for p in graph.p_ladder):
            raise ProtocolError("p_ladder entries must lie in [0, 0.5]")
    pools = graph.pools
    if graph.template in ("population_annealing", "parallel_tempering"):
        if pools is None or not pools.T_ladder:
            raise ProtocolError(f"{graph.template}: pools.T_ladder is required")
        if any(t <= 0 for t in pools.T_ladder):
            raise ProtocolError("pool temperatures must be > 0")
        if any(b <= a for a, b in zip(pools.T_ladder, pools.T_ladder[1:])):
            raise ProtocolError("pools.T_ladder must be strictly increasing")
        if pools.pop < 1:
            raise ProtocolError("pool sizes must be positive")
    if graph.template == "population_annealing":
        if pools.pop < 2:
            raise ProtocolError("population_annealing: pop must be >= 2")
        if pools.genetic_count < 0 or pools.genetic_count > pools.pop / 2:
            raise ProtocolError("population_annealing: genetic_count must lie in [0, pop/2]")
    if graph.template == "parallel_tempering" and len(pools.T_ladder) < 2:
        raise ProtocolError("parallel_tempering: T_ladder needs at least two temperatures")
    return graph


def _topological_order(graph: ProtocolGraph) -> list[str]:
    ids = [nd.id for nd in graph.nodes]
    preds = {i: [] for i in ids}
    for e in graph.edges:
        if not e.loop and not e.dynamic:
            preds[e.dst].append(e.src)
    order, done = [], set()
    while len(order) < len(ids):
        ready = [i for i in ids if i not in done and all(p in done for p in preds[i])]
        if not ready:
            cycle = sorted(set(ids) - done)
            raise ProtocolError(f"cycle among nodes {cycle}; mark feedback edges with \"loop\": true")
        order.append(ready[0])
        done.add(ready[0])
    return order


# -- parsing ------------------------------------------------------------------

def _check_keys(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ProtocolError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise ProtocolError(f"{where}: unknown keys {sorted(extra)}")
    return obj


def _anneal_from_doc(doc: dict) -> AnnealParams:
    _check_keys(doc, set(ANNEAL_KEYS), "anneal_params")
    try:
        return AnnealParams(**{ANNEAL_KEYS[k]: v for k, v in doc.items()})
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"anneal_params: {exc}") from None


def _anneal_to_doc(p: AnnealParams) -> dict:
    return {"T": p.temperature, "tau": p.tau, "trotter_slices": p.trotter_slices,
            "reads": p.reads, "t_hot": p.t_hot}


def _node_from_doc(doc: dict, k: int) -> Node:
    where = f"nodes[{k}]"
    if not isinstance(doc, dict) or "id" not in doc or "kind" not in doc:
        raise ProtocolError(f"{where}: nodes need 'id' and 'kind'")
    if doc["kind"] == "primitive":
        _check_keys(doc, {"id", "kind", "backend"}, where)
        return Node(str(doc["id"]), "primitive", backend=doc.get("backend"))
    if doc["kind"] != "processing":
        raise ProtocolError(f"{where}.kind: expected 'primitive' or 'processing'")
    fn = doc.get("fn")
    if fn not in ALL_FUNCTIONS:
        raise ProtocolError(f"{where}.fn: unknown processing function {fn!r}")
    allowed = {"id", "kind", "fn", "n_inputs", "align"} | FUNCTION_PARAMS[fn]
    _check_keys(doc, allowed, where)
    params = {k: v for k, v in doc.items() if k not in ("id", "kind", "fn", "n_inputs")}
    n_inputs = doc.get("n_inputs", 0 if fn == "init" else 1)
    if not isinstance(n_inputs, int):
        raise ProtocolError(f"{where}.n_inputs: expected an integer")
    return Node(str(doc["id"]), "processing", fn, params, n_inputs)


def _edge_from_doc(doc, k: int) -> Edge:
    where = f"edges[{k}]"
    if isinstance(doc, list) and len(doc) == 2:
        return Edge(str(doc[0]), str(doc[1]))
    _check_keys(doc, {"from", "to", "loop"}, where)
    if "from" not in doc or "to" not in doc:
        raise ProtocolError(f"{where}: edges need 'from' and 'to'")
    return Edge(str(doc["from"]), str(doc["to"]), bool(doc.get("loop", False)))


def graph_from_dict(doc: dict) -> ProtocolGraph:
    _check_keys(doc, TOP_KEYS, "protocol")
    common = {
        "backend": doc.get("backend", "piqa"),
        "anneal_params": _anneal_from_doc(doc.get("anneal_params", {})),
        "pex_convention": doc.get("pex_convention", "literal"),
        "seed": doc.get("seed"),
        "patience": doc.get("patience"),
        "schedule": dict(_check_keys(doc.get("schedule", {"schedule": "linear"}), SCHEDULE_KEYS, "schedule")),
        "align": doc.get("align"),
        "p_agree": float(doc.get("p_agree", 0.1)),
    }
    template = doc.get("template")
    if template is not None and ("nodes" in doc or "edges" in doc):
        raise ProtocolError("protocol: give either 'template' or 'nodes'/'edges', not both")
    pools_doc = doc.get("pools")
    pools = None
    if pools_doc is not None:
        _check_keys(pools_doc, POOL_KEYS, "pools")
        pools = PoolSpec(tuple(float(t) for t in pools_doc.get("T_ladder", ())),
                         int(pools_doc.get("pop", 1)), int(pools_doc.get("genetic_count", 0)),
                         bool(pools_doc.get("genetic", False)))
    try:
        if template is None:
            if "nodes" not in doc:
                raise ProtocolError("protocol: missing 'template' or 'nodes'")
            nodes = tuple(_node_from_doc(d, k) for k, d in enumerate(doc["nodes"]))
            edges = tuple(_edge_from_doc(d, k) for k, d in enumerate(doc.get("edges", [])))
            graph = ProtocolGraph(nodes, edges, rounds=int(doc.get("rounds", 1)), pools=pools, **common)
        elif template == "traditional":
            graph = template_traditional(**common)
        elif template == "local_search":
            ladder = doc.get("p_ladder")
            if ladder is None:
                raise ProtocolError("local_search: p_ladder is required")
            graph = template_local_search(int(doc.get("rounds", len(ladder))), ladder, **common)
        elif template == "population_annealing":
            if pools is None:
                raise ProtocolError("population_annealing: 'pools' is required")
            graph = template_population_annealing(pools.pop, pools.T_ladder, pools.genetic_count,
                                                  rounds=doc.get("rounds"), **common)
        elif template == "parallel_tempering":
            if pools is None:
                raise ProtocolError("parallel_tempering: 'pools' is required")
            graph = template_parallel_tempering(pools.T_ladder, int(doc.get("rounds", 1)),
                                                pools.genetic, **common)
        else:
            raise ProtocolError(f"template: unknown template {template!r}; choose from {TEMPLATES}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ProtocolError):
            raise
        raise ProtocolError(f"protocol: {exc}") from None
    return validate(graph)


def parse_protocol(document) -> ProtocolGraph:
    """Parse a protocol from a dict, JSON text or a path to a JSON file."""
    if isinstance(document, dict):
        return graph_from_dict(document)
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        document = Path(document).read_text()
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return graph_from_dict(doc)


def serialize(graph: ProtocolGraph) -> dict:
    """Inverse of :func:`graph_from_dict` (``parse(serialize(g)) == g``)."""
    doc: dict[str, Any] = {
        "backend": graph.backend,
        "anneal_params": _anneal_to_doc(graph.anneal_params),
        "pex_convention": graph.pex_convention,
        "schedule": dict(graph.schedule),
        "p_agree": graph.p_agree,
    }
    for key in ("seed", "patience", "align"):
        if getattr(graph, key) is not None:
            doc[key] = getattr(graph, key)
    if graph.pools is not None:
        doc["pools"] = {"T_ladder": list(graph.pools.T_ladder), "pop": graph.pools.pop,
                        "genetic_count": graph.pools.genetic_count, "genetic": graph.pools.genetic}
    if graph.template is None:
        doc["rounds"] = graph.rounds
        doc["nodes"] = []
        for nd in graph.nodes:
            d = {"id": nd.id, "kind": nd.kind}
            if nd.kind == "primitive":
                if nd.backend is not None:
                    d["backend"] = nd.backend
            else:
                d.update({"fn": nd.fn, "n_inputs": nd.n_inputs, **nd.params})
            doc["nodes"].append(d)
        doc["edges"] = [{"from": e.src, "to": e.dst, "loop": e.loop} for e in graph.edges]
        return doc
    doc["template"] = graph.template
    if graph.template == "local_search":
        doc["rounds"] = graph.rounds - 1
        doc["p_ladder"] = list(graph.p_ladder)
    elif graph.template in ("population_annealing", "parallel_tempering"):
        doc["rounds"] = graph.rounds
    return doc


def dumps(graph: ProtocolGraph) -> str:
    return json.dumps(serialize(graph), indent=2)
