"""Directed feature-interaction graphs.

Nodes are environmental variables, edges point from a driving variable to
the variable it influences, and one node is the forecast target. Node
order is the single source of truth for per-node tensor layout everywhere
downstream.

Graphs are configuration, not code. The text format is line based:

    # comment
    node OUT_temp
    node G2_temp
    edge OUT_temp -> G2_temp
    target G2_temp

Node order in the file defines tensor row order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GraphError


@dataclass(frozen=True)
class FeatureGraph:
    nodes: tuple
    edges: tuple  # (src, dst) pairs, direction src -> dst
    target: str

    def __post_init__(self):
        seen = set()
        for n in self.nodes:
            if n in seen:
                raise GraphError(f"duplicate node {n!r}")
            seen.add(n)
        for src, dst in self.edges:
            for endpoint in (src, dst):
                if endpoint not in seen:
                    raise GraphError(f"edge endpoint {endpoint!r} is not a declared node")
        if self.target not in seen:
            raise GraphError(f"target {self.target!r} is not a declared node")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node_index(self, name: str) -> int:
        try:
            return self.nodes.index(name)
        except ValueError:
            raise GraphError(f"unknown node {name!r}") from None

    def incoming(self, name: str):
        """Source nodes of edges pointing at name, in edge order."""
        return [src for src, dst in self.edges if dst == name]

    def in_degree(self, name: str) -> int:
        return len(self.incoming(name))


def make_graph(nodes, edges, target) -> FeatureGraph:
    return FeatureGraph(tuple(nodes), tuple((s, d) for s, d in edges), target)


def gh2_graph() -> FeatureGraph:
    """Six-variable 2020 greenhouse: external drivers feeding the internal
    temperature/humidity pair, which is bidirectionally coupled."""
    nodes = ("OUT_temp", "OUT_RH", "OUT_rad", "OUT_wind_speed", "G2_temp", "G2_RH")
    edges = (
        ("OUT_temp", "OUT_RH"),
        ("OUT_wind_speed", "OUT_RH"),
        ("OUT_rad", "OUT_RH"),
        ("OUT_rad", "OUT_temp"),
        ("OUT_wind_speed", "OUT_temp"),
        ("OUT_temp", "G2_temp"),
        ("OUT_RH", "G2_RH"),
        ("OUT_rad", "G2_temp"),
        ("OUT_rad", "G2_RH"),
        ("OUT_wind_speed", "G2_temp"),
        ("OUT_wind_speed", "G2_RH"),
        ("G2_temp", "G2_RH"),
        ("G2_RH", "G2_temp"),
    )
    return FeatureGraph(nodes, edges, "G2_temp")


def gh4_graph() -> FeatureGraph:
    """Eight-variable 2024 PV greenhouse with PAR and CO2 sensors.

    The edge set is provisional: the external->internal links mirror the
    GH2 layout and the PAR/CO2 couplings encode radiation driving
    photosynthesis, which depletes internal CO2 and feeds back on
    temperature (ventilation mixes the two). Revise via a graph config
    file when better information is available.
    """
    nodes = ("OUT_Temp", "OUT_Rad", "OUT_PAR", "OUT_CO2", "OUT_RH",
             "G4_PAR", "G4_CO2", "G4_Temp")
    edges = (
        ("OUT_Rad", "OUT_Temp"),
        ("OUT_Temp", "OUT_RH"),
        ("OUT_Rad", "OUT_RH"),
        ("OUT_Rad", "OUT_PAR"),
        ("OUT_PAR", "G4_PAR"),
        ("OUT_CO2", "G4_CO2"),
        ("OUT_Temp", "G4_Temp"),
        ("OUT_Rad", "G4_Temp"),
        ("OUT_RH", "G4_Temp"),
        ("G4_PAR", "G4_Temp"),
        ("G4_PAR", "G4_CO2"),
        ("G4_CO2", "G4_Temp"),
        ("G4_Temp", "G4_CO2"),
    )
    return FeatureGraph(nodes, edges, "G4_Temp")


# ---------------------------------------------------------------------------
# text format


def serialize_graph(graph: FeatureGraph) -> str:
    lines = [f"node {n}" for n in graph.nodes]
    lines += [f"edge {s} -> {d}" for s, d in graph.edges]
    lines.append(f"target {graph.target}")
    return "\n".join(lines) + "\n"


def parse_graph_config(text: str) -> FeatureGraph:
    nodes, edges = [], []
    target = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node" and len(parts) == 2:
            nodes.append(parts[1])
        elif parts[0] == "edge" and len(parts) == 4 and parts[2] == "->":
            edges.append((parts[1], parts[3]))
        elif parts[0] == "target" and len(parts) == 2:
            if target is not None:
                raise ConfigError(f"line {lineno}: target declared twice")
            target = parts[1]
        else:
            raise ConfigError(f"line {lineno}: cannot parse {raw.strip()!r}")
    if target is None:
        raise ConfigError("graph config declares no target")
    try:
        return make_graph(nodes, edges, target)
    except GraphError as exc:
        raise ConfigError(str(exc)) from exc


def load_graph(path) -> FeatureGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_config(fh.read())


def save_graph(graph: FeatureGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_graph(graph))


def validate_graph(graph: FeatureGraph, columns) -> None:
    """Check node names against frame columns, exactly and both ways."""
    cols = set(columns)
    missing = [n for n in graph.nodes if n not in cols]
    extra = [c for c in columns if c not in set(graph.nodes)]
    if missing:
        raise ConfigError(f"graph nodes missing from data columns: {missing}")
    if extra:
        raise ConfigError(f"data columns not declared as graph nodes: {extra}")


def to_dot(graph: FeatureGraph) -> str:
    """Dot-style description for visual inspection."""
    lines = ["digraph feature_graph {"]
    for n in graph.nodes:
        shape = "doublecircle" if n == graph.target else "ellipse"
        lines.append(f'  "{n}" [shape={shape}];')
    for s, d in graph.edges:
        lines.append(f'  "{s}" -> "{d}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# adjacency in the layout the attention kernel consumes


def incoming_csr(graph: FeatureGraph, self_loops: str = "isolated"):
    """Edges grouped by destination, as (edge_src, edge_dst, offsets).

    self_loops: "isolated" adds a self-loop only where in-degree would be
    zero (the default for source-only nodes), "all" adds one to every
    node, "none" requires every node to already have an incoming edge.
    """
    if self_loops not in ("isolated", "all", "none"):
        raise ConfigError(f"unknown self_loops mode {self_loops!r}")
    index = {n: i for i, n in enumerate(graph.nodes)}
    per_dst = [[] for _ in graph.nodes]
    for src, dst in graph.edges:
        per_dst[index[dst]].append(index[src])
    for i, incoming in enumerate(per_dst):
        if self_loops == "all" and i not in incoming:
            incoming.append(i)
        elif self_loops == "isolated" and not incoming:
            incoming.append(i)
        elif not incoming:
            raise GraphError(
                f"node {graph.nodes[i]!r} has no incoming edges and self-loops are disabled"
            )
    edge_src, edge_dst, offsets = [], [], [0]
    for i, incoming in enumerate(per_dst):
        edge_src.extend(incoming)
        edge_dst.extend([i] * len(incoming))
        offsets.append(len(edge_src))
    return (
        np.asarray(edge_src, dtype=np.int64),
        np.asarray(edge_dst, dtype=np.int64),
        np.asarray(offsets, dtype=np.int64),
    )
