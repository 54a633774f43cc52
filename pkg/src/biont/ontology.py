"""Ontology graphs (OBO) and gene annotations (GAF).

Parses OBO 1.2 flat files into a validated is_a DAG and answers the ancestry
queries the instance generator needs: depth, longest ancestor chain, ancestor
set, and common ancestors of a pair.  GAF 2.x files supply the gene -> GO
mapping used to pick one representative concept per gene.

All functions are pure; parsers read a stream once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, TextIO

from .errors import (
    CrossOntologyPair,
    CycleDetected,
    DanglingParent,
    DuplicateId,
    MalformedLine,
    MalformedStanza,
    ObsoleteConcept,
    UnknownConcept,
)

# Evidence codes counted as experimental when choosing a gene's
# representative concept (experimental + high-throughput groups).
EXPERIMENTAL_CODES = frozenset(
    ["EXP", "IDA", "IPI", "IMP", "IGI", "IEP", "HTP", "HDA", "HMP", "HGI", "HEP"]
)


@dataclass
class OntologyConcept:
    id: str
    name: str
    parents: list[str] = field(default_factory=list)
    alt_ids: list[str] = field(default_factory=list)
    obsolete: bool = False


@dataclass
class OntologyGraph:
    """Validated is_a DAG over non-obsolete concepts.

    `depth` maps each queryable id to its longest-path distance from a root.
    Obsolete concepts stay in `concepts` but have no depth entry and are
    rejected by the query operations.
    """

    namespace: str
    concepts: dict[str, OntologyConcept]
    roots: set[str]
    depth_map: dict[str, int]
    alt_to_primary: dict[str, str]

    def resolve(self, concept_id: str) -> str:
        """Return the primary id for `concept_id`, following alt_ids.

        Raises UnknownConcept / ObsoleteConcept when the id cannot be queried.
        """
        primary = concept_id
        if primary not in self.concepts:
            primary = self.alt_to_primary.get(primary, primary)
        if primary not in self.concepts:
            raise UnknownConcept(f"{concept_id} not in {self.namespace} ontology")
        if self.concepts[primary].obsolete:
            raise ObsoleteConcept(f"{concept_id} is obsolete")
        return primary

    def contains(self, concept_id: str) -> bool:
        try:
            self.resolve(concept_id)
        except (UnknownConcept, ObsoleteConcept):
            return False
        return True

    def query_parents(self, primary_id: str) -> list[str]:
        # Edges into obsolete concepts are not part of the query DAG.
        return [
            p for p in self.concepts[primary_id].parents
            if not self.concepts[p].obsolete
        ]

    @property
    def id_prefixes(self) -> set[str]:
        prefixes = set()
        for cid in self.concepts:
            prefixes.add(cid.split(":", 1)[0] if ":" in cid else "")
        return prefixes


def parse_obo(stream: Iterable[str] | TextIO, namespace: str = "custom") -> OntologyGraph:
    """Parse an OBO 1.2 flat file into an OntologyGraph.

    Only [Term] stanzas are read, and only the keys id, name, alt_id, is_a
    and is_obsolete; other keys and stanza types are ignored.  is_a values
    keep the id before any "!" comment.  Obsolete terms are retained but
    excluded from ancestry queries.
    """
    stanzas: list[OntologyConcept] = []
    current: dict | None = None
    in_term = False

    def flush() -> None:
        nonlocal current
        if current is None:
            return
        if not current.get("id"):
            raise MalformedStanza("[Term] stanza without an id")
        stanzas.append(
            OntologyConcept(
                id=current["id"],
                name=current.get("name", ""),
                parents=current["parents"],
                alt_ids=current["alt_ids"],
                obsolete=current["obsolete"],
            )
        )
        current = None

    for raw in stream:
        line = raw.strip()
        if line.startswith("["):
            flush()
            in_term = line == "[Term]"
            if in_term:
                current = {"parents": [], "alt_ids": [], "obsolete": False}
            continue
        if not in_term or current is None or not line or line.startswith("!"):
            continue
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key == "id":
            current["id"] = value
        elif key == "name":
            current["name"] = value
        elif key == "alt_id":
            current["alt_ids"].append(value)
        elif key == "is_a":
            current["parents"].append(value.split("!")[0].strip())
        elif key == "is_obsolete":
            current["obsolete"] = value.lower() == "true"
    flush()

    concepts: dict[str, OntologyConcept] = {}
    alt_to_primary: dict[str, str] = {}
    for concept in stanzas:
        if concept.id in concepts or concept.id in alt_to_primary:
            raise DuplicateId(concept.id)
        concepts[concept.id] = concept
        for alt in concept.alt_ids:
            if alt in alt_to_primary or alt in concepts:
                raise DuplicateId(alt)
            alt_to_primary[alt] = concept.id
    for alt in alt_to_primary:
        if alt in concepts:
            raise DuplicateId(alt)

    # Normalize parent references: alt ids resolve to primaries, and every
    # parent must exist somewhere in the file.
    for concept in concepts.values():
        resolved = []
        for parent in concept.parents:
            if parent not in concepts:
                parent = alt_to_primary.get(parent, parent)
            if parent not in concepts:
                raise DanglingParent(f"{concept.id} is_a {parent}")
            resolved.append(parent)
        concept.parents = resolved

    _check_acyclic(concepts)

    queryable = [c.id for c in concepts.values() if not c.obsolete]
    query_parents = {
        cid: [p for p in concepts[cid].parents if not concepts[p].obsolete]
        for cid in queryable
    }
    depth_map = _longest_path_depths(queryable, query_parents)
    roots = {cid for cid in queryable if not query_parents[cid]}

    return OntologyGraph(
        namespace=namespace,
        concepts=concepts,
        roots=roots,
        depth_map=depth_map,
        alt_to_primary=alt_to_primary,
    )


def _check_acyclic(concepts: dict[str, OntologyConcept]) -> None:
    """Iterative DFS over child->parent edges; raises CycleDetected with the
    ids on one offending cycle."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {cid: WHITE for cid in concepts}
    for start in concepts:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        path: list[str] = []
        while stack:
            node, edge_idx = stack.pop()
            if edge_idx == 0:
                color[node] = GRAY
                path.append(node)
            parents = concepts[node].parents
            if edge_idx < len(parents):
                stack.append((node, edge_idx + 1))
                nxt = parents[edge_idx]
                if color[nxt] == GRAY:
                    raise CycleDetected(path[path.index(nxt):])
                if color[nxt] == WHITE:
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                path.pop()


def _longest_path_depths(ids: list[str], parents: dict[str, list[str]]) -> dict[str, int]:
    # Kahn order over child->parent edges, then DP from the roots down.
    children: dict[str, list[str]] = {cid: [] for cid in ids}
    pending = {}
    for cid in ids:
        pending[cid] = len(parents[cid])
        for p in parents[cid]:
            children[p].append(cid)
    order = [cid for cid in ids if pending[cid] == 0]
    queue = list(order)
    while queue:
        node = queue.pop()
        for child in children[node]:
            pending[child] -= 1
            if pending[child] == 0:
                order.append(child)
                queue.append(child)
    depth: dict[str, int] = {}
    for cid in order:
        ps = parents[cid]
        depth[cid] = 0 if not ps else 1 + max(depth[p] for p in ps)
    return depth


def depth(graph: OntologyGraph, concept_id: str) -> int:
    """Longest-path distance from a root to the concept."""
    return graph.depth_map[graph.resolve(concept_id)]


def ancestor_chain(graph: OntologyGraph, concept_id: str) -> list[str]:
    """Most-specific-first path to a root, length depth+1.

    At each step the parent with maximal depth is taken; ties break on the
    lexicographically smallest id, so the chain is unique.
    """
    node = graph.resolve(concept_id)
    chain = [node]
    while graph.depth_map[node] > 0:
        parents = graph.query_parents(node)
        top = max(graph.depth_map[p] for p in parents)
        node = min(p for p in parents if graph.depth_map[p] == top)
        chain.append(node)
    return chain


def ancestor_set(graph: OntologyGraph, concept_id: str, inclusive: bool = False) -> set[str]:
    """Transitive closure over is_a parents; includes the concept iff inclusive."""
    start = graph.resolve(concept_id)
    seen: set[str] = set()
    stack = list(graph.query_parents(start))
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        stack.extend(graph.query_parents(node))
    if inclusive:
        seen.add(start)
    return seen


def common_ancestors(graph: OntologyGraph, id1: str, id2: str) -> list[str]:
    """Shared inclusive ancestors, deepest first (ties: smaller id).

    Ids that belong to a different ontology (foreign prefix) raise
    CrossOntologyPair rather than UnknownConcept.
    """
    for cid in (id1, id2):
        prefix = cid.split(":", 1)[0] if ":" in cid else ""
        if prefix and prefix not in graph.id_prefixes:
            raise CrossOntologyPair(f"{cid} does not belong to the {graph.namespace} ontology")
    shared = ancestor_set(graph, id1, inclusive=True) & ancestor_set(graph, id2, inclusive=True)
    return sorted(shared, key=lambda c: (-graph.depth_map[c], c))


# --- GAF --------------------------------------------------------------------


@dataclass
class AnnotationRecord:
    gene_id: str
    concept_id: str
    evidence_code: str
    qualifier_negated: bool = False


def parse_gaf(stream: Iterable[str] | TextIO) -> list[AnnotationRecord]:
    """Parse a GAF 2.x annotation file.

    Lines starting with "!" are comments.  Columns used (1-based): 2 gene id,
    4 qualifier, 5 concept id, 7 evidence code.  A qualifier containing NOT
    marks the record negated.
    """
    records: list[AnnotationRecord] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("!"):
            continue
        cols = line.split("\t")
        if len(cols) < 7:
            raise MalformedLine(f"GAF line {lineno}: expected >= 7 columns, got {len(cols)}")
        evidence = cols[6].strip()
        if not (2 <= len(evidence) <= 4 and evidence.isalpha() and evidence.isupper()):
            raise MalformedLine(f"GAF line {lineno}: bad evidence code {evidence!r}")
        records.append(
            AnnotationRecord(
                gene_id=cols[1].strip(),
                concept_id=cols[4].strip(),
                evidence_code=evidence,
                qualifier_negated="NOT" in cols[3],
            )
        )
    return records


class RepresentativeChoice(NamedTuple):
    concept_id: str
    fallback: bool


def representative_concept(
    graph: OntologyGraph,
    annotations: Iterable[AnnotationRecord],
    gene_id: str,
) -> RepresentativeChoice:
    """Pick the single concept that stands in for a gene.

    Negated records and unknown/obsolete concepts are discarded.  Among the
    survivors, experimentally-evidenced records outrank the rest; within a
    rank the deepest concept wins, ties on the smaller id.  A gene with no
    usable record maps to the lexicographically smallest root, flagged.
    """
    usable: list[tuple[bool, int, str]] = []
    for record in annotations:
        if record.gene_id != gene_id or record.qualifier_negated:
            continue
        if not graph.contains(record.concept_id):
            continue
        primary = graph.resolve(record.concept_id)
        experimental = record.evidence_code in EXPERIMENTAL_CODES
        usable.append((experimental, graph.depth_map[primary], primary))
    if not usable:
        return RepresentativeChoice(min(graph.roots), True)
    pool = [u for u in usable if u[0]] or usable
    best_depth = max(d for _, d, _ in pool)
    chosen = min(cid for _, d, cid in pool if d == best_depth)
    return RepresentativeChoice(chosen, False)
