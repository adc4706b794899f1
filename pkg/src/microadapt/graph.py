"""Prerequisite mind map as a DAG of concepts and the microlearning units covering them.

The graph is built either programmatically or from a line-oriented text DSL:

    # comment lines and blank lines are ignored
    concept <id> "<title>" [kind=prerequisite|course_topic]
    requires <target-id> <- <prereq-id>
    unit <id> "<title>" covers <id>[,<id>...] kind=<kind> minutes=<1..15> uri="<locator>"

``requires xform <- vec`` reads "vec is a prerequisite of xform".  Declarations
may appear in any order; references are resolved once the whole document has
been read.  Declaration order is preserved and breaks all ordering ties, so
every query on a given document is deterministic.

A ConceptGraph is immutable after construction and safe to share between
threads; "mutation" means building a new graph and swapping the reference.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

TOKEN_RE = re.compile(r"[a-z0-9_-]+\Z")

MAX_UNIT_MINUTES = 15


class GraphError(Exception):
    """Base class for mind map construction and query errors."""


class MindmapSyntaxError(GraphError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DuplicateIdError(GraphError):
    pass


class UnknownReferenceError(GraphError):
    pass


class UnknownConceptError(GraphError):
    pass


class CycleError(GraphError):
    """Raised when the prerequisite edges contain a cycle.

    ``path`` is one offending cycle as a list of concept ids; consecutive
    entries are joined by "is a prerequisite of" and the first id repeats at
    the end, e.g. ``["a", "b", "a"]``.
    """

    def __init__(self, path: Sequence[str]):
        self.path = list(path)
        super().__init__("cycle detected: " + " -> ".join(self.path))


class ConceptKind(enum.Enum):
    PREREQUISITE = "prerequisite"
    COURSE_TOPIC = "course_topic"


class UnitKind(enum.Enum):
    VIDEO = "video"
    PROJECT = "project"
    PRESENTATION = "presentation"
    TEXT = "text"
    QUIZLET = "quizlet"


def _check_token(value: str, what: str) -> str:
    if not TOKEN_RE.match(value):
        raise GraphError(f"{what} {value!r} is not a valid token ([a-z0-9_-]+)")
    return value


def _check_title(value: str, what: str) -> str:
    # titles must survive the canonical quoted serialization
    if '"' in value or "\n" in value:
        raise GraphError(f'{what} may not contain double quotes or newlines')
    return value


@dataclass(frozen=True)
class Concept:
    id: str
    title: str
    kind: ConceptKind = ConceptKind.PREREQUISITE
    description: str = ""

    def __post_init__(self):
        _check_token(self.id, "concept id")
        _check_title(self.title, f"concept {self.id}: title")


@dataclass(frozen=True)
class PrerequisiteEdge:
    """``prerequisite`` must be mastered before ``target``."""

    target: str
    prerequisite: str


@dataclass(frozen=True)
class MicrolearningUnit:
    id: str
    title: str
    covers: tuple[str, ...]
    kind: UnitKind
    duration_minutes: int
    content_uri: str
    version: int = 1

    def __post_init__(self):
        _check_token(self.id, "unit id")
        _check_title(self.title, f"unit {self.id}: title")
        if '"' in self.content_uri:
            raise GraphError(f"unit {self.id}: uri may not contain double quotes")
        if not self.covers:
            raise GraphError(f"unit {self.id}: covers set is empty")
        if len(set(self.covers)) != len(self.covers):
            raise GraphError(f"unit {self.id}: duplicate concept in covers")
        if not 0 < self.duration_minutes <= MAX_UNIT_MINUTES:
            raise GraphError(
                f"unit {self.id}: duration must be 1..{MAX_UNIT_MINUTES} minutes,"
                f" got {self.duration_minutes}"
            )


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str
    subject: str = ""


class ConceptGraph:
    """Concepts, prerequisite edges, and units, in declaration order.

    Construction is permissive about dangling references and cycles so that
    ``validate`` can report them as findings; queries that need a resolvable
    acyclic graph raise instead.
    """

    def __init__(
        self,
        concepts: Iterable[Concept] = (),
        edges: Iterable[PrerequisiteEdge] = (),
        units: Iterable[MicrolearningUnit] = (),
    ):
        self.concepts: dict[str, Concept] = {}
        for concept in concepts:
            if concept.id in self.concepts:
                raise DuplicateIdError(f"duplicate concept id {concept.id!r}")
            self.concepts[concept.id] = concept
        self.edges: tuple[PrerequisiteEdge, ...] = tuple(edges)
        seen_edges = set()
        for edge in self.edges:
            key = (edge.target, edge.prerequisite)
            if key in seen_edges:
                raise DuplicateIdError(
                    f"duplicate edge {edge.target} <- {edge.prerequisite}"
                )
            seen_edges.add(key)
        self.units: dict[str, MicrolearningUnit] = {}
        for unit in units:
            if unit.id in self.units:
                raise DuplicateIdError(f"duplicate unit id {unit.id!r}")
            self.units[unit.id] = unit
        self._decl_index = {cid: i for i, cid in enumerate(self.concepts)}
        self._topo_cache: tuple[str, ...] | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConceptGraph):
            return NotImplemented
        return (
            list(self.concepts.values()) == list(other.concepts.values())
            and self.edges == other.edges
            and list(self.units.values()) == list(other.units.values())
        )

    def __repr__(self) -> str:
        return (
            f"ConceptGraph({len(self.concepts)} concepts,"
            f" {len(self.edges)} edges, {len(self.units)} units)"
        )

    # -- structure ---------------------------------------------------------

    def _require_concept(self, concept_id: str) -> None:
        if concept_id not in self.concepts:
            raise UnknownConceptError(f"unknown concept id {concept_id!r}")

    def direct_prerequisites(self, concept_id: str) -> list[str]:
        self._require_concept(concept_id)
        return [e.prerequisite for e in self.edges if e.target == concept_id]

    def dependents_adjacency(self) -> dict[str, list[str]]:
        """prerequisite id -> targets that list it, in edge declaration order."""
        adj: dict[str, list[str]] = {cid: [] for cid in self.concepts}
        for edge in self.edges:
            if edge.prerequisite in adj and edge.target in self.concepts:
                adj[edge.prerequisite].append(edge.target)
        return adj

    def find_cycle(self) -> list[str] | None:
        """One cycle as an id path (first id repeated at the end), or None.

        Follows edges in the "is a prerequisite of" direction, visiting nodes
        in declaration order, so the reported cycle is deterministic.
        Iterative DFS: graph depth is not bounded by the recursion limit.
        """
        adj = self.dependents_adjacency()
        color: dict[str, int] = {}  # 0 unvisited / 1 on stack / 2 done
        path: list[str] = []

        for root in self.concepts:
            if color.get(root, 0) != 0:
                continue
            work: list[tuple[str, int]] = [(root, 0)]
            while work:
                node, next_child = work[-1]
                if next_child == 0:
                    color[node] = 1
                    path.append(node)
                if next_child < len(adj[node]):
                    work[-1] = (node, next_child + 1)
                    succ = adj[node][next_child]
                    state = color.get(succ, 0)
                    if state == 1:
                        return path[path.index(succ):] + [succ]
                    if state == 0:
                        work.append((succ, 0))
                else:
                    work.pop()
                    path.pop()
                    color[node] = 2
        return None

    def topological_order(self) -> tuple[str, ...]:
        """All concept ids, prerequisites before dependents, ties by declaration."""
        if self._topo_cache is not None:
            return self._topo_cache
        for edge in self.edges:
            if edge.target not in self.concepts:
                raise UnknownReferenceError(f"edge target {edge.target!r} not declared")
            if edge.prerequisite not in self.concepts:
                raise UnknownReferenceError(
                    f"edge prerequisite {edge.prerequisite!r} not declared"
                )
        indegree = {cid: 0 for cid in self.concepts}
        for edge in self.edges:
            indegree[edge.target] += 1
        adj = self.dependents_adjacency()
        import heapq

        ready = [self._decl_index[cid] for cid, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        ids = list(self.concepts)
        order: list[str] = []
        while ready:
            cid = ids[heapq.heappop(ready)]
            order.append(cid)
            for succ in adj[cid]:
                indegree[succ] -= 1
                if indegree[succ] == 0:
                    heapq.heappush(ready, self._decl_index[succ])
        if len(order) != len(self.concepts):
            cycle = self.find_cycle()
            assert cycle is not None
            raise CycleError(cycle)
        self._topo_cache = tuple(order)
        return self._topo_cache

    def topological_rank(self) -> dict[str, int]:
        return {cid: i for i, cid in enumerate(self.topological_order())}

    # -- queries -----------------------------------------------------------

    def prerequisite_closure(self, concept_id: str) -> list[str]:
        """All direct and transitive prerequisites, dependency-first order."""
        self._require_concept(concept_id)
        rank = self.topological_rank()
        prereqs: dict[str, list[str]] = {cid: [] for cid in self.concepts}
        for edge in self.edges:
            prereqs[edge.target].append(edge.prerequisite)
        seen: set[str] = set()
        frontier = [concept_id]
        while frontier:
            node = frontier.pop()
            for pre in prereqs[node]:
                if pre not in seen:
                    seen.add(pre)
                    frontier.append(pre)
        seen.discard(concept_id)
        return sorted(seen, key=rank.__getitem__)

    def units_for_concepts(self, concept_ids: Iterable[str]) -> list[str]:
        """Ids of every unit covering at least one of the given concepts.

        Ordered by the topological rank of the earliest concept each unit
        covers, then by unit declaration order.
        """
        wanted = set(concept_ids)
        for cid in wanted:
            self._require_concept(cid)
        rank = self.topological_rank()
        hits = []
        for index, unit in enumerate(self.units.values()):
            if wanted.intersection(unit.covers):
                try:
                    earliest = min(rank[cid] for cid in unit.covers)
                except KeyError as exc:
                    raise UnknownReferenceError(
                        f"unit {unit.id} covers undeclared concept {exc.args[0]!r}"
                    ) from exc
                hits.append((earliest, index, unit.id))
        hits.sort()
        return [uid for _, _, uid in hits]

    # -- serialization -----------------------------------------------------

    def serialize(self) -> str:
        """Canonical DSL form: declaration order, normalized whitespace."""
        lines = []
        for concept in self.concepts.values():
            lines.append(
                f'concept {concept.id} "{concept.title}" kind={concept.kind.value}'
            )
        for edge in self.edges:
            lines.append(f"requires {edge.target} <- {edge.prerequisite}")
        for unit in self.units.values():
            covers = ",".join(unit.covers)
            lines.append(
                f'unit {unit.id} "{unit.title}" covers {covers}'
                f" kind={unit.kind.value} minutes={unit.duration_minutes}"
                f' uri="{unit.content_uri}"'
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def to_payload(self) -> dict:
        """JSON-ready structure mirroring the DSL content."""
        return {
            "concepts": [
                {
                    "id": c.id,
                    "title": c.title,
                    "kind": c.kind.value,
                    "description": c.description,
                }
                for c in self.concepts.values()
            ],
            "edges": [
                {"target": e.target, "prerequisite": e.prerequisite}
                for e in self.edges
            ],
            "units": [
                {
                    "id": u.id,
                    "title": u.title,
                    "covers": list(u.covers),
                    "kind": u.kind.value,
                    "duration_minutes": u.duration_minutes,
                    "content_uri": u.content_uri,
                    "version": u.version,
                }
                for u in self.units.values()
            ],
        }


def validate(graph: ConceptGraph) -> list[Finding]:
    """Well-formedness findings: errors for cycles and dangling references,
    warnings for prerequisite concepts nobody covers or that no course topic
    transitively requires.  Empty list means the graph passes all invariants.
    """
    findings: list[Finding] = []
    for edge in graph.edges:
        for endpoint in (edge.target, edge.prerequisite):
            if endpoint not in graph.concepts:
                findings.append(
                    Finding(
                        Severity.ERROR,
                        "dangling-ref",
                        f"edge {edge.target} <- {edge.prerequisite} references"
                        f" undeclared concept {endpoint}",
                        endpoint,
                    )
                )
    for unit in graph.units.values():
        for cid in unit.covers:
            if cid not in graph.concepts:
                findings.append(
                    Finding(
                        Severity.ERROR,
                        "dangling-ref",
                        f"unit {unit.id} covers undeclared concept {cid}",
                        cid,
                    )
                )
    cycle = graph.find_cycle()
    if cycle is not None:
        findings.append(
            Finding(
                Severity.ERROR,
                "cycle",
                "cycle detected: " + " -> ".join(cycle),
                cycle[0],
            )
        )
    if any(f.severity is Severity.ERROR for f in findings):
        return findings

    covered = {cid for unit in graph.units.values() for cid in unit.covers}
    # Only prerequisite concepts need covering units: course topics are
    # delivered by the regular course, prerequisites by remediation units.
    for concept in graph.concepts.values():
        if concept.kind is ConceptKind.PREREQUISITE and concept.id not in covered:
            findings.append(
                Finding(
                    Severity.WARNING,
                    "no-covering-unit",
                    f"no unit covers {concept.id}",
                    concept.id,
                )
            )
    # A prerequisite no course topic transitively requires can never be
    # recommended; flag it as unreachable.
    required: set[str] = set()
    for concept in graph.concepts.values():
        if concept.kind is ConceptKind.COURSE_TOPIC:
            required.update(graph.prerequisite_closure(concept.id))
    for concept in graph.concepts.values():
        if concept.kind is ConceptKind.PREREQUISITE and concept.id not in required:
            findings.append(
                Finding(
                    Severity.WARNING,
                    "unreachable",
                    f"{concept.id} is not a prerequisite of any course topic",
                    concept.id,
                )
            )
    return findings


# -- DSL parsing -----------------------------------------------------------


_KIND_KEYS = {"kind", "minutes", "uri"}


def _tokenize(line: str, lineno: int) -> list[tuple[str, int, bool]]:
    """Split a line into (token, column, was_quoted) triples; columns are 1-based."""
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        if line[i].isspace():
            i += 1
            continue
        start = i
        if line[i] == '"':
            end = line.find('"', i + 1)
            if end == -1:
                raise MindmapSyntaxError("unterminated string", lineno, start + 1)
            tokens.append((line[i + 1:end], start + 1, True))
            i = end + 1
        else:
            while i < n and not line[i].isspace():
                i += 1
            tokens.append((line[start:i], start + 1, False))
    return tokens


@dataclass
class _Decl:
    lineno: int
    value: object


def parse_mindmap(text: str) -> ConceptGraph:
    """Parse the mind map DSL into a ConceptGraph.

    Raises MindmapSyntaxError (with line and column), DuplicateIdError,
    UnknownReferenceError, or CycleError (naming one offending cycle).
    """
    concepts: list[_Decl] = []
    edges: list[_Decl] = []
    units: list[_Decl] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = _tokenize(raw, lineno)
        head, col, quoted = tokens[0]
        if quoted:
            raise MindmapSyntaxError("statement cannot start with a string", lineno, col)
        if head == "concept":
            concepts.append(_Decl(lineno, _parse_concept(tokens, lineno)))
        elif head == "requires":
            edges.append(_Decl(lineno, _parse_requires(tokens, lineno)))
        elif head == "unit":
            units.append(_Decl(lineno, _parse_unit(tokens, lineno)))
        else:
            raise MindmapSyntaxError(
                f"unknown statement {head!r} (expected concept, requires, or unit)",
                lineno,
                col,
            )

    seen: dict[str, int] = {}
    for decl in concepts:
        concept: Concept = decl.value  # type: ignore[assignment]
        if concept.id in seen:
            raise DuplicateIdError(
                f"line {decl.lineno}: concept id {concept.id!r} already declared"
                f" on line {seen[concept.id]}"
            )
        seen[concept.id] = decl.lineno
    seen_units: dict[str, int] = {}
    for decl in units:
        unit: MicrolearningUnit = decl.value  # type: ignore[assignment]
        if unit.id in seen_units:
            raise DuplicateIdError(
                f"line {decl.lineno}: unit id {unit.id!r} already declared"
                f" on line {seen_units[unit.id]}"
            )
        seen_units[unit.id] = decl.lineno

    concept_ids = set(seen)
    seen_edges: dict[tuple[str, str], int] = {}
    for decl in edges:
        edge: PrerequisiteEdge = decl.value  # type: ignore[assignment]
        for endpoint in (edge.target, edge.prerequisite):
            if endpoint not in concept_ids:
                raise UnknownReferenceError(
                    f"line {decl.lineno}: unknown concept {endpoint!r}"
                )
        if edge.target == edge.prerequisite:
            raise CycleError([edge.target, edge.target])
        key = (edge.target, edge.prerequisite)
        if key in seen_edges:
            raise DuplicateIdError(
                f"line {decl.lineno}: edge {edge.target} <- {edge.prerequisite}"
                f" already declared on line {seen_edges[key]}"
            )
        seen_edges[key] = decl.lineno
    for decl in units:
        unit = decl.value  # type: ignore[assignment]
        for cid in unit.covers:
            if cid not in concept_ids:
                raise UnknownReferenceError(
                    f"line {decl.lineno}: unknown concept {cid!r} in covers"
                )

    graph = ConceptGraph(
        concepts=[d.value for d in concepts],  # type: ignore[misc]
        edges=[d.value for d in edges],  # type: ignore[misc]
        units=[d.value for d in units],  # type: ignore[misc]
    )
    cycle = graph.find_cycle()
    if cycle is not None:
        raise CycleError(cycle)
    return graph


def _expect(tokens: list[tuple[str, int, bool]], index: int, lineno: int, what: str):
    if index >= len(tokens):
        last_col = tokens[-1][1] + len(tokens[-1][0]) if tokens else 1
        raise MindmapSyntaxError(f"expected {what}", lineno, last_col)
    return tokens[index]


def _bare_token(tokens, index, lineno, what) -> str:
    value, col, quoted = _expect(tokens, index, lineno, what)
    if quoted or not TOKEN_RE.match(value):
        raise MindmapSyntaxError(f"expected {what}, got {value!r}", lineno, col)
    return value


def _parse_concept(tokens, lineno) -> Concept:
    cid = _bare_token(tokens, 1, lineno, "concept id")
    title, col, quoted = _expect(tokens, 2, lineno, "quoted title")
    if not quoted:
        raise MindmapSyntaxError("concept title must be quoted", lineno, col)
    kind = ConceptKind.PREREQUISITE
    if len(tokens) > 3:
        value, col, quoted = tokens[3]
        if quoted or not value.startswith("kind="):
            raise MindmapSyntaxError("expected kind=<kind>", lineno, col)
        try:
            kind = ConceptKind(value[len("kind="):])
        except ValueError:
            raise MindmapSyntaxError(f"unknown concept kind {value[5:]!r}", lineno, col)
        if len(tokens) > 4:
            raise MindmapSyntaxError("trailing tokens", lineno, tokens[4][1])
    return Concept(id=cid, title=title, kind=kind)


def _parse_requires(tokens, lineno) -> PrerequisiteEdge:
    target = _bare_token(tokens, 1, lineno, "target concept id")
    arrow, col, quoted = _expect(tokens, 2, lineno, "'<-'")
    if quoted or arrow != "<-":
        raise MindmapSyntaxError(f"expected '<-', got {arrow!r}", lineno, col)
    prereq = _bare_token(tokens, 3, lineno, "prerequisite concept id")
    if len(tokens) > 4:
        raise MindmapSyntaxError("trailing tokens", lineno, tokens[4][1])
    return PrerequisiteEdge(target=target, prerequisite=prereq)


def _parse_unit(tokens, lineno) -> MicrolearningUnit:
    uid = _bare_token(tokens, 1, lineno, "unit id")
    title, col, quoted = _expect(tokens, 2, lineno, "quoted title")
    if not quoted:
        raise MindmapSyntaxError("unit title must be quoted", lineno, col)
    keyword, col, quoted = _expect(tokens, 3, lineno, "'covers'")
    if quoted or keyword != "covers":
        raise MindmapSyntaxError(f"expected 'covers', got {keyword!r}", lineno, col)
    covers_raw, col, quoted = _expect(tokens, 4, lineno, "concept id list")
    if quoted:
        raise MindmapSyntaxError("covers list must be bare ids", lineno, col)
    covers = tuple(part for part in covers_raw.split(",") if part)
    if not covers:
        raise MindmapSyntaxError("covers list is empty", lineno, col)
    for part in covers:
        if not TOKEN_RE.match(part):
            raise MindmapSyntaxError(f"bad concept id {part!r} in covers", lineno, col)
    kind = None
    minutes = None
    uri = None
    for value, col, quoted in tokens[5:]:
        if "=" not in value:
            raise MindmapSyntaxError(f"expected key=value, got {value!r}", lineno, col)
        key, _, rest = value.partition("=")
        if key not in _KIND_KEYS:
            raise MindmapSyntaxError(f"unknown unit attribute {key!r}", lineno, col)
        if key == "kind":
            try:
                kind = UnitKind(rest)
            except ValueError:
                raise MindmapSyntaxError(f"unknown unit kind {rest!r}", lineno, col)
        elif key == "minutes":
            if not rest.isdigit():
                raise MindmapSyntaxError(f"minutes must be an integer", lineno, col)
            minutes = int(rest)
            if not 0 < minutes <= MAX_UNIT_MINUTES:
                raise MindmapSyntaxError(
                    f"minutes must be 1..{MAX_UNIT_MINUTES}, got {minutes}", lineno, col
                )
        else:
            uri = rest.strip('"')
    for name, got in (("kind", kind), ("minutes", minutes), ("uri", uri)):
        if got is None:
            raise MindmapSyntaxError(f"unit is missing {name}=", lineno,
                                     tokens[-1][1] + len(tokens[-1][0]))
    return MicrolearningUnit(
        id=uid,
        title=title,
        covers=covers,
        kind=kind,
        duration_minutes=minutes,
        content_uri=uri,
    )
