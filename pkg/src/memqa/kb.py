"""Knowledge-base catalog, k-hop candidate generation and answer aspects."""

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import KBError
from .text import context_node_tokens, tokenize

log = logging.getLogger(__name__)


@dataclass
class EntityRecord:
    id: str
    name_tokens: list
    type_tokens: list
    is_literal: bool = False


@dataclass
class RelationRecord:
    id: str
    full_name: str
    words: list


class Edge(NamedTuple):
    neighbor: str
    relation: str
    direction: str  # "out" | "in"


@dataclass
class KnowledgeBase:
    entities: dict = field(default_factory=dict)
    relations: dict = field(default_factory=dict)
    adjacency: dict = field(default_factory=dict)  # entity id -> [Edge]

    def edges(self, entity_id):
        return self.adjacency.get(entity_id, [])

    def has_edge(self, a, relation, b):
        return any(e.neighbor == b and e.relation == relation for e in self.edges(a))

    def entity(self, entity_id):
        try:
            return self.entities[entity_id]
        except KeyError:
            raise KBError(f"unknown entity {entity_id!r}")


def lowest_level_words(full_name):
    """Words of the last dot-segment of a hierarchical relation name."""
    if not full_name:
        raise KBError("empty relation name")
    tail = full_name.rsplit(".", 1)[-1]
    words = [w for w in tail.split("_") if w]
    if not words:
        raise KBError(f"relation name {full_name!r} has no words")
    return words


def load_kb(entities_file, triples_file, relations_file):
    """Load a KB from the three catalog files.

    entities: JSON-lines {"id", "name", "type", "literal"?}
    relations: JSON-lines {"id", "full_name"}
    triples: tab-separated subject, relation, object
    """
    kb = KnowledgeBase()
    with open(entities_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                eid = obj["id"]
                raw_type = obj["type"]
                if isinstance(raw_type, list):  # keep the first listed type
                    raw_type = raw_type[0]
                rec = EntityRecord(
                    id=eid,
                    name_tokens=tokenize(obj["name"]),
                    type_tokens=tokenize(raw_type),
                    is_literal=bool(obj.get("literal", False)),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise KBError(f"{entities_file}:{lineno}: bad entity record ({exc})")
            if eid in kb.entities:
                raise KBError(f"{entities_file}:{lineno}: duplicate entity id {eid!r}")
            kb.entities[eid] = rec
            kb.adjacency[eid] = []

    with open(relations_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rid = obj["id"]
                rec = RelationRecord(rid, obj["full_name"],
                                     lowest_level_words(obj["full_name"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise KBError(f"{relations_file}:{lineno}: bad relation record ({exc})")
            if rid in kb.relations:
                raise KBError(f"{relations_file}:{lineno}: duplicate relation id {rid!r}")
            kb.relations[rid] = rec

    n_triples = 0
    with open(triples_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise KBError(f"{triples_file}:{lineno}: expected 3 tab-separated fields")
            s, r, o = parts
            for eid in (s, o):
                if eid not in kb.entities:
                    raise KBError(f"{triples_file}:{lineno}: unknown entity {eid!r}")
            if r not in kb.relations:
                raise KBError(f"{triples_file}:{lineno}: unknown relation {r!r}")
            kb.adjacency[s].append(Edge(o, r, "out"))
            kb.adjacency[o].append(Edge(s, r, "in"))
            n_triples += 1

    log.info("loaded KB: %d entities, %d relations, %d triples",
             len(kb.entities), len(kb.relations), n_triples)
    return kb


def _distances(kb, source, h):
    """Undirected BFS distances from source, cut off at h hops."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        if dist[node] >= h:
            continue
        for edge in kb.edges(node):
            if edge.neighbor not in dist:
                dist[edge.neighbor] = dist[node] + 1
                queue.append(edge.neighbor)
    return dist


def khop_candidates(kb, topic, h):
    """Entities within [1, h] undirected hops of the topic.

    Deterministic order: ascending distance, then entity id.
    """
    if topic not in kb.entities:
        raise KBError(f"unknown topic entity {topic!r}")
    if h < 1:
        raise KBError(f"hop count must be >= 1, got {h}")
    dist = _distances(kb, topic, h)
    found = [(d, eid) for eid, d in dist.items() if eid != topic]
    found.sort()
    return [eid for _, eid in found]


def extract_answer_path(kb, candidate, topic, h, return_nodes=False):
    """One shortest relation path from candidate to topic.

    Ties pick the lexicographically smallest relation-id sequence.
    Edges are traversed in both directions; tokens concatenate each
    relation's lowest-level words in path order.
    """
    if candidate not in kb.entities:
        raise KBError(f"unknown candidate entity {candidate!r}")
    dist = _distances(kb, topic, h)
    if candidate not in dist or candidate == topic or dist[candidate] > h:
        raise KBError(f"no path from {candidate!r} to {topic!r} within {h} hops")

    best = {topic: ((), ())}  # node -> (relation ids, nodes after this one)

    def best_from(node):
        if node in best:
            return best[node]
        options = []
        for edge in kb.edges(node):
            if dist.get(edge.neighbor, h + 1) == dist[node] - 1:
                rel_tail, node_tail = best_from(edge.neighbor)
                options.append(((edge.relation,) + rel_tail,
                                (edge.neighbor,) + node_tail))
        best[node] = min(options)
        return best[node]

    rel_ids, nodes = best_from(candidate)
    tokens = [w for rid in rel_ids for w in kb.relations[rid].words]
    if return_nodes:
        return list(rel_ids), tokens, [candidate, *nodes]
    return list(rel_ids), tokens


def lcs(a, b):
    """One longest common subsequence of two token lists."""
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                dp[i][j] = dp[i - 1][j - 1] + 1
            else:
                dp[i][j] = max(dp[i - 1][j], dp[i][j - 1])
    out = []
    i, j = n, m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            out.append(a[i - 1])
            i -= 1
            j -= 1
        elif dp[i - 1][j] >= dp[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return out[::-1]


def extract_context(kb, candidate, question_tokens, stopwords, exclude=()):
    """Names of 1-hop neighbors whose overlap with the question survives.

    A neighbor is kept iff the token-level LCS between its (possibly
    placeholder-substituted) name and the question contains at least one
    non-stopword.  `exclude` removes neighbors already on the answer
    path.  Returns one token sequence per kept neighbor.
    """
    seen = set(exclude)
    seen.add(candidate)
    kept = []
    edges = sorted(kb.edges(candidate), key=lambda e: (e.neighbor, e.relation))
    for edge in edges:
        if edge.neighbor in seen:
            continue
        seen.add(edge.neighbor)
        tokens = context_node_tokens(kb.entity(edge.neighbor))
        overlap = lcs(tokens, list(question_tokens))
        if any(tok not in stopwords for tok in overlap):
            kept.append(tokens)
    return kept
