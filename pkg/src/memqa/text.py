"""Tokenization, vocabularies, delexicalization and dataset loading."""

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import DataError

_TOKEN_RE = re.compile(r"[a-z0-9_]+")

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1

# fixed order; the row index of each word doubles as its embedding row
INTERROGATIVES = ("which", "what", "who", "whose", "whom",
                  "where", "when", "how", "why", "whether")
# questions without any interrogative word use this extra embedding row
NO_INTERROGATIVE_ROW = len(INTERROGATIVES)

# constraint kind -> placeholder token used in delexicalized questions
PLACEHOLDER_BY_KIND = {"date": "__date__", "ordinal": "__ordinal__",
                       "number": "__number__"}
# entity type label -> placeholder, for KB nodes of constraint-like kinds
PLACEHOLDER_BY_TYPE = {"date": "__date__", "ordinal": "__ordinal__",
                       "num": "__number__"}


def tokenize(text):
    """Lowercase and split on whitespace/punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


def interrogative_index(tokens):
    """Position in INTERROGATIVES of the first such word, or None."""
    for tok in tokens:
        if tok in INTERROGATIVES:
            return INTERROGATIVES.index(tok)
    return None


class Vocabulary:
    """Token <-> index map with PAD=0 and UNK=1."""

    def __init__(self, tokens=()):
        self.index = {PAD: PAD_ID, UNK: UNK_ID}
        self.tokens = [PAD, UNK]
        for tok in tokens:
            self.add(tok)

    def add(self, token):
        if token not in self.index:
            self.index[token] = len(self.tokens)
            self.tokens.append(token)
        return self.index[token]

    def encode(self, tokens):
        return [self.index.get(t, UNK_ID) for t in tokens]

    def decode(self, ids):
        return [self.tokens[i] for i in ids]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


@dataclass
class Mention:
    start: int
    end: int  # exclusive token index
    entity_id: str = ""
    kind: str = ""


@dataclass
class QuestionRecord:
    raw: str
    tokens: list
    gold_answers: set
    topic_mention: Mention | None = None
    constraint_mentions: list = field(default_factory=list)
    delex_tokens: list | None = None
    interrogative: int | None = None


def _check_span(m, n_tokens, where):
    if not (0 <= m.start < m.end <= n_tokens):
        raise DataError(f"{where}: span [{m.start},{m.end}) outside question of {n_tokens} tokens")


def delexicalize(tokens, topic_mention, topic_type_token, constraints,
                 replace_topic=True, replace_constraints=True):
    """Replace the topic span by its entity type and each constraint span
    by its kind placeholder.  Spans must not overlap."""
    spans = []
    if replace_topic and topic_mention is not None:
        _check_span(topic_mention, len(tokens), "topic mention")
        spans.append((topic_mention.start, topic_mention.end, topic_type_token))
    if replace_constraints:
        for m in constraints:
            _check_span(m, len(tokens), "constraint mention")
            try:
                spans.append((m.start, m.end, PLACEHOLDER_BY_KIND[m.kind]))
            except KeyError:
                raise DataError(f"unknown constraint kind {m.kind!r}")
    spans.sort()
    for (s1, e1, _), (s2, _, _) in zip(spans, spans[1:]):
        if s2 < e1:
            raise DataError(f"overlapping mention spans at tokens {s2} < {e1}")
    out = list(tokens)
    for s, e, repl in reversed(spans):
        out[s:e] = [repl]
    return out


def context_node_tokens(entity):
    """Tokens used when a KB node appears as answer context.

    Constraint-like nodes (dates, ordinals, numbers) are replaced by the
    same placeholder the question delexicalization uses, so the two meet
    in embedding space.
    """
    label = "_".join(entity.type_tokens)
    if label in PLACEHOLDER_BY_TYPE:
        return [PLACEHOLDER_BY_TYPE[label]]
    return list(entity.name_tokens)


def type_token(type_tokens):
    """Single delexicalization token for an entity type."""
    return "_".join(type_tokens)


def load_questions(path):
    """Read a JSON-lines QA dataset into QuestionRecords."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                tokens = tokenize(obj["question"])
                topic = None
                if obj.get("topic_mention"):
                    tm = obj["topic_mention"]
                    topic = Mention(int(tm["start"]), int(tm["end"]),
                                    entity_id=tm["entity_id"])
                constraints = [Mention(int(c["start"]), int(c["end"]), kind=c["kind"])
                               for c in obj.get("constraints", [])]
                rec = QuestionRecord(
                    raw=obj["question"],
                    tokens=tokens,
                    gold_answers=set(obj.get("answers", [])),
                    topic_mention=topic,
                    constraint_mentions=constraints,
                    interrogative=interrogative_index(tokens),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad question record ({exc})")
            records.append(rec)
    return records


def load_stopwords(path=None):
    """Stopword set; the packaged english list is used when path is None."""
    if path is None:
        data = resources.files("memqa").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            data = fh.read()
    return frozenset(tok.strip() for tok in data.splitlines() if tok.strip())
