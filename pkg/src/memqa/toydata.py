"""Deterministic synthetic KB + question set for desk-scale experiments.

The world has 12 entity types and 20 relation types (~200 entities).
Questions are templated and stratified into train/dev/test so every
template is seen in training; they span three difficulty categories:
  - type:    the answer's entity type is the main signal
  - path:    the relation path to the topic is the main signal
  - context: only surrounding nodes (titles, years) separate candidates
"""

import json
import os

import numpy as np

_SYLLABLES = ["ba", "do", "ri", "ka", "lu", "mi", "ta", "ve", "zo", "na",
              "pe", "su", "go", "fe", "wa", "ny", "qu", "sho", "bra", "el"]

_POSITIONS = ["chancellor", "treasurer", "marshal", "envoy",
              "warden", "curator", "provost", "registrar"]

RELATIONS = {
    "located_in": "location.city.located_in",
    "capital_of": "location.country.capital_of",
    "born_in": "people.person.born_in",
    "lives_in": "people.person.live_in",
    "works_for": "people.person.works_for",
    "ceo_of": "business.executive.ceo_of",
    "founded": "business.company.founded",
    "directed": "film.director.directed",
    "starred_in": "film.actor.starred_in",
    "studied_at": "education.person.study_at",
    "plays_for": "sports.player.play_for",
    "speaks": "people.person.speak",
    "spouse_of": "people.person.spouse_of",
    "won_award": "awards.person.won_award",
    "holds_position": "government.official.holds_position",
    "serves_country": "government.official.serves_country",
    "since_year": "government.official.since_year",
    "team_based_in": "sports.team.based_in",
    "flows_through": "geography.river.flows_through",
    "release_year": "film.movie.release_year",
}


class _World:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.entities = {}   # id -> (name, type, literal)
        self.triples = []    # (s, r, o)
        self.used_names = set()

    def name(self, n_tokens=1):
        while True:
            toks = ["".join(self.rng.choice(_SYLLABLES, size=3))
                    for _ in range(n_tokens)]
            name = " ".join(toks)
            if name not in self.used_names:
                self.used_names.add(name)
                return name

    def add(self, eid, name, etype, literal=False):
        self.entities[eid] = (name, etype, literal)
        return eid

    def link(self, s, r, o):
        self.triples.append((s, r, o))

    def neighbors(self, eid, rel):
        out = [o for s, r, o in self.triples if s == eid and r == rel]
        out += [s for s, r, o in self.triples if o == eid and r == rel]
        return out


def build_world(seed=7):
    w = _World(seed)
    rng = w.rng

    countries = [w.add(f"c{i:02d}", w.name(), "country") for i in range(6)]
    cities = []
    capitals = {}
    for ci, country in enumerate(countries):
        group = [w.add(f"ci{ci}{j}", w.name(), "city") for j in range(4)]
        capitals[country] = group[0]
        w.link(group[0], "capital_of", country)
        for city in group[1:]:
            w.link(city, "located_in", country)
        cities.extend(group)

    persons = [w.add(f"p{i:03d}", w.name(2), "person") for i in range(80)]
    companies = [w.add(f"co{i:02d}", w.name(), "company") for i in range(12)]
    movies = [w.add(f"m{i:02d}", w.name(2), "movie") for i in range(16)]
    universities = [w.add(f"u{i:02d}", w.name(), "university") for i in range(6)]
    teams = [w.add(f"t{i:02d}", w.name(), "team") for i in range(8)]
    languages = [w.add(f"l{i:02d}", w.name(), "language") for i in range(6)]
    awards = [w.add(f"a{i:02d}", w.name(), "award") for i in range(8)]
    rivers = [w.add(f"r{i:02d}", w.name(), "river") for i in range(8)]
    years = [w.add(f"y{1991 + i}", str(1991 + i), "num", literal=True)
             for i in range(18)]

    pick = lambda pool: pool[rng.integers(len(pool))]

    # officials first: per country, one office node per held role; the
    # office carries the start year so only the role word distinguishes
    # the officials of one country.  Officials are born in (and live in)
    # the country they serve — a same-named office of another country
    # must never enter the 2-hop graph of this one.
    officials = {}
    positions = []
    home_country = {}
    pool = list(rng.permutation(persons))
    city_group = {c: [ci for ci in cities if ci.startswith(f"ci{k}")]
                  for k, c in enumerate(countries)}
    for ci, country in enumerate(countries):
        chosen_roles = rng.choice(len(_POSITIONS), size=4, replace=False)
        chosen_years = rng.choice(len(years), size=4, replace=False)
        entries = []
        for k, (ri, yi) in enumerate(zip(chosen_roles, chosen_years)):
            office = w.add(f"pos{ci}{k}", _POSITIONS[ri], "position")
            positions.append(office)
            person = pool.pop()
            home_country[person] = country
            w.link(person, "holds_position", office)
            w.link(person, "serves_country", country)
            w.link(office, "since_year", years[yi])
            entries.append((person, office, years[yi]))
        officials[country] = entries

    for person in persons:
        home = city_group.get(home_country.get(person))
        w.link(person, "born_in", pick(home) if home else pick(cities))
        w.link(person, "lives_in", pick(home) if home else pick(cities))
        w.link(person, "speaks", pick(languages))
    civilians = [p for p in persons if p not in home_country]
    studious = rng.choice(persons, size=48, replace=False)
    for person in studious:
        w.link(person, "studied_at", pick(universities))
    players = rng.choice(persons, size=20, replace=False)
    for person in players:
        w.link(person, "plays_for", pick(teams))
    workers = rng.choice(persons, size=40, replace=False)
    for person in workers:
        w.link(person, "works_for", pick(companies))
    paired = rng.choice(civilians, size=24, replace=False)
    for a, b in zip(paired[::2], paired[1::2]):
        w.link(a, "spouse_of", b)
    decorated = rng.choice(persons, size=20, replace=False)
    for person in decorated:
        w.link(person, "won_award", pick(awards))

    for company in companies:
        w.link(pick(persons), "ceo_of", company)
        w.link(pick(persons), "founded", company)
    for movie in movies:
        w.link(pick(persons), "directed", movie)
        for person in rng.choice(persons, size=int(rng.integers(1, 4)), replace=False):
            w.link(person, "starred_in", movie)
        w.link(movie, "release_year", pick(years))
    for team in teams:
        w.link(team, "team_based_in", pick(cities))
    for i, river in enumerate(rivers):
        w.link(river, "flows_through", capitals[countries[i % len(countries)]])
        if i % 2 == 0:
            w.link(river, "flows_through", pick(cities))

    w.capitals = capitals
    w.officials = officials
    w.groups = {"country": countries, "city": cities, "person": persons,
                "company": companies, "movie": movies, "university": universities,
                "team": teams, "language": languages, "position": positions,
                "award": awards, "river": rivers, "num": years}
    return w


# verbosity wrappers: learned word attention has to look past these,
# uniform attention dilutes the informative words with them
_PREFIXES = [[], [], ["please", "tell", "me"], ["i", "want", "to", "know"],
             ["can", "you", "tell", "me"], ["so"]]
_SUFFIXES = [[], [], [], ["if", "you", "know"], ["exactly"]]


def _q(w, tokens, topic, topic_span, answers, category,
       constraint=None):
    prefix = _PREFIXES[w.rng.integers(len(_PREFIXES))]
    suffix = _SUFFIXES[w.rng.integers(len(_SUFFIXES))]
    shift = len(prefix)
    rec = {
        "question": " ".join(prefix + list(tokens) + suffix),
        "answers": sorted(answers),
        "topic_mention": {"start": topic_span[0] + shift,
                          "end": topic_span[1] + shift,
                          "entity_id": topic},
        "constraints": [],
        "category": category,
    }
    if constraint is not None:
        start, end, kind = constraint
        rec["constraints"].append({"start": start + shift, "end": end + shift,
                                   "kind": kind})
    return rec


def _name_tokens(w, eid):
    return w.entities[eid][0].split(" ")


def build_questions(w):
    """One question list per template, answers derived from the graph."""
    rng = w.rng
    g = w.groups
    out = []

    def topic_slot(prefix_tokens, eid, suffix_tokens=()):
        name = _name_tokens(w, eid)
        tokens = list(prefix_tokens) + name + list(suffix_tokens)
        span = (len(prefix_tokens), len(prefix_tokens) + len(name))
        return tokens, span

    def simple(prefix, pool, rel, suffix=(), category="path", reverse=False):
        """Questions whose answers are the topic's `rel` neighbors."""
        qs = []
        for eid in pool:
            answers = w.neighbors(eid, rel)
            if not answers:
                continue
            tokens, span = topic_slot(prefix.split(), eid, suffix)
            qs.append(_q(w, tokens, eid, span, answers, category))
        return qs

    out.append(("live", simple("where does", g["person"], "lives_in",
                               ("live",), "type")))
    out.append(("born", simple("where was", g["person"], "born_in",
                               ("born",), "type")))
    out.append(("speak", simple("what language does", g["person"], "speaks",
                                ("speak",), "type")))
    out.append(("study", simple("where did", g["person"], "studied_at",
                                ("study",), "type")))
    out.append(("spouse", simple("who is the spouse of", g["person"],
                                 "spouse_of", (), "path")))
    out.append(("team", simple("what team does", g["person"], "plays_for",
                               ("play", "for"), "path")))
    out.append(("released", simple("when did", g["movie"], "release_year",
                                   ("come", "out"), "type")))
    out.append(("director", simple("who directed", g["movie"], "directed",
                                   (), "path")))
    out.append(("stars", simple("who starred in", g["movie"], "starred_in",
                                (), "path")))
    out.append(("ceo", simple("who is the ceo of", g["company"], "ceo_of",
                              (), "path")))
    out.append(("founder", simple("who founded", g["company"], "founded",
                                  (), "path")))
    out.append(("award", simple("what award did", g["person"], "won_award",
                                ("win",), "type")))

    non_capital = [c for c in g["city"] if w.neighbors(c, "located_in")]
    out.append(("city_country", simple("what country is", non_capital,
                                       "located_in", ("in",), "path")))
    out.append(("capital", simple("what is the capital of", g["country"],
                                  "capital_of", (), "path")))

    qs = []
    for person in g["person"]:
        city = w.neighbors(person, "born_in")[0]
        country = (w.neighbors(city, "located_in") or
                   w.neighbors(city, "capital_of"))
        tokens, span = topic_slot("what country was".split(), person,
                                  ("born", "in"))
        qs.append(_q(w, tokens, person, span, country, "path"))
    out.append(("born_country", qs))

    qs = []
    for country in g["country"]:
        capital = w.capitals[country]
        riv = w.neighbors(capital, "flows_through")
        if not riv:
            continue
        tokens, span = topic_slot("what river flows through the capital of".split(),
                                  country)
        qs.append(_q(w, tokens, country, span, riv, "path"))
    out.append(("river", qs))

    qs = []
    for country, entries in w.officials.items():
        for person, position, year in entries:
            pos_name = _name_tokens(w, position)
            year_tok = w.entities[year][0]
            prefix = ["who", "was", "the", *pos_name, "of"]
            tokens, span = topic_slot(prefix, country, ("in", year_tok))
            year_pos = len(tokens) - 1
            qs.append(_q(w, tokens, country, span, [person], "context",
                         constraint=(year_pos, year_pos + 1, "number")))
    out.append(("official", qs))
    return out


def split_questions(templates, rng, per_template=(3, 1, 1), context_split=(16, 4, 4)):
    """Stratified train/dev/test split (every template present in train).

    The context-critical template gets a larger share; four regular
    templates give up one training question each to keep 60/20/20.
    """
    train, dev, test = [], [], []
    shrink = {"released", "award", "city_country", "capital"}
    for name, questions in templates:
        order = rng.permutation(len(questions))
        shuffled = [questions[i] for i in order]
        if name == "official":
            n_tr, n_de, n_te = context_split
        else:
            n_tr, n_de, n_te = per_template
            if name in shrink:
                n_tr -= 1
        train.extend(shuffled[:n_tr])
        dev.extend(shuffled[n_tr:n_tr + n_de])
        test.extend(shuffled[n_tr + n_de:n_tr + n_de + n_te])
    return train, dev, test


def world_tokens(w, question_sets):
    """Every token the world or its questions can produce."""
    tokens = set()
    for name, _etype, _lit in w.entities.values():
        tokens.update(name.split(" "))
    for full in RELATIONS.values():
        tokens.update(full.rsplit(".", 1)[-1].split("_"))
    for _name, questions in question_sets:
        for q in questions:
            tokens.update(q["question"].split(" "))
    tokens.update(["__date__", "__ordinal__", "__number__"])
    tokens.update(etype for _n, etype, _l in w.entities.values())
    return sorted(tokens)


def write_word_vectors(path, tokens, dim=300, seed=7, scale=0.4):
    """Stand-in for pre-trained vectors: fixed random directions at the
    scale real distributional embeddings have."""
    rng = np.random.default_rng([seed, 101])
    with open(path, "w", encoding="utf-8") as fh:
        for tok in tokens:
            vals = rng.normal(0.0, scale, size=dim)
            fh.write(tok + " " + " ".join(f"{v:.5f}" for v in vals) + "\n")


def write_toy_dataset(out_dir, seed=7):
    """Generate the toy KB + splits under out_dir; returns file paths."""
    w = build_world(seed)
    templates = build_questions(w)
    train, dev, test = split_questions(templates, w.rng)

    kb_dir = os.path.join(out_dir, "kb")
    os.makedirs(kb_dir, exist_ok=True)
    paths = {
        "kb_dir": kb_dir,
        "entities": os.path.join(kb_dir, "entities.jsonl"),
        "relations": os.path.join(kb_dir, "relations.jsonl"),
        "triples": os.path.join(kb_dir, "triples.tsv"),
        "train": os.path.join(out_dir, "train.jsonl"),
        "dev": os.path.join(out_dir, "dev.jsonl"),
        "test": os.path.join(out_dir, "test.jsonl"),
        "vectors": os.path.join(out_dir, "vectors.txt"),
    }
    write_word_vectors(paths["vectors"], world_tokens(w, templates), seed=seed)
    with open(paths["entities"], "w", encoding="utf-8") as fh:
        for eid, (name, etype, literal) in w.entities.items():
            rec = {"id": eid, "name": name, "type": etype}
            if literal:
                rec["literal"] = True
            fh.write(json.dumps(rec) + "\n")
    with open(paths["relations"], "w", encoding="utf-8") as fh:
        for rid, full in RELATIONS.items():
            fh.write(json.dumps({"id": rid, "full_name": full}) + "\n")
    with open(paths["triples"], "w", encoding="utf-8") as fh:
        for s, r, o in w.triples:
            fh.write(f"{s}\t{r}\t{o}\n")
    for split, questions in (("train", train), ("dev", dev), ("test", test)):
        with open(paths[split], "w", encoding="utf-8") as fh:
            for rec in questions:
                fh.write(json.dumps(rec) + "\n")
    return paths


def toy_train_config(paths, seed=1, **overrides):
    """Training configuration for the toy-scale experiment.

    Keeps the reference model sizes (d=128, memory 96, theta 0.7) but
    adapts the data-scale knobs: a 60-question corpus needs a small
    batch for enough optimizer steps per epoch, light dropout, and the
    stand-in pre-trained word vectors.
    """
    from .config import TrainConfig
    base = dict(seed=seed, batch_size=3, dropout_embed=0.1,
                dropout_question=0.1, dropout_answer=0.1,
                word_vectors=paths["vectors"], max_epochs=200)
    base.update(overrides)
    return TrainConfig(**base)
