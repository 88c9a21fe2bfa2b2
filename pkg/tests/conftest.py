import json
import os
import sys
from pathlib import Path

# single-threaded BLAS: faster on this workload's small matrices and
# required for the single-core acceptance timing
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from memqa.kb import load_kb
from memqa.text import load_stopwords


def write_kb(dirpath, entities, relations, triples):
    """Write the three catalog files and load them back."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    ent_path = dirpath / "entities.jsonl"
    rel_path = dirpath / "relations.jsonl"
    tri_path = dirpath / "triples.tsv"
    ent_path.write_text("\n".join(json.dumps(e) for e in entities) + "\n")
    rel_path.write_text("\n".join(json.dumps(r) for r in relations) + "\n")
    tri_path.write_text("\n".join("\t".join(t) for t in triples) + ("\n" if triples else ""))
    return load_kb(ent_path, tri_path, rel_path)


GOV_ENTITIES = [
    {"id": "ohio", "name": "ohio", "type": "location"},
    {"id": "husted", "name": "jon a husted", "type": "politician"},
    {"id": "office1", "name": "government office", "type": "government office"},
    {"id": "title1", "name": "secretary of state", "type": "government position title"},
    {"id": "date1", "name": "2011-01-09", "type": "date", "literal": True},
    {"id": "columbus", "name": "columbus", "type": "city"},
]

GOV_RELATIONS = [
    {"id": "governing_officials", "full_name": "government.governance.governing_officials"},
    {"id": "office_holder", "full_name": "government.government_position_held.office_holder"},
    {"id": "held_title", "full_name": "government.official.held_title"},
    {"id": "from_date", "full_name": "government.official.from_date"},
    {"id": "capital", "full_name": "location.state.capital"},
]

GOV_TRIPLES = [
    ("ohio", "governing_officials", "office1"),
    ("office1", "office_holder", "husted"),
    ("husted", "held_title", "title1"),
    ("husted", "from_date", "date1"),
    ("ohio", "capital", "columbus"),
]


@pytest.fixture(scope="session")
def gov_kb(tmp_path_factory):
    """Small governance graph: a state, an office node, its holder, and
    the holder's title/date context."""
    return write_kb(tmp_path_factory.mktemp("gov_kb"), GOV_ENTITIES,
                    GOV_RELATIONS, GOV_TRIPLES)


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture(scope="session")
def toy_paths(tmp_path_factory):
    from memqa.toydata import write_toy_dataset
    out = tmp_path_factory.mktemp("toy")
    return write_toy_dataset(str(out), seed=7)


@pytest.fixture(scope="session")
def toy_kb(toy_paths):
    return load_kb(toy_paths["entities"], toy_paths["triples"], toy_paths["relations"])
