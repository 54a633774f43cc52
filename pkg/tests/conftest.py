"""Shared fixtures: parsed mini ontologies, annotation records, lexicon."""
from pathlib import Path

import pytest

from biont import instances as inst_mod
from biont import ontology

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


def _load_graph(filename: str, namespace: str):
    with open(FIXTURES / filename, encoding="utf-8") as handle:
        return ontology.parse_obo(handle, namespace=namespace)


@pytest.fixture(scope="session")
def chebi():
    return _load_graph("chebi_mini.obo", "chebi")


@pytest.fixture(scope="session")
def go():
    return _load_graph("go_mini.obo", "go")


@pytest.fixture(scope="session")
def hp():
    return _load_graph("hp_mini.obo", "hp")


@pytest.fixture(scope="session")
def doid():
    return _load_graph("doid_mini.obo", "doid")


@pytest.fixture(scope="session")
def gaf_records():
    with open(FIXTURES / "gene_annotations.gaf", encoding="utf-8") as handle:
        return ontology.parse_gaf(handle)


@pytest.fixture(scope="session")
def lexicon():
    with open(FIXTURES / "supersenses.tsv", encoding="utf-8") as handle:
        return inst_mod.load_lexicon(handle)
