import json

import pytest

from evcoref.corpus import Document, Mention, TypeInventory


@pytest.fixture(scope="session")
def inventory():
    return TypeInventory.default()


@pytest.fixture(scope="session")
def small_inventory():
    return TypeInventory(("Alpha", "Beta", "Gamma", "Delta"))


def make_doc(doc_id="d", n_tokens=12, mentions=()):
    """mentions: iterable of (token_index, type_ordinal, chain_id)."""
    return Document(
        doc_id,
        tuple(f"tok{i}" for i in range(n_tokens)),
        tuple(Mention(t, ty, cid) for t, ty, cid in mentions),
    )


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


@pytest.fixture()
def figure_doc(inventory):
    """A document shaped like the running example: an EndPosition chain
    {departing, leave, goodbye} plus a StartPosition singleton {rejoin}."""
    end = inventory.ordinal("EndPosition")
    start = inventory.ordinal("StartPosition")
    tokens = ("Nokia", "CEO", "is", "departing", "and", "will", "leave",
              "the", "company", "to", "rejoin", "his", "old", "team",
              "after", "a", "long", "goodbye", "note", ".")
    mentions = (
        Mention(3, end, "c1"),
        Mention(6, end, "c1"),
        Mention(10, start, "c2"),
        Mention(17, end, "c1"),
    )
    return Document("fig1", tokens, mentions)
