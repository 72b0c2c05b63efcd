import numpy as np
import pytest

from evcoref.embeddings import (
    DirectoryEmbeddings, EmbeddingFormatError, LayeredEmbeddings,
    load_embeddings, synth_embeddings, write_embeddings,
)

from conftest import make_doc


def test_synth_deterministic():
    doc = make_doc("d1", 6, mentions=[(2, 3, "a")])
    a = synth_embeddings(doc, seed=7, layers=3, dim=8, type_signal=1.5)
    b = synth_embeddings(doc, seed=7, layers=3, dim=8, type_signal=1.5)
    assert a.values.tobytes() == b.values.tobytes()


def test_synth_doc_id_keying():
    a = synth_embeddings(make_doc("one", 5), seed=1, layers=2, dim=4)
    b = synth_embeddings(make_doc("two", 5), seed=1, layers=2, dim=4)
    assert not np.array_equal(a.values, b.values)


def test_synth_ignores_annotations_without_signal():
    plain = make_doc("same", 6)
    tagged = make_doc("same", 6, mentions=[(1, 2, "a"), (4, 2, "a")])
    a = synth_embeddings(plain, seed=3, layers=2, dim=8, type_signal=0.0)
    b = synth_embeddings(tagged, seed=3, layers=2, dim=8, type_signal=0.0)
    assert np.array_equal(a.values, b.values)


def test_synth_type_signal_moves_mention_tokens_only():
    plain = make_doc("same", 6)
    tagged = make_doc("same", 6, mentions=[(1, 2, "a")])
    a = synth_embeddings(plain, seed=3, layers=2, dim=8, type_signal=2.0)
    b = synth_embeddings(tagged, seed=3, layers=2, dim=8, type_signal=2.0)
    differs = np.any(a.values != b.values, axis=(1, 2))
    assert differs.tolist() == [False, True, False, False, False, False]


def test_synth_seed_keying():
    doc = make_doc("d", 4)
    a = synth_embeddings(doc, seed=1, layers=2, dim=4)
    b = synth_embeddings(doc, seed=2, layers=2, dim=4)
    assert not np.array_equal(a.values, b.values)


def test_write_load_round_trip(tmp_path):
    doc = make_doc("roundtrip", 5)
    emb = synth_embeddings(doc, seed=9, layers=13, dim=64)
    path = tmp_path / "roundtrip.e3ce"
    write_embeddings(emb, path)
    loaded = load_embeddings(path, doc)
    assert loaded.doc_id == "roundtrip"
    assert loaded.layers == 13 and loaded.dim == 64
    assert loaded.values.tobytes() == emb.values.tobytes()


def test_load_token_count_mismatch(tmp_path):
    emb = synth_embeddings(make_doc("d", 4), seed=0, layers=2, dim=4)
    path = tmp_path / "d.e3ce"
    write_embeddings(emb, path)
    with pytest.raises(EmbeddingFormatError, match="tokens"):
        load_embeddings(path, make_doc("d", 3))


def test_load_bad_magic(tmp_path):
    path = tmp_path / "x.e3ce"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(EmbeddingFormatError, match="magic"):
        load_embeddings(path, make_doc("d", 1))


def test_load_truncated_payload(tmp_path):
    emb = synth_embeddings(make_doc("d", 4), seed=0, layers=2, dim=4)
    path = tmp_path / "d.e3ce"
    write_embeddings(emb, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(EmbeddingFormatError, match="payload"):
        load_embeddings(path, make_doc("d", 4))


def test_load_bad_version(tmp_path):
    emb = synth_embeddings(make_doc("d", 2), seed=0, layers=1, dim=2)
    path = tmp_path / "d.e3ce"
    write_embeddings(emb, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 99
    path.write_bytes(bytes(raw))
    with pytest.raises(EmbeddingFormatError, match="version"):
        load_embeddings(path, make_doc("d", 2))


def test_non_finite_rejected():
    values = np.zeros((2, 1, 3), dtype=np.float32)
    values[1, 0, 2] = np.inf
    with pytest.raises(EmbeddingFormatError, match="non-finite"):
        LayeredEmbeddings("bad", values)


def test_directory_source(tmp_path):
    doc = make_doc("docA", 4)
    emb = synth_embeddings(doc, seed=1, layers=2, dim=4)
    write_embeddings(emb, tmp_path / "docA.e3ce")
    source = DirectoryEmbeddings(tmp_path)
    assert source.get(doc).values.tobytes() == emb.values.tobytes()


def test_truncated_view():
    emb = synth_embeddings(make_doc("d", 8), seed=0, layers=2, dim=4)
    short = emb.truncated(5)
    assert short.n == 5
    assert np.array_equal(short.values, emb.values[:5])
