import pytest

from qdscreen.curated import table1_records
from qdscreen.records import DefectRecord, EnergyLevelSet, HostSpec
from qdscreen.store import DefectStore, StoreError


def make(element="Xm", site="substitutional", charge=0, energy=1.0):
    return DefectRecord(element, site, charge, energy, {"base": {"up": EnergyLevelSet((0.1, 0.2))}})


def test_put_then_query(tmp_path):
    store = DefectStore.create(tmp_path / "s")
    rec = make("Fe")
    assert store.put(rec) == "Fe:substitutional:q0"
    store.put(make("Ti"))
    assert store.query(element="Fe") == [rec]
    assert store.query(charge=1) == []
    assert len(store.query(site="substitutional")) == 2
    assert [r.element for r in store.query(predicate=lambda r: r.element == "Ti")] == ["Ti"]


def test_empty_store(tmp_path):
    assert DefectStore.create(tmp_path / "s").query() == []


def test_idempotent_and_collision(tmp_path):
    store = DefectStore.create(tmp_path / "s")
    store.put(make())
    store.put(make())
    assert len(store) == 1
    with pytest.raises(StoreError, match="id collision"):
        store.put(make(energy=2.0))


def test_reopen_round_trip(tmp_path):
    host = HostSpec(band_gap=1.2)
    store = DefectStore.create(tmp_path / "s", host)
    store.put_many(table1_records())
    again = DefectStore.open(tmp_path / "s")
    assert again.index == store.index
    assert again.host == host
    assert again.query() == store.query()
    assert (tmp_path / "s" / "index").read_text().count("\n") == 14


def test_open_missing(tmp_path):
    with pytest.raises(StoreError):
        DefectStore.open(tmp_path / "nothing")


def test_insertion_order_independent(tmp_path):
    recs = table1_records()
    a = DefectStore.create(tmp_path / "a")
    b = DefectStore.create(tmp_path / "b")
    a.put_many(recs)
    b.put_many(recs[::-1])
    assert [r.defect_id for r in a.query()] == [r.defect_id for r in b.query()]
    assert (tmp_path / "a" / "index").read_text() == (tmp_path / "b" / "index").read_text()


def test_corpus_scale(tmp_path):
    store = DefectStore.create(tmp_path / "s")
    recs = [make(f"E{i // 9:03d}", ("substitutional", "tet_interstitial", "hex_interstitial")[i % 3], i % 9 - 4) for i in range(1042)]
    store.put_many(recs)
    assert len(DefectStore.open(tmp_path / "s").query()) == 1042
