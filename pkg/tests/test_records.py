import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdscreen.records import (
    SITES,
    DefectRecord,
    EnergyLevelSet,
    PlaneWaveState,
    RecordError,
    TransitionSummary,
    Wavefunctions,
    make_defect_id,
    parse_defect_id,
    parse_record,
    serialize_record,
)
from conftest import PROPERTY_CASES

MINIMAL = {
    "schema": 1,
    "element": "Fe",
    "site": "tet_interstitial",
    "charge": 0,
    "total_energy": -12.5,
    "level_sets": {"base": {"up": {"eigenvalues": [0.1, 0.4]}}},
}


def doc(**changes):
    d = json.loads(json.dumps(MINIMAL))
    d.update(changes)
    return json.dumps(d)


def test_minimal_record():
    rec = parse_record(doc())
    assert rec.defect_id == "Fe:tet_interstitial:q0"
    assert rec.wavefunctions is None and rec.zpl_override is None and rec.occupations == {}
    assert rec.levels("corrected")["up"].eigenvalues == (0.1, 0.4)


def test_defect_id_round_trip():
    for q in (-2, 0, 3):
        assert parse_defect_id(make_defect_id("Ni", "substitutional", q)) == ("Ni", "substitutional", q)


def test_shape_mismatch():
    with pytest.raises(RecordError, match="shape mismatch") as err:
        parse_record(doc(occupations={"up": [1.0]}))
    assert err.value.field == "occupations"


def test_occupation_range():
    with pytest.raises(RecordError, match=r"occupation outside \[0, 1\]"):
        parse_record(doc(occupations={"up": [1.0, 1.5]}))


def test_unsorted_levels_rejected():
    with pytest.raises(RecordError, match="not sorted"):
        parse_record(doc(level_sets={"base": {"up": {"eigenvalues": [0.4, 0.1]}}}))


@pytest.mark.parametrize("missing", ["element", "site", "charge", "total_energy", "level_sets"])
def test_missing_required(missing):
    d = json.loads(doc())
    del d[missing]
    with pytest.raises(RecordError, match="missing required field") as err:
        parse_record(json.dumps(d))
    assert err.value.field == missing


def test_malformed_and_bad_site():
    with pytest.raises(RecordError, match="malformed"):
        parse_record("{not json")
    with pytest.raises(RecordError):
        parse_record(doc(site="octahedral"))
    with pytest.raises(RecordError):
        parse_record(doc(defect_id="Fe:tet_interstitial:q+1"))


def test_unknown_fields_go_to_provenance():
    rec = parse_record(doc(provenance="run 7", magnetization=3.0))
    assert rec.provenance.startswith("run 7")
    assert '"magnetization": 3.0' in rec.provenance


def test_unnormalized_wavefunction_rejected():
    g = np.zeros((2, 3))
    g[1, 0] = 0.1
    with pytest.raises(RecordError, match="norm"):
        Wavefunctions(np.eye(3) * 10, [PlaneWaveState(g, [1.0, 0.1], 0.0)])


def test_curated_ti_record(table1):
    recs, _, _ = table1
    ti = next(r for r in recs if r.defect_id == "Ti:tet_interstitial:q+1")
    assert ti.zpl_override == pytest.approx(0.939)
    assert ti.transitions["refined"].tdm == pytest.approx(1.86)
    assert ti.transitions["corrected"].stand_in


@st.composite
def records(draw):
    n = draw(st.integers(1, 5))
    finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
    levels = {}
    for kind in draw(st.sampled_from([("base",), ("base", "corrected")])):
        levels[kind] = {
            spin: EnergyLevelSet(tuple(sorted(draw(st.lists(finite, min_size=n, max_size=n)))))
            for spin in ("up", "down")
        }
    occ = {s: tuple(draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))) for s in ("up", "down")}
    wf = None
    if draw(st.booleans()):
        m = draw(st.integers(1, 4))
        basis = np.array([[2 * np.pi * k / 10.0, 0, 0] for k in range(m)])
        states = []
        for b in range(n):
            re = np.array(draw(st.lists(st.floats(-1, 1), min_size=m, max_size=m)))
            im = np.array(draw(st.lists(st.floats(-1, 1), min_size=m, max_size=m)))
            c = re + 1j * im
            if np.linalg.norm(c) < 1e-3:
                c = np.eye(m)[0].astype(complex)
            states.append(PlaneWaveState(basis, c / np.linalg.norm(c), draw(finite), "both", b))
        wf = Wavefunctions(np.diag([10.0, 1, 1]), states)
    n_atoms = draw(st.integers(1, 3))
    has_geom = draw(st.booleans())
    fc = None
    if has_geom:
        a = np.array(draw(st.lists(finite, min_size=9 * n_atoms**2, max_size=9 * n_atoms**2))).reshape(3 * n_atoms, -1)
        fc = a + a.T
    return DefectRecord(
        element=draw(st.sampled_from(["Ti", "Fe", "Se", "Xm"])),
        site=draw(st.sampled_from(SITES)),
        charge=draw(st.integers(-4, 4)),
        total_energy=draw(finite),
        level_sets=levels,
        occupations=occ,
        supercell_atoms=draw(st.none() | st.integers(1, 1000)),
        wavefunctions=wf,
        zpl_override=draw(st.none() | finite),
        excited_total_energy=draw(st.none() | finite),
        displacement_vector=np.array(draw(st.lists(finite, min_size=3 * n_atoms, max_size=3 * n_atoms))) if has_geom else None,
        masses=np.array(draw(st.lists(st.floats(1, 300), min_size=n_atoms, max_size=n_atoms))) if has_geom else None,
        force_constants=fc,
        transitions={"refined": TransitionSummary(draw(finite), draw(st.floats(0, 20)), "donor_bx")}
        if draw(st.booleans())
        else {},
        bes_override=draw(st.none() | finite),
        provenance=draw(st.text(max_size=20)),
    )


@settings(max_examples=PROPERTY_CASES)
@given(records())
def test_parse_serialize_round_trip(rec):
    text = serialize_record(rec)
    back = parse_record(text)
    assert back == rec
    assert serialize_record(back) == text
