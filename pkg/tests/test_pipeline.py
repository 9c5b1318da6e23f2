import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from qdscreen.curated import EXPECTED_FINALISTS, load_element_config, table1_records
from qdscreen.electronic import radiative_lifetime
from qdscreen.pipeline import (
    TIERS,
    ElementSpec,
    PipelineError,
    ScreeningReport,
    TierConfig,
    emit_report,
    enumerate_candidates,
    run_screen,
)
from qdscreen.records import ChemPotSet, DefectRecord, EnergyLevelSet, HostSpec
from qdscreen.store import DefectStore
from conftest import PROPERTY_CASES

INF = math.inf


def test_charge_rule_examples():
    fe = ElementSpec("Fe", (2, 3))
    assert [q for *_, q in enumerate_candidates([fe], ["tet_interstitial"], "base")] == [0, 2, 3]
    se = ElementSpec("Se", (-2, 4, 6))
    assert [q for *_, q in enumerate_candidates([se], ["substitutional"], "base")] == [0, 2]
    assert [q for *_, q in enumerate_candidates([se], ["substitutional"])] == [-1, 0, 1, 2, 3]
    with pytest.raises(PipelineError):
        ElementSpec("Xx", ())
    with pytest.raises(PipelineError):
        ElementSpec("Xx", (9,))
    with pytest.raises(PipelineError):
        enumerate_candidates([], ["substitutional"])


def test_candidates_deterministic_and_clamped():
    elements = load_element_config()
    assert len(elements) == 56
    cands = enumerate_candidates(elements)
    assert cands == enumerate_candidates(elements)
    assert len(set(cands)) == len(cands)
    assert all(abs(q) <= 4 for *_, q in cands)


def test_config_validation():
    with pytest.raises(PipelineError):
        TierConfig(min_tdm=-1)
    with pytest.raises(PipelineError):
        TierConfig(degeneracy_window=0.3)
    with pytest.raises(PipelineError, match="unknown config"):
        TierConfig.from_mapping({"min_tmd": 2})
    assert TierConfig.from_mapping({"min_tdm": "inf"}).min_tdm == INF
    cfg = TierConfig(min_zpl=0.5, lifetime_convention="as_printed")
    assert TierConfig.from_mapping(cfg.to_dict()) == cfg


def test_empty_store(tmp_path):
    report = run_screen(DefectStore.create(tmp_path / "s"))
    assert set(report.tier_counts.values()) == {0}
    assert report.finalists == []


def test_golden_table1(table1):
    recs, host, chem = table1
    report = run_screen(recs, host, chempots=chem)
    assert tuple(o.defect_id for o in report.finalists) == EXPECTED_FINALISTS
    elim = report.eliminated
    assert elim["Zr:tet_interstitial:q+1"][0] == "exciton" and "zero-phonon" in elim["Zr:tet_interstitial:q+1"][1]
    for d in ("Na:substitutional:q0", "Nb:substitutional:q-1", "Ni:substitutional:q-1"):
        assert "bound exciton unstable" in elim[d][1]
    assert report.flagged == ["Fe:tet_interstitial:q0", "Zr:tet_interstitial:q+1"]


def test_shipped_data_matches_builder(table1):
    assert table1[0] == table1_records()


def test_insufficient_data_never_raises():
    bare = DefectRecord("Xx", "substitutional", 0, 1.0, {"base": {"up": EnergyLevelSet((0.1,))}})
    report = run_screen([bare], HostSpec(), chempots=ChemPotSet({}))
    assert report.eliminated[bare.defect_id] == ("stability", report.outcomes[bare.defect_id].reason)
    assert report.outcomes[bare.defect_id].reason.startswith("insufficient data")
    occ = DefectRecord("Xx", "substitutional", 0, 1.0, {"base": {"up": EnergyLevelSet((0.1, 0.2))}}, {"up": (1.0, 0.0)})
    report = run_screen([occ], HostSpec(), chempots=ChemPotSet({"Xx": 0.0, "Si": 0.0}))
    assert report.eliminated[occ.defect_id][0] == "optical"
    assert report.eliminated[occ.defect_id][1].startswith("insufficient data")


def test_duplicate_ids_rejected():
    r = table1_records()[0]
    with pytest.raises(PipelineError):
        run_screen([r, r])


def combined(table1, small_corpus):
    recs, host, chem = table1
    mrecs, _, mchem = small_corpus
    return recs + mrecs, host, ChemPotSet({**chem.potentials, **mchem.potentials})


def test_monotone_extremes(table1, small_corpus):
    recs, host, chem = combined(table1, small_corpus)
    closed = run_screen(recs, host, TierConfig(INF, INF, INF, INF), chempots=chem)
    assert closed.finalists == []
    open_ = run_screen(recs, host, TierConfig(0, 0, 0, 0, require_positive_bes=False), chempots=chem)
    survivors2 = open_.survivors(2)
    # every tier-2 survivor with optical data is a finalist; the rest lack data
    for d in survivors2:
        o = open_.outcomes[d]
        assert o.passed == 5 or o.reason.startswith("insufficient data")
    model_ids = {r.defect_id for r in small_corpus[0]}
    assert {o.defect_id for o in open_.finalists} >= set(survivors2) & model_ids


def test_every_record_reported_once(table1, small_corpus):
    recs, host, chem = combined(table1, small_corpus)
    report = run_screen(recs, host, chempots=chem)
    assert sorted(report.outcomes) == sorted(r.defect_id for r in recs)
    assert len(report.eliminated) + len(report.finalists) == len(recs)


def test_jobs_do_not_change_result(table1, small_corpus):
    recs, host, chem = combined(table1, small_corpus)
    one = emit_report(run_screen(recs, host, chempots=chem, jobs=1), "json")
    two = emit_report(run_screen(recs, host, chempots=chem, jobs=3), "json")
    assert one == two


@st.composite
def config_pairs(draw):
    def thresholds():
        return [draw(st.sampled_from([0.0, 0.5, 0.7, 0.8, 0.9, 1.0, 1.5, 2.0, 3.0, 5.0, INF])) for _ in range(4)]

    a = thresholds()
    b = [max(x, y) for x, y in zip(a, thresholds())]
    flags_a = [draw(st.booleans()), draw(st.booleans())]
    flags_b = [fa or draw(st.booleans()) for fa in flags_a]
    return TierConfig(*a, *flags_a), TierConfig(*b, *flags_b)


@pytest.fixture(scope="module")
def combined_set(table1, small_corpus):
    return combined(table1, small_corpus)


@settings(max_examples=PROPERTY_CASES)
@given(pair=config_pairs())
def test_tier_monotonicity_and_nesting(combined_set, pair):
    recs, host, chem = combined_set
    loose = run_screen(recs, host, pair[0], chempots=chem)
    tight = run_screen(recs, host, pair[1], chempots=chem)
    for k in range(len(TIERS) + 1):
        assert set(tight.survivors(k)) <= set(loose.survivors(k))
        if k:
            assert set(loose.survivors(k)) <= set(loose.survivors(k - 1))
    for report in (loose, tight):
        for d, (tier, reason) in report.eliminated.items():
            assert tier in TIERS and reason


@settings(max_examples=PROPERTY_CASES)
@given(pair=config_pairs(), fmt=st.sampled_from(["text", "json", "csv"]))
def test_report_determinism(combined_set, pair, fmt):
    recs, host, chem = combined_set
    a = emit_report(run_screen(recs, host, pair[0], chempots=chem), fmt)
    b = emit_report(run_screen(list(reversed(recs)), host, pair[0], chempots=chem), fmt)
    assert a == b


def test_report_documents(table1):
    recs, host, chem = table1
    report = run_screen(recs, host, chempots=chem)
    docs = emit_report(report, "csv")
    rows = docs["scatter.csv"].splitlines()
    assert rows[0] == "defect_id,delta_ks_eV,tdm_debye,nature,stability_window_width,lifetime_s"
    fe = next(r.split(",") for r in rows if r.startswith("Fe:tet_interstitial:q0"))
    assert (float(fe[1]), float(fe[2]), fe[3]) == (0.98, 1.59, "donor_bx")
    hist = docs["histogram.csv"].splitlines()
    assert hist[0] == "tdm_lo_debye,tdm_hi_debye,donor_bx,acceptor_bx,intra_defect,unknown"
    assert sum(sum(map(int, r.split(",")[2:])) for r in hist[1:]) == 7
    doc = json.loads(emit_report(report, "json")["report.json"])
    assert doc["finalists"] == list(EXPECTED_FINALISTS)
    again = ScreeningReport.from_dict(doc)
    assert emit_report(again, "json") == emit_report(report, "json")
    assert "Finalists (3)" in emit_report(report, "text")["summary.txt"]
    with pytest.raises(PipelineError):
        emit_report(report, "xml")


def test_single_defect_report(tuned_records):
    from qdscreen.modellab.corpus import model_chempots, model_host

    report = run_screen(tuned_records[:1], model_host(), chempots=model_chempots(["Xm"]),
                        config=TierConfig(require_nonsinglet=False))
    rows = emit_report(report, "csv")["scatter.csv"].splitlines()[1:]
    assert len(rows) == 1 and rows[0].split(",")[3] == "donor_bx"


@pytest.mark.parametrize("convention", ["einstein", "as_printed"])
def test_isolines_evaluate_to_their_lifetime(table1, convention):
    recs, host, chem = table1
    report = run_screen(recs, host, TierConfig(lifetime_convention=convention), chempots=chem)
    lines = emit_report(report, "csv")["isolines.csv"].splitlines()[1:]
    for line in lines:
        tau_us, e, mu = map(float, line.split(","))
        got = radiative_lifetime(e, mu, host.refractive_index, convention).seconds
        assert got == pytest.approx(tau_us * 1e-6, rel=1e-6)
    assert {float(x.split(",")[0]) for x in lines} == {0.01, 0.1, 1.0, 10.0}


def test_aufbau_spin_source(table1):
    recs, host, chem = table1
    assert TierConfig().spin_source == "occupations"
    report = run_screen(recs, host, TierConfig.from_mapping({"spin_source": "aufbau"}), chempots=chem)
    assert tuple(o.defect_id for o in report.finalists) == EXPECTED_FINALISTS
    with pytest.raises(PipelineError):
        TierConfig(spin_source="guess")
