"""Tiered screening engine.

Records are grouped by defect identity (element + site) so that every charge
state of a defect contributes a formation line. Each record is then pushed
through five fixed tiers; the first failing tier eliminates it with one
reason. Missing inputs eliminate with "insufficient data" rather than raise.

Tiers:
    1. stability   the record's charge owns a non-empty Fermi-level window
    2. spin        non-singlet ground state (optional)
    3. optical     representative transition on corrected levels passes the
                   energy and dipole thresholds
    4. refined     refined transition energy passes its threshold (records
                   without refined data pass through)
    5. exciton     zero-phonon line and bound-exciton stability
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .electronic import (
    CONVENTIONS,
    ElectronicError,
    assess_exciton,
    aufbau_spin,
    enumerate_transitions,
    radiative_lifetime,
    representative_transition,
    total_spin,
    zero_phonon_line,
)
from .phonons import PhononError, partial_hr_factors, phonon_modes
from .records import SITES, ChemPotSet, DefectRecord, HostSpec
from .thermo import StabilityWindow, ThermoError, formation_line, stability_windows

_logger = logging.getLogger(__name__)

SPIN_SOURCES = ("occupations", "aufbau")
TIERS = ("stability", "spin", "optical", "refined", "exciton")
CHARGE_LIMIT = 4
ISOLINE_LIFETIMES_US = (0.01, 0.1, 1.0, 10.0)


class PipelineError(ValueError):
    pass


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class TierConfig:
    min_transition_energy: float = 0.700  # eV
    min_tdm: float = 2.0  # Debye
    refine_min_delta_ks: float = 0.800  # eV
    min_zpl: float = 0.700  # eV
    require_positive_bes: bool = True
    require_nonsinglet: bool = True
    degeneracy_window: float = 0.100  # eV
    lifetime_convention: str = "einstein"
    bes_flag_tolerance: float = 5.0  # meV, tabulated vs formula BES
    spin_source: str = "occupations"  # or "aufbau": refill corrected levels

    def __post_init__(self):
        for name in ("min_transition_energy", "min_tdm", "refine_min_delta_ks", "min_zpl", "bes_flag_tolerance"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise PipelineError(f"{name} must be >= 0, got {value}")
        if not 0 <= self.degeneracy_window <= 0.2:
            raise PipelineError("degeneracy_window must lie in [0, 0.2] eV")
        if self.lifetime_convention not in CONVENTIONS:
            raise PipelineError(f"lifetime_convention must be one of {CONVENTIONS}")
        if self.spin_source not in SPIN_SOURCES:
            raise PipelineError(f"spin_source must be one of {SPIN_SOURCES}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> TierConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise PipelineError(f"unknown config field(s): {', '.join(unknown)}")
        values = {}
        for f in fields(cls):
            if f.name not in data:
                continue
            v = data[f.name]
            if f.type == "bool":
                if not isinstance(v, bool):
                    raise PipelineError(f"{f.name} must be true or false")
            elif f.type == "float":
                if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                    raise PipelineError(f"{f.name} must be a number")
                try:
                    v = float(v)  # accepts "inf"
                except ValueError:
                    raise PipelineError(f"{f.name} must be a number") from None
            values[f.name] = v
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ElementSpec:
    symbol: str
    common_oxidation_states: tuple[int, ...]
    implantable: bool = True

    def __post_init__(self):
        states = tuple(int(o) for o in self.common_oxidation_states)
        if not states:
            raise PipelineError(f"{self.symbol}: oxidation states must be non-empty")
        if any(not -4 <= o <= 7 for o in states):
            raise PipelineError(f"{self.symbol}: oxidation states must lie in [-4, 7]")
        object.__setattr__(self, "common_oxidation_states", states)


def enumerate_candidates(
    elements: Sequence[ElementSpec],
    sites: Sequence[str] = SITES,
    charge_rule: str = "neighbors",
) -> list[tuple[str, str, int]]:
    """(element, site, charge) triples to compute.

    Substitutional charges are o - 4 for each oxidation state o (the
    replaced host atom is fourfold); interstitial charges are o together
    with 0. Charge rule "neighbors" also adds q +- 1 around every base
    charge; "base" does not. Charges outside [-4, 4] are dropped.
    """
    if not elements:
        raise PipelineError("element list is empty")
    if charge_rule not in ("base", "neighbors"):
        raise PipelineError(f"unknown charge rule {charge_rule!r}")
    out = []
    for el in elements:
        for site in sites:
            if site not in SITES:
                raise PipelineError(f"unknown site {site!r}")
            if site == "substitutional":
                base = {o - 4 for o in el.common_oxidation_states}
            else:
                base = set(el.common_oxidation_states) | {0}
            base = {q for q in base if abs(q) <= CHARGE_LIMIT}
            charges = set(base)
            if charge_rule == "neighbors":
                charges |= {q + d for q in base for d in (-1, 1)}
            for q in sorted(c for c in charges if abs(c) <= CHARGE_LIMIT):
                out.append((el.symbol, site, q))
    return out


# ---------------------------------------------------------------- outcomes


@dataclass
class DefectOutcome:
    """Everything learned about one record, whether or not it survived."""

    defect_id: str
    passed: int = 0  # number of tiers passed
    reason: str | None = None
    window: tuple[float, float] | None = None
    total_spin: float | None = None
    delta_ks: float | None = None
    tdm: float | None = None
    nature: str | None = None
    transition_stage: str | None = None
    stand_in: bool = False
    zpl: float | None = None
    ctl: float | None = None
    ctl_label: str | None = None
    bes: float | None = None
    bes_formula: float | None = None
    bes_inconsistent: bool = False
    lifetime_s: float | None = None
    hr_total: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def eliminated_at(self) -> str | None:
        return None if self.passed == len(TIERS) else TIERS[self.passed]

    @property
    def window_width(self) -> float | None:
        return None if self.window is None else self.window[1] - self.window[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = None if self.window is None else list(self.window)
        d["eliminated_at"] = self.eliminated_at
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> DefectOutcome:
        d = {k: v for k, v in d.items() if k != "eliminated_at"}
        if d.get("window") is not None:
            d["window"] = tuple(d["window"])
        return cls(**d)


def _insufficient(out: DefectOutcome, what: str) -> DefectOutcome:
    out.reason = f"insufficient data: {what}"
    return out


def _hr_total(rec: DefectRecord) -> float | None:
    if rec.hr_total is not None:
        return rec.hr_total
    if rec.displacement_vector is None or rec.force_constants is None:
        return None
    try:
        ph = phonon_modes(rec.force_constants, rec.masses)
        return partial_hr_factors(ph, rec.displacement_vector).total
    except PhononError as exc:
        _logger.warning("%s: Huang-Rhys factor unavailable (%s)", rec.defect_id, exc)
        return None


def evaluate_record(
    rec: DefectRecord,
    windows: Sequence[StabilityWindow] | None,
    host: HostSpec,
    config: TierConfig,
    window_error: str | None = None,
) -> DefectOutcome:
    """Run one record through every tier; stops at the first failure."""
    out = DefectOutcome(rec.defect_id)

    # tier 1: stability window
    if windows is None:
        return _insufficient(out, window_error or "no formation lines")
    own = next((w for w in windows if w.charge == rec.charge), None)
    if own is None:
        out.reason = "no stability window inside the gap"
        return out
    out.window = (own.fermi_lo, own.fermi_hi)
    out.passed = 1

    # tier 2: spin
    if rec.occupations:
        out.total_spin = total_spin(rec.occupations)
        if config.spin_source == "aufbau":
            n = int(round(sum(sum(v) for v in rec.occupations.values())))
            try:
                out.total_spin = aufbau_spin(rec.levels("corrected"), n)
            except ElectronicError as exc:
                return _insufficient(out, str(exc))
    if config.require_nonsinglet:
        if out.total_spin is None:
            return _insufficient(out, "no occupations")
        if out.total_spin == 0:
            out.reason = "singlet ground state"
            return out
    out.passed = 2

    # tier 3: optical transition on corrected levels
    if rec.wavefunctions is not None and rec.occupations and "corrected" in rec.level_sets:
        try:
            cands = enumerate_transitions(
                rec.levels("corrected"), rec.occupations, rec.wavefunctions, config.degeneracy_window
            )
            rep = representative_transition(cands)
        except ElectronicError as exc:
            return _insufficient(out, str(exc))
        out.delta_ks, out.tdm, out.nature = rep.delta_ks, rep.tdm, rep.nature
    elif "corrected" in rec.transitions:
        t = rec.transitions["corrected"]
        out.delta_ks, out.tdm, out.nature, out.stand_in = t.delta_ks, t.tdm, t.nature, t.stand_in
    else:
        return _insufficient(out, "no wavefunctions or corrected transition")
    out.transition_stage = "corrected"
    if out.delta_ks < config.min_transition_energy:
        out.reason = f"transition energy {out.delta_ks:.3f} eV below {config.min_transition_energy:.3f} eV"
        return out
    if out.tdm < config.min_tdm:
        out.reason = f"transition dipole {out.tdm:.3f} D below {config.min_tdm:.3f} D"
        return out
    out.passed = 3

    # tier 4: refined data where present
    if "refined" in rec.transitions:
        t = rec.transitions["refined"]
        out.delta_ks, out.tdm, out.stand_in = t.delta_ks, t.tdm, t.stand_in
        out.nature = t.nature if t.nature is not None else out.nature
        out.transition_stage = "refined"
        if out.delta_ks < config.refine_min_delta_ks:
            out.reason = f"refined transition energy {out.delta_ks:.3f} eV below {config.refine_min_delta_ks:.3f} eV"
            return out
    out.passed = 4
    out.lifetime_s = radiative_lifetime(out.delta_ks, out.tdm, host.refractive_index, config.lifetime_convention).seconds
    out.hr_total = _hr_total(rec)

    # tier 5: zero-phonon line and bound-exciton stability
    try:
        if rec.zpl_override is not None:
            out.zpl = rec.zpl_override
        elif rec.excited_total_energy is not None:
            out.zpl = zero_phonon_line(rec.total_energy, rec.excited_total_energy)
    except ElectronicError as exc:
        return _insufficient(out, str(exc))
    if out.nature in ("donor_bx", "acceptor_bx") and out.zpl is not None:
        try:
            ex = assess_exciton(out.zpl, windows, rec.charge, out.nature, host)
        except ElectronicError as exc:
            out.notes.append(str(exc))
        else:
            out.ctl, out.ctl_label, out.bes_formula = ex.ctl_used.level, ex.ctl_used.label, ex.bes
            out.notes.extend(ex.notes)
    out.bes = rec.bes_override if rec.bes_override is not None else out.bes_formula
    if rec.bes_override is not None and out.bes_formula is not None:
        if abs(rec.bes_override - out.bes_formula) > config.bes_flag_tolerance:
            out.bes_inconsistent = True
            out.notes.append(
                f"tabulated BES {rec.bes_override:.0f} meV disagrees with formula value {out.bes_formula:.0f} meV"
            )
    if out.zpl is None:
        return _insufficient(out, "no zero-phonon line")
    if out.zpl < config.min_zpl:
        out.reason = f"zero-phonon line {out.zpl:.3f} eV below {config.min_zpl:.3f} eV"
        return out
    if config.require_positive_bes:
        if out.bes is None:
            return _insufficient(out, f"bound-exciton stability undefined (nature {out.nature})")
        if out.bes <= 0:
            out.reason = f"bound exciton unstable (BES {out.bes:.0f} meV)"
            return out
    out.passed = 5
    return out


# ------------------------------------------------------------------ report


@dataclass
class ScreeningReport:
    outcomes: dict[str, DefectOutcome]
    config: TierConfig
    host: HostSpec

    @property
    def defect_ids(self) -> list[str]:
        return sorted(self.outcomes)

    def survivors(self, tier: int) -> list[str]:
        """Ids that passed tiers 1..tier (tier 0 = every input)."""
        return [d for d in self.defect_ids if self.outcomes[d].passed >= tier]

    @property
    def tier_counts(self) -> dict[str, int]:
        counts = {"input": len(self.outcomes)}
        for k, name in enumerate(TIERS, start=1):
            counts[name] = len(self.survivors(k))
        return counts

    @property
    def eliminated(self) -> dict[str, tuple[str, str]]:
        return {
            d: (o.eliminated_at, o.reason)
            for d in self.defect_ids
            if (o := self.outcomes[d]).eliminated_at is not None
        }

    @property
    def finalists(self) -> list[DefectOutcome]:
        final = [self.outcomes[d] for d in self.survivors(len(TIERS))]
        return sorted(final, key=lambda o: (-o.tdm, -o.zpl, o.defect_id))

    @property
    def flagged(self) -> list[str]:
        return [d for d in self.defect_ids if self.outcomes[d].bes_inconsistent]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "host": self.host.to_dict(),
            "tier_counts": self.tier_counts,
            "finalists": [o.defect_id for o in self.finalists],
            "bes_inconsistent": self.flagged,
            "outcomes": {d: self.outcomes[d].to_dict() for d in self.defect_ids},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ScreeningReport:
        return cls(
            {k: DefectOutcome.from_dict(v) for k, v in d["outcomes"].items()},
            TierConfig.from_mapping(d["config"]),
            HostSpec.from_dict(d["host"]),
        )


def _evaluate_group(args) -> list[DefectOutcome]:
    records, host, chempots, config = args
    windows, err = None, None
    try:
        lines = [formation_line(r, host, chempots) for r in records]
        windows = stability_windows(lines, host)
    except (ThermoError, KeyError) as exc:
        err = f"formation energies unavailable ({exc})"
    return [evaluate_record(r, windows, host, config, err) for r in records]


def run_screen(
    records: Iterable[DefectRecord] | Any,
    host: HostSpec | None = None,
    config: TierConfig | None = None,
    *,
    chempots: ChemPotSet | None = None,
    jobs: int = 1,
) -> ScreeningReport:
    """Screen a store (anything with ``query()``) or an iterable of records.

    Host and chemical potentials default to the store's. The result does
    not depend on ``jobs``.
    """
    if hasattr(records, "query"):
        host = host or records.host
        chempots = chempots or records.chempots
        records = records.query()
    host = host or HostSpec()
    config = config or TierConfig()
    chempots = chempots or ChemPotSet({})
    records = list(records)
    ids = [r.defect_id for r in records]
    if len(set(ids)) != len(ids):
        raise PipelineError("duplicate defect ids in input")

    groups: dict[tuple[str, str], list[DefectRecord]] = {}
    for r in sorted(records, key=lambda r: r.defect_id):
        groups.setdefault(r.identity, []).append(r)
    tasks = [(groups[k], host, chempots, config) for k in sorted(groups)]
    jobs = max(1, int(jobs))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_evaluate_group, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_evaluate_group(t) for t in tasks]
    outcomes = {o.defect_id: o for group in results for o in group}
    return ScreeningReport(dict(sorted(outcomes.items())), config, host)


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# ----------------------------------------------------------------- emitters


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def scatter_rows(report: ScreeningReport) -> list[tuple]:
    """One row per record that produced a representative transition."""
    rows = []
    for d in report.defect_ids:
        o = report.outcomes[d]
        if o.delta_ks is None or o.tdm is None:
            continue
        lifetime = o.lifetime_s
        if lifetime is None and o.delta_ks > 0:
            lifetime = radiative_lifetime(
                o.delta_ks, o.tdm, report.host.refractive_index, report.config.lifetime_convention
            ).seconds
        rows.append((d, o.delta_ks, o.tdm, o.nature or "unknown", o.window_width, lifetime))
    return rows


def histogram_rows(report: ScreeningReport, bin_width: float = 0.5) -> tuple[list[str], list[tuple]]:
    natures = ["donor_bx", "acceptor_bx", "intra_defect", "unknown"]
    rows = scatter_rows(report)
    top = max((r[2] for r in rows), default=0.0)
    n_bins = max(1, int(math.floor(top / bin_width)) + 1)
    counts = np.zeros((n_bins, len(natures)), dtype=int)
    for r in rows:
        counts[min(int(r[2] // bin_width), n_bins - 1), natures.index(r[3])] += 1
    header = ["tdm_lo_debye", "tdm_hi_debye"] + natures
    body = [(k * bin_width, (k + 1) * bin_width, *map(int, counts[k])) for k in range(n_bins)]
    return header, body


def isoline_rows(
    refractive_index: float, convention: str, energies: Sequence[float] | None = None
) -> list[tuple]:
    from .electronic import isoline_tdm

    energies = np.linspace(0.5, 1.5, 101) if energies is None else np.asarray(energies, dtype=float)
    rows = []
    for tau in ISOLINE_LIFETIMES_US:
        mu = isoline_tdm(energies, tau * 1e-6, refractive_index, convention)
        rows += [(tau, float(e), float(m)) for e, m in zip(energies, mu)]
    return rows


def _num(x, spec: str) -> str:
    return "-" if x is None else format(x, spec)


def summary_text(report: ScreeningReport) -> str:
    c = report.config
    lines = ["Screening summary", "", "Tier counts:"]
    for name, n in report.tier_counts.items():
        lines.append(f"  {name:<10} {n}")
    lines += ["", f"Finalists ({len(report.finalists)}), ranked by TDM ({c.lifetime_convention} lifetimes):"]
    for o in report.finalists:
        parts = [
            f"dKS={o.delta_ks:.3f} eV",
            f"ZPL={_num(o.zpl, '.3f')} eV",
            f"TDM={o.tdm:.2f} D",
            f"tau={_num(None if o.lifetime_s is None else o.lifetime_s * 1e6, '.3f')} us",
            f"spin={_num(o.total_spin, 'g')}",
            f"BES={_num(o.bes, '.0f')} meV",
            f"CTL={'-' if o.ctl is None else f'{o.ctl:.3f} {o.ctl_label}'}",
            o.nature or "unknown",
        ]
        if o.hr_total is not None:
            parts.append(f"S={o.hr_total:.2f}")
        lines.append(f"  {o.defect_id:<28} " + "  ".join(parts))
    elim = report.eliminated
    if elim:
        lines += ["", "Eliminated:"]
        for d, (tier, reason) in elim.items():
            lines.append(f"  {d:<28} [{tier}] {reason}")
    if report.flagged:
        lines += ["", "BES inconsistencies (tabulated vs formula):"]
        for d in report.flagged:
            o = report.outcomes[d]
            lines.append(f"  {d:<28} tabulated {o.bes:.0f} meV, formula {o.bes_formula:.0f} meV")
    return "\n".join(lines) + "\n"


REPORT_FORMATS = ("text", "json", "csv")


def emit_report(report: ScreeningReport, fmt: str = "text") -> dict[str, str]:
    """Render a report as named documents (file name -> content)."""
    if fmt == "text":
        return {"summary.txt": summary_text(report)}
    if fmt == "json":
        return {"report.json": json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"}
    if fmt == "csv":
        hist_header, hist = histogram_rows(report)
        return {
            "scatter.csv": _csv(
                ["defect_id", "delta_ks_eV", "tdm_debye", "nature", "stability_window_width", "lifetime_s"],
                scatter_rows(report),
            ),
            "histogram.csv": _csv(hist_header, hist),
            "isolines.csv": _csv(
                ["lifetime_us", "energy_eV", "tdm_debye"],
                isoline_rows(report.host.refractive_index, report.config.lifetime_convention),
            ),
        }
    raise PipelineError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def finalists_text(report: ScreeningReport) -> str:
    return "".join(o.defect_id + "\n" for o in report.finalists)
