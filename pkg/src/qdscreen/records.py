"""Defect-calculation records, host description and the on-disk document schema.

A record is one charged defect calculation. Documents are UTF-8 JSON with a
``"schema": 1`` field; :func:`serialize_record` and :func:`parse_record` are
exact inverses for every valid record (floats are written with ``repr``
precision, complex coefficients as separate real/imaginary lists).

Validation rejects rather than repairs: unsorted eigenvalues, occupations
outside [0, 1] or of the wrong length, and unnormalized wavefunctions are
errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

SCHEMA_VERSION = 1
SITES = ("substitutional", "tet_interstitial", "hex_interstitial")
SPINS = ("up", "down")
LEVEL_KINDS = ("base", "corrected")
TRANSITION_STAGES = ("corrected", "refined")
NATURES = ("donor_bx", "acceptor_bx", "intra_defect")

NORM_TOL = 1e-8


class RecordError(ValueError):
    """A record document failed validation.

    ``field`` names the offending field so callers can report it.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def format_charge(charge: int) -> str:
    return "q0" if charge == 0 else f"q{charge:+d}"


def make_defect_id(element: str, site: str, charge: int) -> str:
    """Canonical identifier, e.g. ``Fe:tet_interstitial:q0``."""
    return f"{element}:{site}:{format_charge(charge)}"


def parse_defect_id(defect_id: str) -> tuple[str, str, int]:
    try:
        element, site, q = defect_id.split(":")
        if not q.startswith("q"):
            raise ValueError
        return element, site, int(q[1:])
    except ValueError:
        raise RecordError(f"malformed defect id {defect_id!r}", "defect_id") from None


@dataclass(frozen=True)
class EnergyLevelSet:
    """Sorted single-particle eigenvalues (eV, referenced to the host VBM).

    ``band_indices[i]`` is the band that produced ``eigenvalues[i]``; it
    defaults to ``0..n-1``. Occupations are stored per band, so a level set
    that was re-sorted by a correction keeps its link to the occupations.
    """

    eigenvalues: tuple[float, ...]
    band_indices: tuple[int, ...] = ()
    kpoint: str = "gamma"

    def __post_init__(self):
        ev = tuple(float(e) for e in self.eigenvalues)
        object.__setattr__(self, "eigenvalues", ev)
        bands = tuple(int(b) for b in self.band_indices) or tuple(range(len(ev)))
        object.__setattr__(self, "band_indices", bands)
        if len(bands) != len(ev):
            raise RecordError("band_indices length differs from eigenvalues", "band_indices")
        if sorted(bands) != list(range(len(bands))):
            raise RecordError("band_indices must be a permutation of 0..n-1", "band_indices")
        if not all(math.isfinite(e) for e in ev):
            raise RecordError("non-finite eigenvalue", "eigenvalues")
        if any(b < a for a, b in zip(ev, ev[1:])):
            raise RecordError("eigenvalues are not sorted", "eigenvalues")

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def by_band(self) -> np.ndarray:
        """Eigenvalues indexed by band index rather than energy order."""
        out = np.empty(len(self))
        out[list(self.band_indices)] = self.eigenvalues
        return out


@dataclass(frozen=True, eq=False)
class PlaneWaveState:
    """One single-particle state expanded in plane waves.

    ``basis`` holds reciprocal vectors G in 1/Angstrom (2*pi included) with
    shape (n, 3); ``coefficients`` are the complex c(G).
    """

    basis: np.ndarray
    coefficients: np.ndarray
    eigenvalue: float
    spin: str = "both"
    band_index: int = 0

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim == 1:
            basis = np.column_stack([basis, np.zeros_like(basis), np.zeros_like(basis)])
        coeffs = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coefficients", coeffs)
        if basis.shape != (coeffs.size, 3):
            raise RecordError("basis and coefficients differ in length", "wavefunctions")
        if self.spin not in SPINS + ("both",):
            raise RecordError(f"unknown spin {self.spin!r}", "wavefunctions")

    @property
    def norm(self) -> float:
        return float(np.vdot(self.coefficients, self.coefficients).real)

    def __eq__(self, other):
        if not isinstance(other, PlaneWaveState):
            return NotImplemented
        return (
            self.eigenvalue == other.eigenvalue
            and self.spin == other.spin
            and self.band_index == other.band_index
            and np.array_equal(self.basis, other.basis)
            and np.array_equal(self.coefficients, other.coefficients)
        )


@dataclass(frozen=True, eq=False)
class Wavefunctions:
    """States of one record, sharing a plane-wave basis and a cell."""

    lattice: np.ndarray
    states: tuple[PlaneWaveState, ...]

    def __post_init__(self):
        object.__setattr__(self, "lattice", np.asarray(self.lattice, dtype=float).reshape(3, 3))
        object.__setattr__(self, "states", tuple(self.states))
        for st in self.states:
            if abs(st.norm - 1.0) > NORM_TOL:
                raise RecordError(
                    f"state band {st.band_index} spin {st.spin} has norm {st.norm:.12f}",
                    "wavefunctions",
                )

    def get(self, spin: str, band: int) -> PlaneWaveState:
        for st in self.states:
            if st.band_index == band and st.spin in (spin, "both"):
                return st
        raise KeyError((spin, band))

    def __eq__(self, other):
        if not isinstance(other, Wavefunctions):
            return NotImplemented
        return np.array_equal(self.lattice, other.lattice) and self.states == other.states


@dataclass(frozen=True)
class TransitionSummary:
    """Precomputed representative transition for data that ships without wavefunctions."""

    delta_ks: float
    tdm: float
    nature: str | None = None
    stand_in: bool = False
    note: str = ""

    def __post_init__(self):
        if self.nature is not None and self.nature not in NATURES:
            raise RecordError(f"unknown transition nature {self.nature!r}", "transitions")
        if not self.tdm >= 0:
            raise RecordError("tdm must be non-negative", "transitions")


@dataclass(frozen=True, eq=False)
class DefectRecord:
    element: str
    site: str
    charge: int
    total_energy: float
    level_sets: Mapping[str, Mapping[str, EnergyLevelSet]]
    occupations: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    supercell_atoms: int | None = None
    wavefunctions: Wavefunctions | None = None
    zpl_override: float | None = None
    excited_total_energy: float | None = None
    displacement_vector: np.ndarray | None = None
    masses: np.ndarray | None = None
    force_constants: np.ndarray | None = None
    correction_scheme: str = "none"
    correction_extra: float = 0.0
    transitions: Mapping[str, TransitionSummary] = field(default_factory=dict)
    bes_override: float | None = None
    hr_total: float | None = None
    reference: Mapping[str, Any] = field(default_factory=dict)
    provenance: str = ""

    def __post_init__(self):
        if self.site not in SITES:
            raise RecordError(f"site must be one of {SITES}, got {self.site!r}", "site")
        if not isinstance(self.charge, (int, np.integer)) or isinstance(self.charge, bool):
            raise RecordError("charge must be an integer", "charge")
        object.__setattr__(self, "charge", int(self.charge))
        if not math.isfinite(self.total_energy):
            raise RecordError("total_energy must be finite", "total_energy")
        if not self.level_sets:
            raise RecordError("at least one level set is required", "level_sets")
        for kind, per_spin in self.level_sets.items():
            if kind not in LEVEL_KINDS:
                raise RecordError(f"unknown level-set kind {kind!r}", "level_sets")
            for spin in per_spin:
                if spin not in SPINS:
                    raise RecordError(f"unknown spin channel {spin!r}", "level_sets")
        for spin, occ in self.occupations.items():
            if spin not in SPINS:
                raise RecordError(f"unknown spin channel {spin!r}", "occupations")
            if any(not (0.0 <= f <= 1.0) for f in occ):
                raise RecordError("occupation outside [0, 1]", "occupations")
            for kind, per_spin in self.level_sets.items():
                if spin in per_spin and len(per_spin[spin]) != len(occ):
                    raise RecordError(
                        f"shape mismatch: {len(occ)} occupations vs {len(per_spin[spin])} "
                        f"{kind} levels in spin {spin}",
                        "occupations",
                    )
        for stage in self.transitions:
            if stage not in TRANSITION_STAGES:
                raise RecordError(f"unknown transition stage {stage!r}", "transitions")
        if self.displacement_vector is not None:
            dr = np.asarray(self.displacement_vector, dtype=float).reshape(-1, 3)
            object.__setattr__(self, "displacement_vector", dr)
            if self.masses is None or len(self.masses) != len(dr):
                raise RecordError("displacement_vector needs one mass per atom", "masses")
        if self.masses is not None:
            object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float))
        if self.force_constants is not None:
            fc = np.asarray(self.force_constants, dtype=float)
            n = fc.shape[0]
            if fc.shape != (n, n) or not np.allclose(fc, fc.T, rtol=0, atol=1e-8):
                raise RecordError("force_constants must be a symmetric square matrix", "force_constants")
            object.__setattr__(self, "force_constants", fc)

    @property
    def defect_id(self) -> str:
        return make_defect_id(self.element, self.site, self.charge)

    @property
    def identity(self) -> tuple[str, str]:
        """Element and site; all charge states of one defect share it."""
        return self.element, self.site

    def levels(self, kind: str = "corrected") -> Mapping[str, EnergyLevelSet]:
        """Level sets of ``kind``, falling back to the base levels."""
        if kind in self.level_sets:
            return self.level_sets[kind]
        return self.level_sets["base"]

    def __eq__(self, other):
        if not isinstance(other, DefectRecord):
            return NotImplemented
        return record_to_dict(self) == record_to_dict(other)


@dataclass(frozen=True)
class HostSpec:
    """Host-material constants. Defaults describe silicon as used for screening."""

    band_gap: float = 1.114
    refractive_index: float = 3.8
    dielectric_constant: float = 11.7
    lattice_vectors: tuple = ((21.724, 0.0, 0.0), (0.0, 21.724, 0.0), (0.0, 0.0, 21.724))
    bulk_total_energy: float = 0.0
    vbm_reference: float = 0.0
    host_element: str = "Si"

    def __post_init__(self):
        lat = tuple(tuple(float(x) for x in row) for row in self.lattice_vectors)
        object.__setattr__(self, "lattice_vectors", lat)
        if not self.band_gap > 0:
            raise RecordError("band_gap must be positive", "band_gap")
        if not self.dielectric_constant >= 1:
            raise RecordError("dielectric_constant must be >= 1", "dielectric_constant")
        if abs(np.linalg.det(np.array(lat))) < 1e-12:
            raise RecordError("lattice matrix is singular", "lattice_vectors")

    @property
    def lattice(self) -> np.ndarray:
        return np.array(self.lattice_vectors)

    def to_dict(self) -> dict:
        return {
            "band_gap": self.band_gap,
            "refractive_index": self.refractive_index,
            "dielectric_constant": self.dielectric_constant,
            "lattice_vectors": [list(r) for r in self.lattice_vectors],
            "bulk_total_energy": self.bulk_total_energy,
            "vbm_reference": self.vbm_reference,
            "host_element": self.host_element,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> HostSpec:
        d = dict(d)
        if "lattice_vectors" in d:
            d["lattice_vectors"] = tuple(tuple(r) for r in d["lattice_vectors"])
        return cls(**d)


@dataclass(frozen=True)
class ChemPotSet:
    potentials: Mapping[str, float]
    label: str = ""

    def __getitem__(self, element: str) -> float:
        try:
            return self.potentials[element]
        except KeyError:
            raise KeyError(f"no chemical potential for {element}") from None

    def __contains__(self, element: str) -> bool:
        return element in self.potentials

    def to_dict(self) -> dict:
        return {"label": self.label, "potentials": dict(sorted(self.potentials.items()))}

    @classmethod
    def from_dict(cls, d: Mapping) -> ChemPotSet:
        return cls(dict(d["potentials"]), d.get("label", ""))


# ---------------------------------------------------------------- documents

_KNOWN_FIELDS = {
    "schema", "defect_id", "element", "site", "charge", "supercell_atoms",
    "total_energy", "level_sets", "occupations", "wavefunctions", "zpl_override",
    "excited_total_energy", "displacement_vector", "masses", "force_constants",
    "correction_scheme", "correction_extra", "transitions", "bes_override",
    "hr_total", "reference", "provenance",
}


def _opt(value, conv=float):
    return None if value is None else conv(value)


def record_to_dict(rec: DefectRecord) -> dict:
    d: dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "defect_id": rec.defect_id,
        "element": rec.element,
        "site": rec.site,
        "charge": rec.charge,
        "supercell_atoms": rec.supercell_atoms,
        "total_energy": rec.total_energy,
        "level_sets": {
            kind: {
                spin: {
                    "eigenvalues": list(ls.eigenvalues),
                    "band_indices": list(ls.band_indices),
                    "kpoint": ls.kpoint,
                }
                for spin, ls in sorted(per_spin.items())
            }
            for kind, per_spin in sorted(rec.level_sets.items())
        },
        "occupations": {s: list(map(float, o)) for s, o in sorted(rec.occupations.items())},
        "zpl_override": rec.zpl_override,
        "excited_total_energy": rec.excited_total_energy,
        "correction_scheme": rec.correction_scheme,
        "correction_extra": rec.correction_extra,
        "transitions": {
            stage: {
                "delta_ks": t.delta_ks,
                "tdm": t.tdm,
                "nature": t.nature,
                "stand_in": t.stand_in,
                "note": t.note,
            }
            for stage, t in sorted(rec.transitions.items())
        },
        "bes_override": rec.bes_override,
        "hr_total": rec.hr_total,
        "reference": dict(rec.reference),
        "provenance": rec.provenance,
        "displacement_vector": None if rec.displacement_vector is None else rec.displacement_vector.tolist(),
        "masses": None if rec.masses is None else rec.masses.tolist(),
        "force_constants": None if rec.force_constants is None else rec.force_constants.tolist(),
        "wavefunctions": None,
    }
    wf = rec.wavefunctions
    if wf is not None:
        basis = wf.states[0].basis if wf.states else np.zeros((0, 3))
        d["wavefunctions"] = {
            "lattice": wf.lattice.tolist(),
            "basis": basis.tolist(),
            "states": [
                {
                    "band_index": st.band_index,
                    "spin": st.spin,
                    "eigenvalue": st.eigenvalue,
                    "real": st.coefficients.real.tolist(),
                    "imag": st.coefficients.imag.tolist(),
                }
                for st in wf.states
            ],
        }
    return d


def serialize_record(rec: DefectRecord) -> str:
    return json.dumps(record_to_dict(rec), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _require(doc: Mapping, key: str):
    if key not in doc or doc[key] is None:
        raise RecordError("missing required field", key)
    return doc[key]


def record_from_dict(doc: Mapping) -> DefectRecord:
    if not isinstance(doc, Mapping):
        raise RecordError("document is not a mapping")
    if doc.get("schema") != SCHEMA_VERSION:
        raise RecordError(f"unsupported schema {doc.get('schema')!r}", "schema")
    for key in ("element", "site", "charge", "total_energy", "level_sets"):
        _require(doc, key)
    try:
        level_sets = {
            kind: {
                spin: EnergyLevelSet(
                    tuple(ls["eigenvalues"]), tuple(ls.get("band_indices", ())), ls.get("kpoint", "gamma")
                )
                for spin, ls in per_spin.items()
            }
            for kind, per_spin in doc["level_sets"].items()
        }
    except (KeyError, TypeError, AttributeError) as exc:
        raise RecordError(f"malformed level set ({exc})", "level_sets") from None

    wavefunctions = None
    if doc.get("wavefunctions") is not None:
        w = doc["wavefunctions"]
        try:
            basis = np.array(w["basis"], dtype=float).reshape(-1, 3)
            states = tuple(
                PlaneWaveState(
                    basis,
                    np.array(s["real"], dtype=float) + 1j * np.array(s["imag"], dtype=float),
                    float(s["eigenvalue"]),
                    s["spin"],
                    int(s["band_index"]),
                )
                for s in w["states"]
            )
            wavefunctions = Wavefunctions(np.array(w["lattice"], dtype=float), states)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, RecordError):
                raise
            raise RecordError(f"malformed wavefunctions ({exc})", "wavefunctions") from None

    try:
        transitions = {
            stage: TransitionSummary(
                float(t["delta_ks"]), float(t["tdm"]), t.get("nature"),
                bool(t.get("stand_in", False)), t.get("note", ""),
            )
            for stage, t in (doc.get("transitions") or {}).items()
        }
    except (KeyError, TypeError) as exc:
        raise RecordError(f"malformed transition ({exc})", "transitions") from None

    provenance = doc.get("provenance", "") or ""
    unknown = {k: v for k, v in doc.items() if k not in _KNOWN_FIELDS}
    if unknown:
        provenance += ("\n" if provenance else "") + "[unparsed] " + json.dumps(unknown, sort_keys=True)

    charge = doc["charge"]
    if not isinstance(charge, int) or isinstance(charge, bool):
        raise RecordError("charge must be an integer", "charge")
    rec = DefectRecord(
        element=str(doc["element"]),
        site=str(doc["site"]),
        charge=charge,
        total_energy=float(doc["total_energy"]),
        level_sets=level_sets,
        occupations={s: tuple(float(f) for f in o) for s, o in (doc.get("occupations") or {}).items()},
        supercell_atoms=_opt(doc.get("supercell_atoms"), int),
        wavefunctions=wavefunctions,
        zpl_override=_opt(doc.get("zpl_override")),
        excited_total_energy=_opt(doc.get("excited_total_energy")),
        displacement_vector=_opt(doc.get("displacement_vector"), np.array),
        masses=_opt(doc.get("masses"), np.array),
        force_constants=_opt(doc.get("force_constants"), np.array),
        correction_scheme=doc.get("correction_scheme", "none"),
        correction_extra=float(doc.get("correction_extra", 0.0)),
        transitions=transitions,
        bes_override=_opt(doc.get("bes_override")),
        hr_total=_opt(doc.get("hr_total")),
        reference=dict(doc.get("reference") or {}),
        provenance=provenance,
    )
    if "defect_id" in doc and doc["defect_id"] != rec.defect_id:
        raise RecordError(f"defect_id {doc['defect_id']!r} does not match {rec.defect_id!r}", "defect_id")
    return rec


def parse_record(document: str | bytes) -> DefectRecord:
    """Parse and validate one record document."""
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RecordError(f"malformed document: {exc}") from None
    return record_from_dict(doc)

