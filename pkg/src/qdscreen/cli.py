"""Command-line entry point: ``qdscreen <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 screening run
with zero finalists, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .electronic import CONVENTIONS, ElectronicError
from .modellab.ballspring import cubic_cluster
from .modellab.configcoord import ConfigCoordSpec
from .modellab.corpus import RecordLabel, build_record, ionized, model_chempots, model_host, random_specs
from .modellab.wells import ModelError, WellModelSpec
from .phonons import PhononError, partial_hr_factors, phonon_modes, pl_lineshape
from .pipeline import (
    REPORT_FORMATS,
    PipelineError,
    ScreeningReport,
    TierConfig,
    default_jobs,
    emit_report,
    finalists_text,
    run_screen,
)
from .records import SITES, ChemPotSet, HostSpec, RecordError, format_charge, parse_record
from .store import DefectStore, StoreError, load_records
from .thermo import ThermoError, formation_diagram, formation_line, stability_windows, window_transition_levels

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NO_FINALISTS, EXIT_IO = 0, 1, 2, 3, 4

_logger = logging.getLogger("qdscreen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers


def _read_mapping(path) -> dict:
    """JSON or TOML file (chosen by extension) as a dict."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise PipelineError(f"{path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise PipelineError(f"{path}: {exc}") from None


def _load_host(path) -> HostSpec:
    return HostSpec.from_dict(_read_mapping(path))


def _open_store(path) -> DefectStore:
    if path is None:
        raise UsageError("--store is required")
    if not (Path(path) / "index").exists():
        raise FileNotFoundError(f"no defect store at {path}")
    return DefectStore.open(path)


def _write_documents(out_dir: Path, docs: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in docs.items():
        (out_dir / name).write_text(text, encoding="utf-8")


def _tier_config(args) -> TierConfig:
    data = _read_mapping(args.config) if args.config else {}
    if "screen" in data and isinstance(data["screen"], dict):
        data = data["screen"]
    if args.convention:
        data = {**data, "lifetime_convention": args.convention}
    return TierConfig.from_mapping(data)


# ------------------------------------------------------------- subcommands


def cmd_ingest(args) -> int:
    if not args.records:
        raise UsageError("no record files given")
    records = load_records(args.records)  # validate everything before writing
    store_path = Path(args.store)
    if (store_path / "index").exists():
        store = DefectStore.open(store_path)
    else:
        store = DefectStore.create(store_path)
    if args.host:
        store.set_host(_load_host(args.host))
    if args.chempots:
        store.set_chempots(ChemPotSet.from_dict(_read_mapping(args.chempots)))
    ids = store.put_many(records)
    print(f"ingested {len(ids)} record(s) into {store_path}")
    return EXIT_OK


def cmd_screen(args) -> int:
    store = _open_store(args.store)
    host = _load_host(args.host) if args.host else store.host
    config = _tier_config(args)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    report = run_screen(store, host, config, jobs=jobs)
    out = Path(args.out)
    formats = REPORT_FORMATS if args.format == "all" else (args.format,)
    docs = {}
    for fmt in formats:
        docs.update(emit_report(report, fmt))
    docs.setdefault("report.json", emit_report(report, "json")["report.json"])
    docs["finalists.txt"] = finalists_text(report)
    _write_documents(out, docs)
    sys.stdout.write(emit_report(report, "text")["summary.txt"])
    return EXIT_OK if report.finalists else EXIT_NO_FINALISTS


def cmd_report(args) -> int:
    report = ScreeningReport.from_dict(_read_mapping(args.input))
    if args.convention and args.convention != report.config.lifetime_convention:
        cfg = TierConfig.from_mapping({**report.config.to_dict(), "lifetime_convention": args.convention})
        report = ScreeningReport(report.outcomes, cfg, report.host)
    docs = emit_report(report, args.format)
    if args.out:
        _write_documents(Path(args.out), docs)
    else:
        for text in docs.values():
            sys.stdout.write(text)
    return EXIT_OK


def cmd_thermo(args) -> int:
    store = _open_store(args.store)
    host = _load_host(args.host) if args.host else store.host
    records = store.query(element=args.element, site=args.site)
    if not records:
        raise PipelineError(f"no records for {args.element} at {args.site}")
    lines = [formation_line(r, host, store.chempots) for r in records]
    fermi, curves = formation_diagram(lines, host, args.samples)
    charges = list(curves)
    header = ["fermi_eV"] + [f"eform_{format_charge(q)}_eV" for q in charges]
    rows = [",".join([repr(float(f))] + [repr(float(curves[q][k])) for q in charges]) for k, f in enumerate(fermi)]
    text = ",".join(header) + "\n" + "\n".join(rows) + "\n"
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    windows = stability_windows(lines, host)
    for w in windows:
        print(f"q={format_charge(w.charge)[1:]}  stable for E_F in [{w.fermi_lo:.4f}, {w.fermi_hi:.4f}] eV")
    for ctl in window_transition_levels(windows):
        print(f"CTL {ctl.label} = {ctl.level:.4f} eV")
    return EXIT_OK


def cmd_lineshape(args) -> int:
    if args.record:
        rec = parse_record(Path(args.record).read_text(encoding="utf-8"))
    elif args.store and args.id:
        rec = _open_store(args.store).get(args.id)
    else:
        raise UsageError("give --record FILE or --store DIR --id DEFECT_ID")
    if rec.displacement_vector is None or rec.force_constants is None:
        raise RecordError("record has no displacement vector or force constants", "displacement_vector")
    zpl = args.zpl
    if zpl is None:
        if rec.zpl_override is not None:
            zpl = rec.zpl_override
        elif rec.excited_total_energy is not None:
            zpl = rec.excited_total_energy - rec.total_energy
        else:
            raise RecordError("no zero-phonon line; pass --zpl", "zpl_override")
    phonons = phonon_modes(rec.force_constants, rec.masses)
    hr = partial_hr_factors(phonons, rec.displacement_vector)
    res = pl_lineshape(hr, phonons, zpl, args.broadening)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = "".join(
        f"{e!r},{i!r},{s!r}\n" for e, i, s in zip(res.energy.tolist(), res.intensity.tolist(), res.sideband.tolist())
    )
    out.write_text("energy_eV,intensity,sideband\n" + rows, encoding="utf-8")
    summary = {
        "defect_id": rec.defect_id,
        "zpl_eV": res.zpl_position,
        "huang_rhys": res.huang_rhys,
        "zpl_weight": res.zpl_weight,
        "broadening_meV": res.broadening,
        "partial_factors": hr.partial_factors.tolist(),
        "mode_energies_meV": phonons.frequencies.tolist(),
    }
    sidecar = out.with_suffix(".summary.json")
    sidecar.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{rec.defect_id}: S = {res.huang_rhys:.4f}, ZPL weight = {res.zpl_weight:.4f}")
    return EXIT_OK


def _model_entry(entry: dict) -> tuple[ConfigCoordSpec | WellModelSpec, RecordLabel, bool]:
    entry = dict(entry)
    label = RecordLabel(entry.pop("element"), entry.pop("site", "tet_interstitial"), int(entry.pop("charge", 0)))
    companion = bool(entry.pop("companion", False))
    well = WellModelSpec(**entry.pop("well", {}))
    if "spring_k" in entry or "coupling" in entry:
        spec = ConfigCoordSpec(well, float(entry.pop("spring_k", 10.0)), float(entry.pop("coupling", 1.0)))
    else:
        spec = well
    if entry:
        raise ModelError(f"unknown model field(s): {', '.join(sorted(entry))}")
    return spec, label, companion


def cmd_model_gen(args) -> int:
    """Spec file: {"defects": [...], "random": {"count": n, "seed": s}, "phonons": bool, "band_gap": eV}."""
    spec_doc = _read_mapping(args.spec)
    unknown = set(spec_doc) - {"defects", "random", "phonons", "band_gap"}
    if unknown:
        raise ModelError(f"unknown spec field(s): {', '.join(sorted(unknown))}")
    pairs = []
    for entry in spec_doc.get("defects", []):
        spec, label, companion = _model_entry(entry)
        pairs.append((spec, label))
        if companion:
            pairs.append((ionized(spec), RecordLabel(label.element, label.site, label.charge + 1)))
    if "random" in spec_doc:
        r = spec_doc["random"]
        seed = args.seed if args.seed is not None else int(r.get("seed", 0))
        specs, labels = random_specs(int(r["count"]), seed)
        pairs += list(zip(specs, labels))
    if not pairs:
        raise ModelError("spec file defines no defects")
    phonon_model = cubic_cluster() if spec_doc.get("phonons", False) else None
    cell = {s.well.cell_length if isinstance(s, ConfigCoordSpec) else s.cell_length for s, _ in pairs}
    host = model_host(float(spec_doc.get("band_gap", 1.114)), cell.pop() if len(cell) == 1 else 60.0)
    records = [build_record(s, lab, host, phonon_model=phonon_model) for s, lab in pairs]
    ids = [r.defect_id for r in records]
    if len(set(ids)) != len(ids):
        raise ModelError("spec file produces duplicate defect ids")
    from .curated import write_dataset

    write_dataset(args.out, records, host, model_chempots(sorted({r.element for r in records}), host))
    print(f"wrote {len(records)} record(s) to {Path(args.out) / 'records'}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qdscreen", description="Screen point defects in silicon for spin-photon interfaces.")
    p.add_argument("--version", action="version", version=f"qdscreen {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="validate record files and add them to a store")
    s.add_argument("records", nargs="*", help="record files (JSON)")
    s.add_argument("--store", required=True, help="store directory (created if missing)")
    s.add_argument("--host", help="host JSON/TOML to attach to the store")
    s.add_argument("--chempots", help="chemical potentials JSON/TOML to attach to the store")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("screen", help="run the tiered screen on a store")
    s.add_argument("--store", required=True)
    s.add_argument("--config", help="TierConfig as JSON or TOML")
    s.add_argument("--host", help="override the store's host JSON/TOML")
    s.add_argument("--format", choices=REPORT_FORMATS + ("all",), default="all")
    s.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    s.add_argument("--convention", choices=CONVENTIONS, help="lifetime convention")
    s.add_argument("--out", default="screen-report", help="output directory")
    s.set_defaults(func=cmd_screen)

    s = sub.add_parser("report", help="re-emit a saved report.json in another format")
    s.add_argument("--input", required=True, help="report.json written by 'screen'")
    s.add_argument("--format", choices=REPORT_FORMATS, default="text")
    s.add_argument("--convention", choices=CONVENTIONS)
    s.add_argument("--out", help="output directory (default: stdout)")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("thermo", help="formation-energy diagrams")
    tsub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    t = tsub.add_parser("diagram", help="formation energy vs Fermi level for one defect, as CSV")
    t.add_argument("--store", required=True)
    t.add_argument("--element", required=True)
    t.add_argument("--site", required=True, choices=SITES)
    t.add_argument("--host")
    t.add_argument("--samples", type=int, default=200)
    t.add_argument("--out", required=True, help="CSV path")
    t.set_defaults(func=cmd_thermo)

    s = sub.add_parser("lineshape", help="photoluminescence spectrum with phonon sideband")
    s.add_argument("--record", help="record file")
    s.add_argument("--store")
    s.add_argument("--id", help="defect id inside --store")
    s.add_argument("--zpl", type=float, help="zero-phonon line in eV (default: from the record)")
    s.add_argument("--broadening", type=float, default=2.0, help="Gaussian broadening, meV")
    s.add_argument("--out", required=True, help="CSV path; a .summary.json sidecar is written next to it")
    s.set_defaults(func=cmd_lineshape)

    s = sub.add_parser("model", help="synthetic model-lab corpora")
    msub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    m = msub.add_parser("gen", help="generate records from a model spec file")
    m.add_argument("--spec", required=True, help="model spec JSON/TOML")
    m.add_argument("--seed", type=int, help="override the random-corpus seed")
    m.add_argument("--out", required=True, help="output directory (records/, host.json, chempots.json)")
    m.set_defaults(func=cmd_model_gen)
    return p


VALIDATION_ERRORS = (RecordError, PipelineError, ThermoError, ModelError, ElectronicError, PhononError, KeyError, TypeError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qdscreen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StoreError, *VALIDATION_ERRORS) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"qdscreen: validation error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"qdscreen: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
