"""Command-line pipeline: generate-chip, characterize, fit, predict, verify, report.

Settings come from an optional JSON config file; command-line flags override
the file, which overrides built-in defaults.  Exit codes: 0 success,
2 configuration error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, experiment, learning, prediction, report
from .core import ChipTopology, ReadoutErrorModel, write_text_atomic
from .oracle import IntegrationError, SimulationConfig

log = logging.getLogger("rabi_xtalk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


class InputError(Exception):
    """A required input file is missing or unreadable."""


@dataclass
class GenerateConfig:
    qubits: int = 8
    beta_range: tuple = (0.0, 0.15)
    seed: int | None = None
    disabled_readout: tuple = ()
    readout: tuple = (0.97, 0.95)


@dataclass
class VerifyConfig:
    multiplets: list = field(default_factory=list)  # [[a, [b, c]], ...]
    random: int = 0
    sizes: tuple = (3,)  # total qubits per multiplet


@dataclass
class RunConfig:
    chip_file: str | None = None
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    protocol: experiment.Protocol = field(default_factory=experiment.Protocol)
    oracle: SimulationConfig = field(default_factory=SimulationConfig)
    output_dir: str = "xtalk-out"
    master_seed: int = 0
    workers: int = 1
    pairs: list | None = None
    verify: VerifyConfig = field(default_factory=VerifyConfig)


_TOP_KEYS = {"chip_file", "generate", "protocol", "oracle", "output_dir", "master_seed", "workers", "pairs", "verify"}


def _section(doc, key, allowed, where):
    sec = doc.get(key, {}) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{where}{key}: expected an object")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"{where}{key}: unknown field(s) {sorted(unknown)}")
    return sec


def parse_config(doc: dict, source: str = "<config>") -> RunConfig:
    where = f"{source}: "
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{where}unknown field(s) {sorted(unknown)}")
    cfg = RunConfig()
    try:
        if "chip_file" in doc:
            cfg.chip_file = str(doc["chip_file"])
        g = _section(doc, "generate", {"qubits", "beta_range", "seed", "disabled_readout", "readout"}, where)
        gen = GenerateConfig()
        if "qubits" in g:
            gen.qubits = int(g["qubits"])
            if gen.qubits < 2:
                raise ConfigError(f"{where}generate.qubits: must be >= 2")
        if "beta_range" in g:
            lo, hi = (float(x) for x in g["beta_range"])
            if not 0 <= lo <= hi:
                raise ConfigError(f"{where}generate.beta_range: need 0 <= low <= high")
            gen.beta_range = (lo, hi)
        if "seed" in g:
            gen.seed = int(g["seed"])
        if "disabled_readout" in g:
            gen.disabled_readout = tuple(int(q) for q in g["disabled_readout"])
        if "readout" in g:
            gen.readout = tuple(float(x) for x in g["readout"])
            ReadoutErrorModel(*gen.readout)
        cfg.generate = gen

        p = _section(doc, "protocol", {"phases", "shots", "rotation_angle", "duration"}, where)
        cfg.protocol = experiment.Protocol.from_dict(p)

        o = _section(
            doc, "oracle",
            {"levels", "frame", "time_step", "tolerance", "include_delays", "steps_per_period", "min_steps"},
            where,
        )
        cfg.oracle = SimulationConfig(**o)

        if "output_dir" in doc:
            cfg.output_dir = str(doc["output_dir"])
        if "master_seed" in doc:
            cfg.master_seed = int(doc["master_seed"])
        if "workers" in doc:
            cfg.workers = int(doc["workers"])
        if "pairs" in doc and doc["pairs"] is not None:
            cfg.pairs = [tuple(int(x) for x in pr) for pr in doc["pairs"]]

        v = _section(doc, "verify", {"multiplets", "random", "sizes"}, where)
        ver = VerifyConfig()
        if "multiplets" in v:
            ver.multiplets = [(int(a), tuple(int(q) for q in secs)) for a, secs in v["multiplets"]]
        if "random" in v:
            ver.random = int(v["random"])
        if "sizes" in v:
            ver.sizes = tuple(int(s) for s in v["sizes"])
            if any(s not in (3, 4) for s in ver.sizes):
                raise ConfigError(f"{where}verify.sizes: entries must be 3 or 4")
        cfg.verify = ver
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{where}{exc}") from exc
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc, path)


def parse_pairs(text: str) -> list[tuple[int, int]]:
    """``"1:0,1:2"`` -> ``[(1, 0), (1, 2)]`` (measured:source)."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            a, b = item.split(":")
            out.append((int(a), int(b)))
        except ValueError as exc:
            raise ConfigError(f"--pairs: cannot parse {item!r}, expected a:b") from exc
    return out


def parse_multiplet(text: str) -> tuple[int, tuple]:
    """``"0:1,2,6"`` -> ``(0, (1, 2, 6))``."""
    try:
        a, rest = text.split(":")
        secs = tuple(int(x) for x in rest.split(",") if x.strip())
        return int(a), secs
    except ValueError as exc:
        raise ConfigError(f"cannot parse multiplet {text!r}, expected a:b,c[,d]") from exc


# ------------------------------------------------------------------ helpers


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir)


def _chip_seed(cfg: RunConfig) -> int:
    return cfg.generate.seed if cfg.generate.seed is not None else cfg.master_seed


def generate_chip(cfg: RunConfig) -> core.ChipGroundTruth:
    g = cfg.generate
    for q in g.disabled_readout:
        if not 0 <= q < g.qubits:
            raise ConfigError(f"generate.disabled_readout: qubit {q} out of range")
    return core.random_chip(
        g.qubits,
        _chip_seed(cfg),
        g.beta_range,
        topology=ChipTopology.ring(g.qubits, g.disabled_readout),
        readout=ReadoutErrorModel(*g.readout),
        envelope=core.PulseEnvelope(duration=cfg.protocol.duration, rotation_angle=cfg.protocol.rotation_angle),
    )


def _read_chip(path: Path) -> core.ChipGroundTruth:
    try:
        chip = core.load_chip(path)
    except OSError as exc:
        raise InputError(f"cannot read chip file {path}: {exc}") from exc
    except (core.ChipFormatError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    errs = core.validate_chip(chip)
    if errs:
        raise ConfigError(f"{path}: invalid chip: " + "; ".join(errs))
    return chip


def obtain_chip(cfg: RunConfig) -> core.ChipGroundTruth:
    """Chip from ``chip_file``, an existing ``chip.json`` in the output dir, or generated."""
    if cfg.chip_file:
        return _read_chip(Path(cfg.chip_file))
    existing = _out(cfg) / "chip.json"
    if existing.exists():
        return _read_chip(existing)
    chip = generate_chip(cfg)
    core.save_chip(chip, existing)
    return chip


def _read_report(cfg: RunConfig, path: str | None = None) -> learning.ChipFitReport:
    p = Path(path) if path else _out(cfg) / "fit_report.json"
    try:
        return learning.load_report(p)
    except OSError as exc:
        raise InputError(f"cannot read fit report {p}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def _write_dataset(ds, directory: Path):
    stem = experiment.dataset_stem(ds)
    experiment.save_dataset(ds, directory / f"{stem}.json")
    write_text_atomic(directory / f"{stem}.csv", experiment.dataset_csv(ds))


# ----------------------------------------------------------------- commands


def cmd_generate_chip(cfg: RunConfig, args) -> int:
    chip = generate_chip(cfg)
    path = _out(cfg) / "chip.json"
    core.save_chip(chip, path)
    print(path)
    return EXIT_OK


def cmd_characterize(cfg: RunConfig, args) -> int:
    chip = obtain_chip(cfg)
    pairs = cfg.pairs
    if pairs is not None:
        for a, b in pairs:
            if a in chip.topology.disabled_readout_qubits:
                raise ConfigError(f"pair {a}:{b}: qubit {a} has disabled readout")
    datasets = experiment.run_characterization(
        chip, cfg.protocol, cfg.master_seed, cfg.oracle, pairs, cfg.workers
    )
    out = _out(cfg)
    for ds in datasets:
        _write_dataset(ds, out / "datasets")
    rep = learning.fit_datasets(
        datasets, chip.qubit_count, chip.topology.disabled_readout_qubits, cfg.workers
    )
    learning.save_report(rep, out / "fit_report.json")
    learning.save_fitted_chip(rep, out / "fitted_chip.json", chip)
    print(f"{len(datasets)} pairs fitted, median chi2/dof = {rep.median_chi2:.3f}")
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args) -> int:
    directory = Path(args.datasets) if args.datasets else _out(cfg) / "datasets"
    files = sorted(directory.glob("*.json"))
    if not files:
        raise InputError(f"no datasets found in {directory}")
    try:
        datasets = [experiment.load_dataset(f) for f in files]
    except OSError as exc:
        raise InputError(str(exc)) from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad dataset file: {exc}") from exc
    datasets = [d for d in datasets if len(d.secondary_qubits) == 1]
    datasets.sort(key=lambda d: d.pair)
    chip = None
    if cfg.chip_file or (_out(cfg) / "chip.json").exists():
        chip = obtain_chip(cfg)
    n = chip.qubit_count if chip else 1 + max(max(d.pair) for d in datasets)
    disabled = chip.topology.disabled_readout_qubits if chip else ()
    rep = learning.fit_datasets(datasets, n, disabled, cfg.workers)
    learning.save_report(rep, _out(cfg) / "fit_report.json")
    learning.save_fitted_chip(rep, _out(cfg) / "fitted_chip.json", chip)
    print(f"{len(datasets)} pairs fitted, median chi2/dof = {rep.median_chi2:.3f}")
    return EXIT_OK


def _prediction_files(pred, directory: Path, dataset=None):
    stem = prediction.prediction_stem(pred)
    prediction.save_prediction(pred, directory / f"{stem}.json")
    write_text_atomic(directory / f"{stem}.csv", prediction.prediction_csv(pred, dataset))


def cmd_predict(cfg: RunConfig, args) -> int:
    rep = _read_report(cfg, args.report)
    if not args.multiplet:
        raise ConfigError("predict: at least one --multiplet a:b,c is required")
    for text in args.multiplet:
        a, secs = parse_multiplet(text)
        try:
            preds = (
                prediction.decompose_accumulation(rep, a, secs, cfg.protocol)
                if args.decompose
                else [prediction.predict_multiplet(rep, a, secs, cfg.protocol)]
            )
        except (prediction.MissingPairFitError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        for p in preds:
            _prediction_files(p, _out(cfg) / "predictions")
    return EXIT_OK


def select_verification_multiplets(cfg: RunConfig, chip: core.ChipGroundTruth) -> list:
    chosen = list(cfg.verify.multiplets)
    for a, _ in chosen:
        if a in chip.topology.disabled_readout_qubits:
            raise ConfigError(f"verify: multiplet primary {a} has disabled readout")
    if cfg.verify.random > 0:
        for size in cfg.verify.sizes:
            seed = int(np.random.SeedSequence(cfg.master_seed, spawn_key=(7919, size)).generate_state(1)[0])
            chosen += prediction.select_multiplets(
                chip.topology.readout_qubits(), chip.qubit_count, size - 1, cfg.verify.random, seed
            )
    return chosen


def cmd_verify(cfg: RunConfig, args) -> int:
    chip = obtain_chip(cfg)
    rep = _read_report(cfg, args.report)
    if args.multiplet:
        cfg.verify.multiplets = [parse_multiplet(t) for t in args.multiplet]
    if args.random is not None:
        cfg.verify.random = args.random
    chosen = select_verification_multiplets(cfg, chip)
    if not chosen:
        raise ConfigError("verify: no multiplets requested (use --multiplet or --random K)")

    def run(item):
        a, secs = item
        ds = experiment.run_multiplet_experiment(chip, a, secs, cfg.protocol, cfg.master_seed, cfg.oracle)
        try:
            pred = prediction.predict_multiplet(rep, a, secs, cfg.protocol)
        except prediction.MissingPairFitError as exc:
            raise ConfigError(str(exc)) from exc
        chi2 = prediction.score_prediction(pred, ds)
        return ds, pred.with_score(chi2), prediction.residual_report(pred, ds)

    results = core.map_ordered(run, chosen, cfg.workers)
    out = _out(cfg)
    rows = []
    for ds, pred, resid in results:
        _write_dataset(ds, out / "verify" / "datasets")
        _prediction_files(pred, out / "verify" / "predictions", ds)
        rows.append(
            {
                "primary": pred.primary_qubit,
                "secondaries": list(pred.secondaries),
                "chi2_per_dof": pred.chi2_per_dof_vs_data,
                "max_abs_residual": float(np.max(np.abs(resid.residuals))),
                "median_abs_residual": float(np.median(np.abs(resid.residuals))),
                "extreme_points": resid.extreme_points,
            }
        )
    by_size = {}
    for r in rows:
        by_size.setdefault(str(1 + len(r["secondaries"])), []).append(r["chi2_per_dof"])
    summary = {
        "multiplets": rows,
        "median_chi2_per_dof": float(np.median([r["chi2_per_dof"] for r in rows])),
        "median_chi2_per_dof_by_size": {k: float(np.median(v)) for k, v in sorted(by_size.items())},
    }
    write_text_atomic(out / "verify" / "summary.json", core.dumps(summary))
    chi2s = [r["chi2_per_dof"] for r in rows]
    bins = np.linspace(0.0, max(5.0, math.ceil(max(chi2s))), 26)
    write_text_atomic(
        out / "verify" / "chi2_hist.csv",
        report.histogram_csv(chi2s, bins, summary["median_chi2_per_dof"]),
    )
    print(f"{len(rows)} multiplets, median chi2/dof = {summary['median_chi2_per_dof']:.3f}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    rep = _read_report(cfg, args.report)
    topology = None
    if cfg.chip_file or (_out(cfg) / "chip.json").exists():
        topology = obtain_chip(cfg).topology
    graph = report.build_graph(rep, topology)
    out = _out(cfg) / "report"
    write_text_atomic(out / "crosstalk.dot", report.export_graph(graph, "dot"))
    write_text_atomic(out / "graph.json", report.export_graph(graph, "structured"))
    chi2s = [r.chi2_per_dof for r in rep.results]
    hi = max(5.0, math.ceil(max(chi2s))) if chi2s else 5.0
    write_text_atomic(
        out / "chi2_hist.csv", report.histogram_csv(chi2s, np.linspace(0.0, hi, 26), rep.median_chi2)
    )
    betas = [r.beta_hat for r in rep.results]
    write_text_atomic(out / "beta_hist.csv", report.histogram_csv(betas, np.linspace(0.0, 0.3, 31)))
    write_text_atomic(out / "beta_theta.csv", report.beta_theta_csv(rep))
    write_text_atomic(out / "summary.csv", report.summary_csv(rep, graph))
    write_text_atomic(out / "summary.json", core.dumps(report.summary(rep, graph)))
    return EXIT_OK


COMMANDS = {
    "generate-chip": cmd_generate_chip,
    "characterize": cmd_characterize,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--output-dir", help="output directory (overrides config)")
    common.add_argument("--chip", help="chip file (overrides config chip_file)")
    common.add_argument("--workers", type=int, help="thread count for pair/multiplet loops")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rabi-xtalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate-chip", parents=[common], help="write a synthetic chip file")
    p = sub.add_parser("characterize", parents=[common], help="simulate and fit all directed pairs")
    p.add_argument("--pairs", help="restrict to measured:source pairs, e.g. 1:0,1:2")
    p = sub.add_parser("fit", parents=[common], help="refit existing pair datasets")
    p.add_argument("--datasets", help="directory of dataset JSON files")
    p = sub.add_parser("predict", parents=[common], help="predict multiplet curves from a fit report")
    p.add_argument("--report", help="fit report (default OUTPUT/fit_report.json)")
    p.add_argument("--multiplet", action="append", help="a:b,c[,d]; repeatable")
    p.add_argument("--decompose", action="store_true", help="also predict every sub-multiplet")
    p = sub.add_parser("verify", parents=[common], help="simulate multiplets and score predictions")
    p.add_argument("--report", help="fit report (default OUTPUT/fit_report.json)")
    p.add_argument("--multiplet", action="append", help="a:b,c[,d]; repeatable")
    p.add_argument("--random", type=int, help="number of random multiplets per size")
    p = sub.add_parser("report", parents=[common], help="crosstalk graph and summary tables")
    p.add_argument("--report", help="fit report (default OUTPUT/fit_report.json)")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.chip is not None:
        cfg.chip_file = args.chip
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "pairs", None):
        cfg.pairs = parse_pairs(args.pairs)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except experiment.DisabledReadoutError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
