"""Command-line pipeline: synth, ingest, rate, network, train, eval, report.

Every stage reads the previous stage's artifacts from ``--out`` and writes its
own into a subdirectory together with ``manifest.json`` (input hashes, the
resolved configuration and the seed). All randomness derives from ``--seed``
through named substreams, so rerunning a stage reproduces its files byte for
byte.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import evaluate, ingest, models, perfnet, rating, synth
from .evaluate import SampleSpec, SplitSpec, substream
from .models import MODEL_NAMES, TrainConfig, TrainingDivergence
from .perfnet import KINDS, DecayConfig
from .rating import RatingConfig
from .synth import SynthConfig

logger = logging.getLogger("coplay")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
STAGES = ("synth", "ingest", "rate", "network", "train", "eval", "report")
TRAINABLE = tuple(m for m in MODEL_NAMES if m != "baseline")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- configuration ----------------------------------------------------------------

@dataclass
class PipelineConfig:
    seed: int
    out: Path
    fmt: str = "jsonl"
    inputs: tuple = ()
    min_matches: int = ingest.DEFAULT_MIN_MATCHES
    rating: RatingConfig = field(default_factory=RatingConfig)
    decay: DecayConfig = field(default_factory=DecayConfig)
    min_count: int = perfnet.DEFAULT_MIN_COUNT
    kinds: tuple = KINDS
    hide_fraction: float = 0.2
    sample: SampleSpec = field(default_factory=SampleSpec)
    models: tuple = TRAINABLE
    dims: tuple = (16,)
    lam: float = 1e-4
    ks: tuple = evaluate.DEFAULT_KS
    gf_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        learning_rate=1e-2, batch_size=256, epochs=300, patience=50, plateau=20,
        optimizer="adam", validation_fraction=0.1))
    ae_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        learning_rate=1e-2, batch_size=32, epochs=500, patience=50, plateau=20,
        optimizer="adam", clip_norm=10.0, validation_fraction=0.1))
    synth: SynthConfig = field(default_factory=SynthConfig)

    def echo(self) -> dict:
        """JSON-ready view of every resolved setting."""
        out = {}
        for key, value in asdict(self).items():
            out[key] = str(value) if isinstance(value, Path) else value
        return json.loads(json.dumps(out, default=list))

    def train_config(self, kind: str, model: str, d: int) -> TrainConfig:
        base = self.gf_train if model == "gf" else self.ae_train
        seed = int(substream(self.seed, "train", kind, model, d).integers(2**31))
        return replace(base, seed=seed)

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(self.hide_fraction, int(substream(self.seed, "split").integers(2**31)))

    @property
    def sample_spec(self) -> SampleSpec:
        return replace(self.sample, seed=int(substream(self.seed, "sample").integers(2**31)))


def _csv_list(text: str, cast=str) -> tuple:
    return tuple(cast(x.strip()) for x in str(text).split(",") if x.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _train_section(ini: configparser.ConfigParser, section: str, base: TrainConfig) -> TrainConfig:
    if not ini.has_section(section):
        return base
    s = ini[section]
    casts = {"learning_rate": float, "batch_size": int, "epochs": int, "patience": int,
             "plateau": int, "momentum": float, "weight_decay": float,
             "validation_fraction": float, "optimizer": str,
             "clip_norm": lambda v: None if v.lower() == "none" else float(v)}
    changes = {}
    for key, value in s.items():
        if key not in casts:
            raise UsageError(f"unknown key {key!r} in [{section}]")
        changes[key] = casts[key](value)
    return replace(base, **changes)


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge defaults, the INI file and command-line flags (flags win)."""
    ini = configparser.ConfigParser()
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            ini.read(path, encoding="utf-8")
        except configparser.Error as err:
            raise UsageError(f"cannot parse config {path}: {err}") from err

    def get(section, key, cast, default, flag=None):
        if flag is not None:
            return flag
        if ini.has_option(section, key):
            try:
                return cast(ini.get(section, key))
            except (TypeError, ValueError) as err:
                raise UsageError(f"bad value for [{section}] {key}: {err}") from err
        return default

    seed = args.seed if args.seed is not None else get("pipeline", "seed", int, None)
    if seed is None:
        raise UsageError("a seed is required (--seed N or [pipeline] seed)")
    defaults = PipelineConfig(seed=seed, out=Path("."))
    a = vars(args)
    try:
        rating_cfg = RatingConfig(
            mu0=get("rating", "mu0", float, defaults.rating.mu0),
            sigma0=get("rating", "sigma0", float, defaults.rating.sigma0),
            beta=get("rating", "beta", float, defaults.rating.beta),
            tau=get("rating", "tau", float, defaults.rating.tau),
            draw_probability=get("rating", "draw_probability", float,
                                 defaults.rating.draw_probability))
        horizon = get("network", "horizon", lambda v: None if v.lower() == "none" else int(v),
                      defaults.decay.horizon, a.get("horizon"))
        decay = DecayConfig(horizon, get("network", "growth", _bool, False))
        sample = SampleSpec(
            target_nodes=get("sample", "target_nodes", int, defaults.sample.target_nodes,
                             a.get("target_nodes")),
            restart_probability=get("sample", "restart_probability", float,
                                    defaults.sample.restart_probability),
            samples=get("sample", "samples", int, defaults.sample.samples, a.get("samples")))
        synth_cfg = SynthConfig(
            players=get("synth", "players", int, defaults.synth.players, a.get("players")),
            matches=get("synth", "matches", int, defaults.synth.matches, a.get("matches")),
            skill_mean=get("synth", "skill_mean", float, defaults.synth.skill_mean),
            skill_sd=get("synth", "skill_sd", float, defaults.synth.skill_sd),
            transfer=get("synth", "transfer", float, defaults.synth.transfer, a.get("transfer")),
            policy=get("synth", "policy", str, defaults.synth.policy, a.get("policy")),
            seed=int(substream(seed, "synth").integers(2**31)),
            activity_shape=get("synth", "activity_shape", float, defaults.synth.activity_shape))
        cfg = PipelineConfig(
            seed=seed,
            out=Path(get("pipeline", "out", str, "coplay-out", args.out)),
            fmt=get("ingest", "format", str, "jsonl", args.format),
            inputs=get("ingest", "input", _csv_list, (), tuple(a["input"]) if a.get("input") else None),
            min_matches=get("ingest", "min_matches", int, defaults.min_matches, a.get("min_matches")),
            rating=rating_cfg,
            decay=decay,
            min_count=get("network", "min_count", int, defaults.min_count, a.get("min_count")),
            kinds=get("network", "kinds", _csv_list, defaults.kinds,
                      _csv_list(a["kinds"]) if a.get("kinds") else None),
            hide_fraction=get("split", "hide_fraction", float, defaults.hide_fraction),
            sample=sample,
            models=get("train", "models", _csv_list, defaults.models,
                       _csv_list(a["models"]) if a.get("models") else None),
            dims=get("train", "dims", lambda v: _csv_list(v, int), defaults.dims,
                     _csv_list(a["dims"], int) if a.get("dims") else None),
            lam=get("train", "lambda", float, defaults.lam),
            ks=get("eval", "ks", lambda v: _csv_list(v, int), defaults.ks),
            gf_train=_train_section(ini, "train.gf", defaults.gf_train),
            ae_train=_train_section(ini, "train.autoencoder", defaults.ae_train),
            synth=synth_cfg,
        )
        SplitSpec(cfg.hide_fraction)
    except ValueError as err:
        raise UsageError(str(err)) from err
    if cfg.fmt not in ingest.FORMATS:
        raise UsageError(f"unknown format {cfg.fmt!r}; valid formats: {', '.join(ingest.FORMATS)}")
    bad = [k for k in cfg.kinds if k not in KINDS]
    if bad:
        raise UsageError(f"unknown network kind {bad[0]!r}; valid kinds: {', '.join(KINDS)}")
    bad = [m for m in cfg.models if m not in TRAINABLE]
    if bad:
        raise UsageError(f"unknown model {bad[0]!r}; valid models: {', '.join(TRAINABLE)}")
    if any(d < 1 for d in cfg.dims):
        raise UsageError("every latent dimension must be >= 1")
    return cfg


# -- stage plumbing -------------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise DataError(f"missing artifact {path}; run the '{stage}' stage first")
    return path


def _stage_dir(cfg: PipelineConfig, stage: str) -> Path:
    path = cfg.out / stage
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(cfg: PipelineConfig, stage: str, inputs: Sequence[Path],
                    outputs: Sequence[Path]) -> None:
    root = cfg.out
    def rel(p: Path) -> str:
        try:
            return str(Path(p).resolve().relative_to(root.resolve()))
        except ValueError:
            return str(p)
    doc = {
        "stage": stage,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "inputs": {rel(p): _sha256(Path(p)) for p in sorted(inputs, key=str)},
        "outputs": {rel(p): _sha256(Path(p)) for p in sorted(outputs, key=str)},
    }
    with open(root / stage / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_rows(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])
    return path


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


# -- stages -----------------------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, args) -> int:
    out = _stage_dir(cfg, "synth")
    log = synth.generate_match_log(cfg.synth)
    path = out / f"matches.{cfg.fmt}"
    (ingest.write_jsonl if cfg.fmt == "jsonl" else ingest.write_csv)(log.matches, path)
    counts = log.match_counts()
    truth = {
        "initial_skill": log.initial_skill,
        "final_skill": log.final_skill,
        "match_counts": dict(sorted(counts.items())),
        "retained_players": sum(1 for c in counts.values() if c >= cfg.min_matches),
        "min_matches": cfg.min_matches,
    }
    truth_path = out / "ground_truth.json"
    with open(truth_path, "w", encoding="utf-8") as handle:
        json.dump(truth, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_manifest(cfg, "synth", [], [path, truth_path])
    print(f"matches written: {len(log.matches)}")
    print(f"players: {cfg.synth.players}")
    print(f"log: {path}")
    return EXIT_OK


def cmd_ingest(cfg: PipelineConfig, args) -> int:
    if not cfg.inputs:
        raise UsageError("no input log given (--input PATH or [ingest] input)")
    paths = [Path(p) for p in cfg.inputs]
    for p in paths:
        if not p.is_file():
            raise DataError(f"cannot read input {p}: no such file")
    matches, rejects = ingest.parse_match_logs(paths, cfg.fmt)
    valid = ingest.filter_valid_matches(matches)
    players, valid = ingest.filter_experienced_players(valid, cfg.min_matches)
    histories = ingest.build_histories(valid, players)
    out = _stage_dir(cfg, "ingest")
    written = [out / "matches.jsonl", out / "histories.jsonl", out / "rejects.csv",
               out / "match_counts.csv"]
    ingest.write_jsonl(valid, written[0])
    ingest.write_histories(histories, written[1])
    ingest.write_rejects(rejects, written[2])
    counts = ingest.match_counts(valid)
    _write_rows(written[3], ["account_id", "matches", "retained"],
                ((p, counts[p], int(p in players)) for p in sorted(counts)))
    _write_manifest(cfg, "ingest", paths, written)
    print(f"records rejected: {len(rejects)}")
    print(f"matches kept: {len(valid)}")
    print(f"players retained: {len(players)}")
    return EXIT_OK


def cmd_rate(cfg: PipelineConfig, args) -> int:
    src = cfg.out / "ingest"
    matches_path = _require(src / "matches.jsonl", "ingest")
    hist_path = _require(src / "histories.jsonl", "ingest")
    matches, _ = ingest.parse_match_log(matches_path, "jsonl")
    histories = ingest.read_histories(hist_path)
    timelines = rating.rate_dataset(matches, histories, cfg.rating)
    out = _stage_dir(cfg, "rate")
    written = [out / "timelines.csv", out / "deciles.csv"]
    rating.write_timelines(timelines, written[0])
    try:
        rows = rating.decile_timeline_report(timelines)
    except ValueError as err:
        logger.warning("decile report skipped: %s", err)
        rows = []
    rating.write_decile_report(rows, written[1])
    _write_manifest(cfg, "rate", [matches_path, hist_path], written)
    print(f"players rated: {len(timelines)}")
    return EXIT_OK


def cmd_network(cfg: PipelineConfig, args) -> int:
    hist_path = _require(cfg.out / "ingest" / "histories.jsonl", "ingest")
    tl_path = _require(cfg.out / "rate" / "timelines.csv", "rate")
    histories = ingest.read_histories(hist_path)
    timelines = rating.read_timelines(tl_path)
    out = _stage_dir(cfg, "network")
    written = []
    sizes = []
    nets = {}
    for kind in KINDS:
        full = perfnet.aggregate_network(histories, timelines, kind, cfg.decay, cfg.rating.mu0)
        kept = perfnet.threshold_edges(full, cfg.min_count)
        lcc = perfnet.largest_connected_component(kept)
        nets[kind] = (kept, lcc)
        sizes += [(kind, "all", full.n_nodes, full.n_edges),
                  (kind, "thresholded", kept.n_nodes, kept.n_edges),
                  (kind, "lcc", lcc.n_nodes, lcc.n_edges)]
        path = out / f"{kind.lower()}.tsv"
        perfnet.write_network(lcc, path)
        written.append(path)
    written.append(_write_rows(out / "sizes.csv", ["kind", "stage", "nodes", "edges"], sizes))

    spn, lpn = nets[perfnet.SPN][0], nets[perfnet.LPN][0]
    tau_rows = []
    if spn.n_edges >= 2:
        tau_rows.append(("global", "", perfnet.kendall_tau_global(spn, lpn)))
    per = perfnet.kendall_tau_per_player(spn, lpn)
    tau_rows += [("player", p, t) for p, t in sorted(per.taus.items())]
    written.append(_write_rows(out / "tau.csv", ["scope", "account_id", "tau"], tau_rows))
    _write_manifest(cfg, "network", [hist_path, tl_path], written)
    for kind, stage, n, m in sizes:
        print(f"{kind} {stage}: {n} nodes, {m} edges")
    return EXIT_OK


def _load_net(cfg: PipelineConfig, kind: str):
    path = _require(cfg.out / "network" / f"{kind.lower()}.tsv", "network")
    net = perfnet.read_network(path)
    if net.n_edges < 2:
        raise DataError(f"{path}: network has {net.n_edges} edges, too few to split")
    return net, path


def _checkpoint_path(cfg: PipelineConfig, kind: str, model: str, d: int) -> Path:
    return cfg.out / "train" / kind.lower() / f"{model}_d{d}.json"


def cmd_train(cfg: PipelineConfig, args) -> int:
    inputs, written = [], []
    for kind in cfg.kinds:
        net, net_path = _load_net(cfg, kind)
        inputs.append(net_path)
        train_net, _ = evaluate.split_edges(net, cfg.split)
        tr = train_net.edge_arrays()
        (cfg.out / "train" / kind.lower()).mkdir(parents=True, exist_ok=True)
        for d in cfg.dims:
            for name in cfg.models:
                tcfg = cfg.train_config(kind, name, d)
                model = models.fit_model(name, net.n_nodes, tr.src, tr.dst, tr.weight, d,
                                         tcfg, cfg.lam)
                path = _checkpoint_path(cfg, kind, name, d)
                models.save_checkpoint(model, path, name, tcfg.seed, models.config_dict(tcfg))
                emb_path = path.with_name(f"{name}_d{d}_embeddings.csv")
                models.export_embeddings(model.embeddings(), net.nodes, emb_path)
                written += [path, emb_path]
                print(f"{kind} {name} d={d}: trained")
    _stage_dir(cfg, "train")
    _write_manifest(cfg, "train", inputs, written)
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, args) -> int:
    inputs, written = [], []
    out = _stage_dir(cfg, "eval")
    for kind in cfg.kinds:
        net, net_path = _load_net(cfg, kind)
        inputs.append(net_path)
        trained = {}
        for d in cfg.dims:
            for name in cfg.models:
                path = _require(_checkpoint_path(cfg, kind, name, d), "train")
                inputs.append(path)
                trained[(0, name, d)] = models.load_checkpoint(path)
        report = evaluate.run_benchmark(net, cfg.models, cfg.split, cfg.sample_spec,
                                        dims=cfg.dims, runs=1, lam=cfg.lam, ks=cfg.ks,
                                        trained=trained)
        path = out / f"{kind.lower()}_records.csv"
        evaluate.write_report(report, path)
        written.append(path)
        for row in report.aggregate():
            if row["metric"] == "mse" and row["model"] not in ("baseline", "ideal"):
                print(f"{kind} {row['model']} d={row['d']}: MSE gain {row['gain_mean']:.2f}%")
    _write_manifest(cfg, "eval", inputs, written)
    return EXIT_OK


def _log_bins(values: Sequence[int], per_decade: int = 5):
    values = [v for v in values if v > 0]
    if not values:
        return []
    top = math.ceil(math.log10(max(values)) * per_decade) + 1
    edges = np.unique(np.floor(10 ** (np.arange(top + 1) / per_decade)).astype(int))
    counts, _ = np.histogram(values, bins=edges)
    return [(int(lo), int(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def cmd_report(cfg: PipelineConfig, args) -> int:
    counts_path = _require(cfg.out / "ingest" / "match_counts.csv", "ingest")
    deciles_path = _require(cfg.out / "rate" / "deciles.csv", "rate")
    sizes_path = _require(cfg.out / "network" / "sizes.csv", "network")
    tau_path = _require(cfg.out / "network" / "tau.csv", "network")
    out = _stage_dir(cfg, "report")
    inputs = [counts_path, deciles_path, sizes_path, tau_path]
    written = []

    counts = [int(r["matches"]) for r in _read_rows(counts_path)]
    written.append(_write_rows(out / "match_count_histogram.csv", ["bin_low", "bin_high", "players"],
                               _log_bins(counts)))

    deciles = _read_rows(deciles_path)
    written.append(_write_rows(out / "rating_deciles.csv",
                               ["group", "match_index", "mean_mu", "std_mu"],
                               ((r["group"], r["match_index"], r["mean_mu"], r["std_mu"])
                                for r in deciles)))

    written.append(_write_rows(out / "network_sizes.csv", ["kind", "stage", "nodes", "edges"],
                               ((r["kind"], r["stage"], r["nodes"], r["edges"])
                                for r in _read_rows(sizes_path))))

    weight_rows, sampler_rows = [], []
    nets = {}
    for kind in KINDS:
        net, path = _load_net(cfg, kind)
        inputs.append(path)
        nets[kind] = net
    all_w = np.concatenate([nets[k].edge_arrays().weight for k in KINDS])
    w_range = (float(all_w.min()), float(all_w.max())) if all_w.size else (0.0, 1.0)
    if w_range[0] == w_range[1]:
        w_range = (w_range[0] - 0.5, w_range[1] + 0.5)
    for kind, net in nets.items():
        e = net.edge_arrays()
        for lo, hi, c in perfnet.histogram(e.weight, 30, w_range):
            weight_rows.append((kind, lo, hi, c))
        spec = replace(cfg.sample_spec, target_nodes=min(cfg.sample.target_nodes, net.n_nodes))
        nodes = evaluate.sample_subnetwork(net, spec, substream(cfg.seed, "report-sample", kind))
        sampled = e.weight[evaluate.within(e, nodes)]
        for which, values in (("full", e.weight), ("sample", sampled)):
            for lo, hi, c in perfnet.histogram(values, 30, w_range):
                sampler_rows.append((kind, which, lo, hi, c))
    written.append(_write_rows(out / "weight_histogram.csv", ["kind", "bin_low", "bin_high", "count"],
                               weight_rows))
    written.append(_write_rows(out / "sampler_weights.csv",
                               ["kind", "network", "bin_low", "bin_high", "count"], sampler_rows))

    taus = _read_rows(tau_path)
    player_taus = [float(r["tau"]) for r in taus if r["scope"] == "player"]
    tau_rows = [("global", "", "", r["tau"]) for r in taus if r["scope"] == "global"]
    tau_rows += [("player", lo, hi, c) for lo, hi, c in perfnet.histogram(player_taus, 20, (-1.0, 1.0))]
    written.append(_write_rows(out / "tau_summary.csv", ["scope", "bin_low", "bin_high", "value"],
                               tau_rows))

    gain_rows, curve_rows, summary_rows = [], [], []
    for kind in cfg.kinds:
        rec_path = _require(cfg.out / "eval" / f"{kind.lower()}_records.csv", "eval")
        inputs.append(rec_path)
        report = evaluate.read_report(rec_path)
        for row in report.aggregate():
            summary_rows.append(tuple(row[c] for c in
                                      ("model", "kind", "d", "metric", "mean", "std",
                                       "gain_mean", "gain_std")))
            if row["metric"] in evaluate.ERROR_METRICS and row["model"] not in ("baseline", "ideal"):
                gain_rows.append((kind, row["model"], row["d"], row["metric"],
                                  row["gain_mean"], row["gain_std"]))
        for row in report.curves():
            curve_rows.append((kind, row["k"], row["model"], row["value"]))
    written.append(_write_rows(out / "gain_by_dimension.csv",
                               ["kind", "model", "d", "metric", "gain_mean", "gain_std"], gain_rows))
    written.append(_write_rows(out / "avgrec_curves.csv", ["kind", "k", "model", "value"],
                               curve_rows))
    written.append(_write_rows(out / "summary.csv",
                               ["model", "kind", "d", "metric", "mean", "std", "gain_mean",
                                "gain_std"], summary_rows))
    _write_manifest(cfg, "report", inputs, written)
    for p in written:
        print(p)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "rate": cmd_rate, "network": cmd_network,
    "train": cmd_train, "eval": cmd_eval, "report": cmd_report,
}


# -- argument parsing ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; SUPPRESS keeps them from resetting
    # values given before the subcommand name
    default = argparse.SUPPRESS if suppress else None
    flags = _Parser(add_help=False)
    flags.add_argument("--config", metavar="PATH", default=default,
                       help="INI file with per-stage sections")
    flags.add_argument("--seed", type=int, metavar="N", default=default,
                       help="top-level seed (required)")
    flags.add_argument("--out", metavar="DIR", default=default, help="output directory")
    flags.add_argument("--format", choices=ingest.FORMATS, default=default,
                       help="match-log format")
    flags.add_argument("-v", "--verbose", action="store_true",
                       default=argparse.SUPPRESS if suppress else False)
    return flags


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = _Parser(prog="coplay", description="Co-play performance-network pipeline.",
                     parents=[_global_flags(suppress=False)])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic match log")
    p.add_argument("--players", type=int)
    p.add_argument("--matches", type=int)
    p.add_argument("--transfer", type=float)
    p.add_argument("--policy", choices=synth.POLICIES)
    p.add_argument("--min-matches", dest="min_matches", type=int)

    p = sub.add_parser("ingest", parents=[common], help="parse, validate and filter match logs")
    p.add_argument("--input", nargs="+", metavar="PATH")
    p.add_argument("--min-matches", dest="min_matches", type=int)

    sub.add_parser("rate", parents=[common], help="replay matches and record ratings")

    p = sub.add_parser("network", parents=[common], help="build short- and long-term networks")
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--horizon", type=int)

    for name, text in (("train", "train link-weight predictors"),
                       ("eval", "score predictors on hidden links")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--models", metavar="LIST", help=f"comma list from {', '.join(TRAINABLE)}")
        p.add_argument("--dims", metavar="LIST", help="comma list of latent dimensions")
        p.add_argument("--kinds", metavar="LIST", help="comma list from SPN, LPN")
        if name == "eval":
            p.add_argument("--samples", type=int)
            p.add_argument("--target-nodes", dest="target_nodes", type=int)

    sub.add_parser("report", parents=[common], help="write plot-ready CSV summaries")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as err:
        print(f"coplay: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergence, FloatingPointError) as err:
        print(f"coplay: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ingest.IngestError, ValueError, KeyError, OSError) as err:
        print(f"coplay: data error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
