"""Stage orchestration: feature tables, artifacts, and the stage functions.

Every stage reads only declared upstream artifacts from the output directory
and writes flat CSV/JSON artifacts back into it. Artifacts embed the resolved
configuration hash; a stage refuses to consume an upstream artifact produced
under a different configuration. All floating-point output uses repr(), so
identical runs are byte-identical.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig, config_hash, resolved_config_text
from .corpus import (
    Corpus,
    DeltaRules,
    MatchedPair,
    corpus_stats,
    corpus_to_lines,
    detect_deltas,
    match_challengers,
    parse_corpus,
)
from .did import VARIANTS, build_panel, did_estimate
from .errors import ConfigError, DataError
from .learners import (
    FAMILIES,
    LabeledDataset,
    ModelSpec,
    cross_validate,
    pair_folds,
    permutation_importance,
    train,
)
from .network import CENTRALITY_NAMES, centrality_table
from .synth import SynthParams, gen_corpus
from .textfeat import LANGUAGE_FEATURES, LexiconSet, extract_language_features

NETWORK_FEATURES: tuple[str, ...] = CENTRALITY_NAMES

STAGES = ("synth", "ingest", "stats", "pairs", "features", "train", "importance", "did", "report")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# Feature table
# ---------------------------------------------------------------------------


@dataclass
class FeatureRow:
    pair_id: str
    discussion_id: str
    user: str
    label: int
    values: dict[str, float]


@dataclass
class FeatureTable:
    feature_names: tuple[str, ...]
    rows: list[FeatureRow]

    def network_subset(self, mode: str) -> tuple[str, ...]:
        if mode == "degree_ratio":
            return ("degree_ratio",)
        if mode == "all":
            return NETWORK_FEATURES
        raise ConfigError(f"unknown network feature mode {mode!r}")

    def feature_set_columns(self, feature_set: str, network_mode: str) -> tuple[str, ...]:
        if feature_set == "language":
            return LANGUAGE_FEATURES
        if feature_set == "network":
            return self.network_subset(network_mode)
        if feature_set == "all":
            return LANGUAGE_FEATURES + self.network_subset(network_mode)
        raise ConfigError(f"unknown feature set {feature_set!r}")

    def to_labeled_dataset(self, feature_set: str = "all", network_mode: str = "degree_ratio") -> LabeledDataset:
        columns = self.feature_set_columns(feature_set, network_mode)
        X = np.array([[row.values[c] for c in columns] for row in self.rows], dtype=float)
        return LabeledDataset(
            feature_names=columns,
            pair_ids=tuple(r.pair_id for r in self.rows),
            users=tuple(r.user for r in self.rows),
            X=X,
            y=np.array([r.label for r in self.rows], dtype=int),
        )


def compute_feature_table(
    corpus: Corpus,
    pairs: Sequence[MatchedPair],
    lexicons: LexiconSet,
    threads: int = 1,
) -> FeatureTable:
    """Language plus network features at each pair's cutoff, two rows per pair.

    Rows keep the pair order (treated first), so the table is independent of
    the thread count.
    """
    by_id = {d.id: d for d in corpus.discussions}
    names = LANGUAGE_FEATURES + NETWORK_FEATURES

    def one_pair(pair: MatchedPair) -> list[FeatureRow]:
        d = by_id.get(pair.discussion_id)
        if d is None:
            raise DataError(f"pair references unknown discussion {pair.discussion_id!r}")
        users = [pair.treated_user, pair.control_user]
        net = centrality_table(d, users, pair.cutoff_time)
        rows = []
        for label, user in ((1, pair.treated_user), (0, pair.control_user)):
            lang = extract_language_features(user, d, pair.cutoff_time, lexicons)
            values = {**lang.as_dict(), **net[user].as_dict()}
            rows.append(
                FeatureRow(pair_id=pair.pair_id, discussion_id=d.id, user=user,
                           label=label, values=values)
            )
        return rows

    rows: list[FeatureRow] = []
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for pair_rows in pool.map(one_pair, pairs):
                rows.extend(pair_rows)
    else:
        for pair in pairs:
            rows.extend(one_pair(pair))
    return FeatureTable(feature_names=names, rows=rows)


# ---------------------------------------------------------------------------
# Artifact I/O
# ---------------------------------------------------------------------------

HASH_PREFIX = "# config_hash="


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], cfg_hash: str) -> None:
    lines = [f"{HASH_PREFIX}{cfg_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path: Path) -> tuple[str, list[str], list[list[str]]]:
    if not path.is_file():
        raise DataError(f"missing artifact {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(HASH_PREFIX):
        raise DataError(f"artifact {path} lacks a config hash line")
    cfg_hash = lines[0][len(HASH_PREFIX):]
    header = lines[1].split(",") if len(lines) > 1 else []
    rows = [line.split(",") for line in lines[2:] if line]
    return cfg_hash, header, rows


def write_json(path: Path, payload: dict, cfg: RunConfig) -> None:
    body = {"config_hash": config_hash(cfg), "config": cfg.as_dict(), **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path) -> dict:
    if not path.is_file():
        raise DataError(f"missing artifact {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _check_hash(found: str, cfg: RunConfig, artifact: str, producer: str) -> None:
    expected = config_hash(cfg)
    if found != expected:
        raise DataError(
            f"artifact {artifact} was produced under config {found}, current config is "
            f"{expected}; re-run '{producer}' with this configuration"
        )


def _require(path: Path, producer: str) -> Path:
    if not path.is_file():
        raise DataError(f"missing upstream artifact {path.name}; run '{producer}' first")
    return path


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lexicons(cfg: RunConfig) -> LexiconSet:
    if cfg.lexicon_dir:
        return LexiconSet.from_dir(cfg.lexicon_dir)
    return LexiconSet.bundled()


def _write_resolved_config(cfg: RunConfig, out: Path) -> None:
    (out / "resolved_config.txt").write_text(resolved_config_text(cfg), encoding="utf-8")


def synth_params_from_config(cfg: RunConfig) -> SynthParams:
    return SynthParams(
        n_discussions=cfg.synth_discussions,
        comments_per_discussion=cfg.synth_comments,
        reply_preferential_strength=cfg.synth_strength,
        delta_probability=cfg.synth_delta_probability,
        delta_mode=cfg.synth_delta_mode,
        second_delta_probability=cfg.synth_second_delta_probability,
        op_overlap=cfg.synth_op_overlap,
        seed=cfg.seed,
    )


def stage_synth(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    _write_resolved_config(cfg, out)
    corpus, truth = gen_corpus(synth_params_from_config(cfg))
    corpus_path = out / "corpus.jsonl"
    corpus_path.write_text("\n".join(corpus_to_lines(corpus)) + "\n", encoding="utf-8")
    truth_path = out / "synth_truth.json"
    write_json(truth_path, {"truth": truth}, cfg)
    return [corpus_path, truth_path]


def _input_path(cfg: RunConfig) -> Path:
    if cfg.input:
        return Path(cfg.input)
    return Path(cfg.output_dir) / "corpus.jsonl"


def stage_ingest(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    _write_resolved_config(cfg, out)
    src = _input_path(cfg)
    if not src.is_file():
        raise DataError(f"input corpus {src} not found; supply input= or run 'synth' first")
    with src.open(encoding="utf-8") as fh:
        corpus = parse_corpus(fh, validate_posts=cfg.validate_posts)
    disc_path = out / "discussions.jsonl"
    disc_path.write_text("\n".join(corpus_to_lines(corpus)) + "\n", encoding="utf-8")
    report_path = out / "ingest_report.json"
    write_json(report_path, {"report": corpus.report.as_dict()}, cfg)
    return [disc_path, report_path]


def load_ingested(cfg: RunConfig) -> Corpus:
    out = Path(cfg.output_dir)
    report = read_json(_require(out / "ingest_report.json", "ingest"))
    _check_hash(report.get("config_hash", ""), cfg, "ingest_report.json", "ingest")
    path = _require(out / "discussions.jsonl", "ingest")
    with path.open(encoding="utf-8") as fh:
        return parse_corpus(fh)


def stage_stats(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    corpus = load_ingested(cfg)
    summary = corpus_stats(corpus, cfg.delta_rules())
    path = out / "stats.json"
    write_json(path, {"stats": summary.as_dict()}, cfg)
    return [path]


PAIRS_HEADER = ("discussion_id", "treated", "control", "cutoff", "similarity")


def compute_pairs(corpus: Corpus, rules: DeltaRules, threads: int = 1):
    """Detect awards and match pairs per discussion; order-independent output."""

    def one(d):
        awards = detect_deltas(d, rules)
        return match_challengers(d, awards)

    outcomes = []
    discussions = corpus.discussions
    if threads > 1 and len(discussions) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, discussions))
    else:
        outcomes = [one(d) for d in discussions]
    pairs = [p for o in outcomes for p in o.pairs]
    dropped = sum(o.dropped_awards for o in outcomes)
    return pairs, dropped


def stage_pairs(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    corpus = load_ingested(cfg)
    pairs, dropped = compute_pairs(corpus, cfg.delta_rules(), cfg.effective_threads())
    pairs_path = out / "pairs.csv"
    write_csv(
        pairs_path,
        PAIRS_HEADER,
        [
            (p.discussion_id, p.treated_user, p.control_user, p.cutoff_time, p.match_similarity)
            for p in pairs
        ],
        config_hash(cfg),
    )
    report_path = out / "pairs_report.json"
    write_json(report_path, {"n_pairs": len(pairs), "dropped_awards": dropped}, cfg)
    return [pairs_path, report_path]


def load_pairs(cfg: RunConfig) -> list[MatchedPair]:
    path = _require(Path(cfg.output_dir) / "pairs.csv", "pairs")
    cfg_hash, header, rows = read_csv(path)
    _check_hash(cfg_hash, cfg, "pairs.csv", "pairs")
    if header != list(PAIRS_HEADER):
        raise DataError(f"unexpected pairs.csv header {header}")
    return [
        MatchedPair(
            discussion_id=r[0], treated_user=r[1], control_user=r[2],
            cutoff_time=int(r[3]), match_similarity=float(r[4]),
        )
        for r in rows
    ]


FEATURES_ID_COLUMNS = ("pair_id", "discussion_id", "user", "label")


def stage_features(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    corpus = load_ingested(cfg)
    pairs = load_pairs(cfg)
    table = compute_feature_table(corpus, pairs, _lexicons(cfg), cfg.effective_threads())
    path = out / "features.csv"
    header = FEATURES_ID_COLUMNS + table.feature_names
    write_csv(
        path,
        header,
        [
            (r.pair_id, r.discussion_id, r.user, r.label,
             *[r.values[c] for c in table.feature_names])
            for r in table.rows
        ],
        config_hash(cfg),
    )
    return [path]


def load_feature_table(cfg: RunConfig) -> FeatureTable:
    path = _require(Path(cfg.output_dir) / "features.csv", "features")
    cfg_hash, header, rows = read_csv(path)
    _check_hash(cfg_hash, cfg, "features.csv", "features")
    id_cols = list(FEATURES_ID_COLUMNS)
    if header[: len(id_cols)] != id_cols:
        raise DataError(f"unexpected features.csv header {header[:4]}")
    names = tuple(header[len(id_cols):])
    out_rows = []
    for r in rows:
        values = {name: float(v) for name, v in zip(names, r[len(id_cols):])}
        out_rows.append(
            FeatureRow(pair_id=r[0], discussion_id=r[1], user=r[2], label=int(r[3]),
                       values=values)
        )
    return FeatureTable(feature_names=names, rows=out_rows)


def stage_train(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    table = load_feature_table(cfg)
    feature_sets = (cfg.feature_set,) if cfg.feature_set else ("language", "network", "all")
    reports = []
    for family in cfg.models:
        for fs in feature_sets:
            data = table.to_labeled_dataset(fs, cfg.network_features)
            spec = ModelSpec(family=family, seed=cfg.seed)
            reports.append(cross_validate(spec, data, k=cfg.cv_folds, seed=cfg.seed, feature_set=fs))
    path = out / "cv_reports.json"
    write_json(path, {"reports": [r.as_dict() for r in reports]}, cfg)
    return [path]


def stage_importance(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    table = load_feature_table(cfg)
    feature_set = cfg.importance_feature_set
    mode = "all" if feature_set == "network" else cfg.network_features
    data = table.to_labeled_dataset(feature_set, mode)
    data.validate_pairs()
    n_folds = max(2, round(1.0 / cfg.holdout_fraction))
    folds = pair_folds(data.pair_ids, n_folds, cfg.seed)
    holdout_rows = folds[0]
    train_rows = sorted(set(range(len(data))) - set(holdout_rows))
    spec = ModelSpec(family="random_forest", seed=cfg.seed)
    model = train(spec, data.subset(train_rows))
    holdout = data.subset(holdout_rows)
    report = permutation_importance(
        model, holdout.X, holdout.y, data.feature_names,
        repeats=cfg.importance_repeats, seed=cfg.seed,
    )
    path = out / "importance.csv"
    write_csv(path, ("feature", "importance", "share"), report.as_rows(), config_hash(cfg))
    return [path]


def stage_did(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    corpus = load_ingested(cfg)
    pairs = load_pairs(cfg)
    variant = cfg.variant
    results = []
    for name in CENTRALITY_NAMES:
        panel = build_panel(pairs, corpus, name, variant, cfg.delta_rules())
        results.append(did_estimate(panel, clustered=cfg.clustered_se))
    csv_path = out / f"did_{variant}.csv"
    first = results[0].as_dict()
    header = tuple(first.keys())
    write_csv(csv_path, header, [tuple(r.as_dict()[c] for c in header) for r in results],
              config_hash(cfg))
    txt_path = out / f"did_{variant}.txt"
    txt_path.write_text(format_did_table({variant: results}), encoding="utf-8")
    return [csv_path, txt_path]


def format_did_table(results_by_variant: dict[str, list]) -> str:
    """Plain-text effect table: one centrality per row, one variant per column."""
    variants = [v for v in VARIANTS if v in results_by_variant]
    width = 28
    lines = []
    header = "centrality".ljust(16) + "".join(v.ljust(width) for v in variants)
    lines.append(header)
    lines.append("-" * len(header))
    by_centrality: dict[str, dict[str, object]] = {}
    n_obs: dict[str, int] = {}
    for variant, results in results_by_variant.items():
        for r in results:
            by_centrality.setdefault(r.centrality_name, {})[variant] = r
            n_obs[variant] = n_obs.get(variant, 0) + r.n_obs
    for name in CENTRALITY_NAMES:
        if name not in by_centrality:
            continue
        cells = []
        for variant in variants:
            r = by_centrality[name].get(variant)
            if r is None:
                cells.append("".ljust(width))
            else:
                cells.append(f"{r.did_effect:.3f}{r.stars()} ({r.se[3]:.3f})".ljust(width))
        lines.append(name.ljust(16) + "".join(cells))
    lines.append("-" * len(header))
    obs_cells = "".join(str(n_obs.get(v, "")).ljust(width) for v in variants)
    lines.append("observations".ljust(16) + obs_cells)
    return "\n".join(lines) + "\n"


def stage_report(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    table = load_feature_table(cfg)

    means: dict[str, dict[str, float]] = {}
    for name in table.feature_names:
        groups = {0: [], 1: []}
        for row in table.rows:
            value = row.values[name]
            if not math.isnan(value):
                groups[row.label].append(value)
        entry = {}
        for label, key in ((0, "non_persuasive"), (1, "persuasive")):
            vals = np.array(groups[label]) if groups[label] else np.array([0.0])
            entry[f"{key}_mean"] = float(vals.mean())
            entry[f"{key}_sd"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        means[name] = entry

    cv_payload = read_json(_require(Path(cfg.output_dir) / "cv_reports.json", "train"))
    _check_hash(cv_payload.get("config_hash", ""), cfg, "cv_reports.json", "train")
    cv_reports = cv_payload["reports"]

    did_tables = {}
    for variant in VARIANTS:
        path = Path(cfg.output_dir) / f"did_{variant}.csv"
        if path.is_file():
            cfg_hash, header, rows = read_csv(path)
            _check_hash(cfg_hash, cfg, path.name, "did")
            did_tables[variant] = [dict(zip(header, r)) for r in rows]
    if not did_tables:
        raise DataError("missing upstream artifact did_<variant>.csv; run 'did' first")

    payload = {"feature_means": means, "cv_reports": cv_reports, "did": did_tables}
    json_path = out / "report.json"
    write_json(json_path, payload, cfg)

    txt = [_report_means_text(table.feature_names, means), _report_auc_text(cv_reports)]
    txt.append(_report_did_text(did_tables))
    txt_path = out / "report.txt"
    txt_path.write_text("\n".join(txt), encoding="utf-8")
    return [json_path, txt_path]


def _report_means_text(feature_names, means) -> str:
    lines = ["Feature means by group: mean (sd)", ""]
    lines.append(f"{'feature':24}{'non-persuasive':>26}{'persuasive':>26}")
    for name in feature_names:
        m = means[name]
        non = f"{m['non_persuasive_mean']:.3f} ({m['non_persuasive_sd']:.3f})"
        per = f"{m['persuasive_mean']:.3f} ({m['persuasive_sd']:.3f})"
        lines.append(f"{name:24}{non:>26}{per:>26}")
    lines.append("")
    return "\n".join(lines)


def _report_auc_text(cv_reports: list[dict]) -> str:
    lines = ["Cross-validated AUC by model family and feature set", ""]
    feature_sets = ("language", "network", "all")
    lines.append(f"{'family':24}" + "".join(f"{fs:>14}" for fs in feature_sets))
    by_family: dict[str, dict[str, float]] = {}
    for r in cv_reports:
        by_family.setdefault(r["family"], {})[r["feature_set"]] = r["mean"]
    for family in FAMILIES:
        if family not in by_family:
            continue
        cells = "".join(
            f"{by_family[family].get(fs, float('nan')):>14.3f}" for fs in feature_sets
        )
        lines.append(f"{family:24}{cells}")
    lines.append("")
    return "\n".join(lines)


def _report_did_text(did_tables: dict[str, list[dict]]) -> str:
    lines = ["Recognition effect on centrality (interaction coefficient, SE)", ""]
    variants = [v for v in VARIANTS if v in did_tables]
    width = 28
    lines.append("centrality".ljust(16) + "".join(v.ljust(width) for v in variants))
    rows_by_centrality: dict[str, dict[str, dict]] = {}
    n_obs: dict[str, int] = {}
    for variant, rows in did_tables.items():
        for r in rows:
            rows_by_centrality.setdefault(r["centrality"], {})[variant] = r
            n_obs[variant] = n_obs.get(variant, 0) + int(r["n_obs"])
    for name in CENTRALITY_NAMES:
        if name not in rows_by_centrality:
            continue
        cells = []
        for variant in variants:
            r = rows_by_centrality[name].get(variant)
            if r is None:
                cells.append("".ljust(width))
            else:
                cell = f"{float(r['beta_T_x_G']):.3f}{r['stars']} ({float(r['se_T_x_G']):.3f})"
                cells.append(cell.ljust(width))
        lines.append(name.ljust(16) + "".join(cells))
    lines.append("observations".ljust(16) + "".join(str(n_obs[v]).ljust(width) for v in variants))
    lines.append("")
    return "\n".join(lines)


def run_stage(name: str, cfg: RunConfig) -> list[Path]:
    stage_fns = {
        "synth": stage_synth,
        "ingest": stage_ingest,
        "stats": stage_stats,
        "pairs": stage_pairs,
        "features": stage_features,
        "train": stage_train,
        "importance": stage_importance,
        "did": stage_did,
        "report": stage_report,
    }
    if name not in stage_fns:
        raise ConfigError(f"unknown stage {name!r}; expected one of {STAGES}")
    return stage_fns[name](cfg)
