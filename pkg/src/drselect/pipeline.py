"""Batch orchestration: config loading, staged execution, provenance.

A run is described by one JSON config (paths relative to the config file).
Stages communicate through files under the output directory, so each CLI
subcommand can run alone or as part of the full sequence:

    ingest -> retrieve -> perturb -> select -> truth -> evaluate -> report

Everything is deterministic given the config: per-item generators are keyed
by (seed, identity), thread fan-out never affects output order, and floats
are serialized with repr. Rerunning any stage over unchanged inputs rewrites
byte-identical files. Every CSV/TSV artifact carries a header comment with
the config digest and seed; run and qrels files stay comment-free for
external tools, and the manifest records their hashes instead.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from drselect import retrieval, selectors
from drselect.corpusio import (
    DatasetBundle,
    EffectivenessTable,
    EmbeddingMatrix,
    ModelRegistry,
    Qrels,
    RankedList,
    read_effectiveness,
    read_embeddings,
    read_id_list,
    read_qrels,
    read_query_texts,
    read_run,
    registry_from_obj,
    write_effectiveness,
    write_run,
)
from drselect.errors import ConfigError, DataValidationError
from drselect.ireval import mean_ndcg
from drselect.metaeval import evaluate_method, read_report_csv, render_report_csv, write_report
from drselect.perturb import PerturbConfig, perturb_file, perturbed_id
from drselect.seeding import derive_rng
from drselect.selectors import MethodScoreTable, method_label

log = logging.getLogger("drselect")

KNOWN_METHODS = ("indomain", "qsim", "fd_corpus", "fd_extracted", "entropy", "qalter")

TRUTH_METRIC = "ndcg@10"


# --- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingPaths:
    """Resolved embedding file locations for one (dataset, model)."""

    queries: Path
    docs: Path
    perturbed: Mapping[str, Path]  # keyed by the config's p string, e.g. "0.1"

    def perturbed_path(self, p: float) -> Path:
        for key, path in self.perturbed.items():
            if float(key) == p:
                return path
        raise ConfigError(f"no perturbed embeddings for p={p}")


@dataclass(frozen=True)
class DatasetPaths:
    """One dataset's file locations, resolved against the config directory."""

    name: str
    queries: Path
    qrels: Path
    doc_ids: Path
    embeddings: Mapping[str, EmbeddingPaths]


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    out_dir: Path
    registry: ModelRegistry
    source: DatasetPaths
    targets: tuple[DatasetPaths, ...]
    retrieval_depth: int
    source_sample_docs: int
    source_sample_queries: int
    methods: Mapping[str, Mapping[str, object]]
    digest: str

    def target_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.targets)

    def dataset(self, name: str) -> DatasetPaths:
        for ds in (self.source, *self.targets):
            if ds.name == name:
                return ds
        raise ConfigError(f"unknown dataset {name!r}")

    def provenance(self) -> str:
        return f"config={self.digest[:12]} seed={self.seed}"


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return obj[key]


def _as_int(value, what: str) -> int:
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be an integer, got {value!r}") from None
    return out


def _as_float(value, what: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {value!r}") from None
    return out


def _dataset_paths(obj, base: Path, where: str, registry: ModelRegistry) -> DatasetPaths:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: dataset entry must be an object")
    name = _require(obj, "name", where)
    emb = _require(obj, "embeddings", where)
    if not isinstance(emb, dict):
        raise ConfigError(f"{where}: embeddings must be an object keyed by model id")
    resolved: dict[str, EmbeddingPaths] = {}
    for model_id in registry.model_ids():
        if model_id not in emb:
            raise ConfigError(f"{where}: no embeddings entry for model {model_id!r}")
        entry = emb[model_id]
        if not isinstance(entry, dict) or "queries" not in entry or "docs" not in entry:
            raise ConfigError(
                f"{where}: embeddings for {model_id!r} need 'queries' and 'docs'"
            )
        perturbed = entry.get("perturbed", {})
        if not isinstance(perturbed, dict):
            raise ConfigError(f"{where}: perturbed entry for {model_id!r} must be an object")
        resolved[model_id] = EmbeddingPaths(
            queries=base / entry["queries"],
            docs=base / entry["docs"],
            perturbed={str(k): base / v for k, v in perturbed.items()},
        )
    return DatasetPaths(
        name=str(name),
        queries=base / _require(obj, "queries", where),
        qrels=base / _require(obj, "qrels", where),
        doc_ids=base / _require(obj, "doc_ids", where),
        embeddings=resolved,
    )


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a run config; any structural problem is ConfigError."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    base = path.resolve().parent
    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()

    seed = _as_int(_require(raw, "seed", "config"), "config.seed")
    try:
        registry = registry_from_obj(_require(raw, "registry", "config"), "config.registry")
    except DataValidationError as exc:
        raise ConfigError(str(exc)) from None

    source = _dataset_paths(_require(raw, "source", "config"), base, "config.source", registry)
    targets_raw = _require(raw, "targets", "config")
    if not isinstance(targets_raw, list) or not targets_raw:
        raise ConfigError("config.targets must be a non-empty list")
    targets = tuple(
        _dataset_paths(t, base, f"config.targets[{i}]", registry)
        for i, t in enumerate(targets_raw)
    )
    names = [source.name] + [t.name for t in targets]
    if len(set(names)) != len(names):
        raise ConfigError("dataset names must be unique across source and targets")

    retrieval_cfg = raw.get("retrieval", {})
    depth = _as_int(retrieval_cfg.get("depth", 1000), "retrieval.depth")
    if depth < 1:
        raise ConfigError("retrieval depth must be positive")

    sample = raw.get("source_sample", {})
    sample_docs = _as_int(sample.get("docs", 10000), "source_sample.docs")
    sample_queries = _as_int(sample.get("queries", 1000), "source_sample.queries")
    if sample_docs < 2 or sample_queries < 1:
        raise ConfigError("source_sample sizes too small")

    methods = raw.get("methods", {m: {} for m in KNOWN_METHODS})
    if not isinstance(methods, dict) or not methods:
        raise ConfigError("config.methods must be a non-empty object")
    for name, params in methods.items():
        if name not in KNOWN_METHODS:
            raise ConfigError(f"unknown method {name!r} in config.methods")
        if not isinstance(params, dict):
            raise ConfigError(f"config.methods.{name} must be an object")
    if "entropy" in methods:
        cutoffs = [
            _as_int(c, "entropy cutoff") for c in methods["entropy"].get("cutoffs", [10, 1000])
        ]
        if not cutoffs or any(c < 1 for c in cutoffs):
            raise ConfigError("entropy cutoffs must be positive")
        if max(cutoffs) > depth:
            raise ConfigError("entropy cutoff exceeds retrieval depth")
        if _as_int(methods["entropy"].get("negatives", 100), "entropy negatives") < 1:
            raise ConfigError("entropy negatives must be positive")
    if "qalter" in methods:
        if _as_int(methods["qalter"].get("trials", 3), "qalter trials") < 1:
            raise ConfigError("qalter trials must be positive")
        if _as_int(methods["qalter"].get("k", 10), "qalter k") < 1:
            raise ConfigError("qalter k must be positive")
        p_values = methods["qalter"].get("p_values", [0.1, 0.2, 0.3])
        if not p_values:
            raise ConfigError("qalter p_values must be non-empty")
        for p in p_values:
            if not 0.0 <= _as_float(p, "qalter p value") <= 1.0:
                raise ConfigError(f"qalter p value {p!r} outside [0, 1]")
    if "fd_extracted" in methods:
        if _as_int(methods["fd_extracted"].get("k", 100), "fd_extracted k") < 1:
            raise ConfigError("fd_extracted k must be positive")

    out_dir = base / str(raw.get("out_dir", "out"))
    return PipelineConfig(
        seed=seed,
        out_dir=out_dir,
        registry=registry,
        source=source,
        targets=targets,
        retrieval_depth=depth,
        source_sample_docs=sample_docs,
        source_sample_queries=sample_queries,
        methods={k: dict(v) for k, v in methods.items()},
        digest=digest,
    )


# --- parallel helpers -------------------------------------------------------


def thread_count() -> int:
    """DRSELECT_THREADS; 0 or unset means one worker per CPU."""
    raw = os.environ.get("DRSELECT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DRSELECT_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("DRSELECT_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _run_tasks(fn: Callable, tasks: Sequence, context: Callable[[object], str]):
    """Run pure per-task functions, serially or fanned out; order-stable.

    Failures are re-raised with the task context (method/model/dataset)
    prepended so partial pipeline failures are attributable.
    """

    def guarded(task):
        try:
            return fn(task)
        except Exception as exc:
            exc.args = (f"[{context(task)}] {exc}",) + exc.args[1:]
            raise

    workers = min(thread_count(), max(len(tasks), 1))
    if workers <= 1 or len(tasks) <= 1:
        return [guarded(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, tasks))


# --- workspace --------------------------------------------------------------


class Workspace:
    """Lazily loads and caches bundles, embeddings, and runs for one config."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self._bundles: dict[str, DatasetBundle] = {}
        self._matrices: dict[tuple, EmbeddingMatrix] = {}
        self._runs: dict[tuple[str, str], dict[str, RankedList]] = {}
        self._samples: dict[str, tuple[str, ...]] = {}

    def preload(self) -> None:
        """Load every configured input eagerly (and serially).

        Stages that fan work out to threads call this first so the worker
        tasks only read from the caches.
        """
        cfg = self.cfg
        datasets = (cfg.source.name, *cfg.target_names())
        for dataset in datasets:
            self.bundle(dataset)
        for model_id in cfg.registry.model_ids():
            for dataset in datasets:
                self.embeddings(model_id, dataset, "query")
                self.embeddings(model_id, dataset, "doc")
        if "qalter" in cfg.methods:
            for model_id in cfg.registry.model_ids():
                for dataset in cfg.target_names():
                    for p in cfg.methods["qalter"].get("p_values", [0.1, 0.2, 0.3]):
                        self.perturbed_embeddings(model_id, dataset, float(p))
        self.source_query_sample()
        self.source_doc_sample()

    # -- raw inputs

    def bundle(self, dataset: str) -> DatasetBundle:
        if dataset not in self._bundles:
            ds = self.cfg.dataset(dataset)
            queries = read_query_texts(ds.queries)
            doc_ids = read_id_list(ds.doc_ids)
            qrels = read_qrels(ds.qrels)
            self._bundles[dataset] = DatasetBundle(
                name=dataset, queries=queries, doc_ids=doc_ids, qrels=qrels
            )
        return self._bundles[dataset]

    # -- embeddings

    def embeddings(self, model_id: str, dataset: str, role: str) -> EmbeddingMatrix:
        key = (model_id, dataset, role)
        if key not in self._matrices:
            paths = self.cfg.dataset(dataset).embeddings[model_id]
            path = paths.queries if role == "query" else paths.docs
            matrix = read_embeddings(path, model_id=model_id, role=role)
            self._validate_ids(matrix, dataset, role)
            self._matrices[key] = matrix
        return self._matrices[key]

    def perturbed_embeddings(self, model_id: str, dataset: str, p: float) -> EmbeddingMatrix:
        key = (model_id, dataset, "perturbed", repr(p))
        if key not in self._matrices:
            path = self.cfg.dataset(dataset).embeddings[model_id].perturbed_path(p)
            matrix = read_embeddings(path, model_id=model_id, role="query")
            trials = int(self.cfg.methods.get("qalter", {}).get("trials", 3))
            expected = {
                perturbed_id(qid, t)
                for qid in self.bundle(dataset).queries
                for t in range(1, trials + 1)
            }
            if set(matrix.ids) != expected:
                raise DataValidationError(
                    f"perturbed embedding ids for {model_id}/{dataset}/p={p} do not "
                    f"cover every query and trial"
                )
            self._matrices[key] = matrix
        return self._matrices[key]

    def _validate_ids(self, matrix: EmbeddingMatrix, dataset: str, role: str):
        bundle = self.bundle(dataset)
        expected = set(bundle.queries) if role == "query" else set(bundle.doc_ids)
        if set(matrix.ids) != expected:
            raise DataValidationError(
                f"{matrix.model_id}/{dataset}/{role} embedding ids do not match "
                f"the dataset bundle"
            )

    # -- runs

    def run_path(self, model_id: str, dataset: str) -> Path:
        return self.cfg.out_dir / "runs" / f"{model_id}__{dataset}.run"

    def runs(self, model_id: str, dataset: str) -> dict[str, RankedList]:
        key = (model_id, dataset)
        if key not in self._runs:
            path = self.run_path(model_id, dataset)
            if not path.exists():
                raise DataValidationError(
                    f"missing run file {path}; run the retrieve stage first"
                )
            self._runs[key] = read_run(path, self.cfg.registry.similarity(model_id))
        return self._runs[key]

    def store_runs(self, model_id: str, dataset: str, runs: dict[str, RankedList]):
        self._runs[(model_id, dataset)] = runs

    # -- seeded source-side samples (shared by qsim / fd methods)

    def source_query_sample(self) -> tuple[str, ...]:
        if "queries" not in self._samples:
            ids = tuple(self.bundle(self.cfg.source.name).queries)
            self._samples["queries"] = _seeded_sample(
                ids, self.cfg.source_sample_queries, self.cfg.seed, "queries"
            )
        return self._samples["queries"]

    def source_doc_sample(self) -> tuple[str, ...]:
        if "docs" not in self._samples:
            ids = self.bundle(self.cfg.source.name).doc_ids
            self._samples["docs"] = _seeded_sample(
                ids, self.cfg.source_sample_docs, self.cfg.seed, "docs"
            )
        return self._samples["docs"]


def _seeded_sample(ids: Sequence[str], size: int, seed: int, what: str) -> tuple[str, ...]:
    """Uniform sample without replacement keeping input order; all when small."""
    n = min(size, len(ids))
    if n == len(ids):
        return tuple(ids)
    rng = derive_rng(seed, "source-sample", what)
    picks = np.sort(rng.choice(len(ids), size=n, replace=False))
    return tuple(ids[i] for i in picks)


# --- provenance -------------------------------------------------------------


def write_manifest(cfg: PipelineConfig) -> None:
    """Hash every artifact under out_dir into manifest.json (no timestamps)."""
    artifacts = {}
    if cfg.out_dir.exists():
        for path in sorted(cfg.out_dir.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                digest = hashlib.sha256(path.read_bytes()).hexdigest()
                artifacts[str(path.relative_to(cfg.out_dir))] = digest
    manifest = {
        "config_digest": cfg.digest,
        "seed": cfg.seed,
        "artifacts": artifacts,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "manifest.json").write_bytes(
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")
    )


# --- stages -----------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig, ws: Workspace | None = None) -> Workspace:
    """Load and validate every input the config references."""
    ws = ws or Workspace(cfg)
    ws.preload()
    log.info(
        "ingest: validated %d datasets x %d models",
        1 + len(cfg.targets),
        len(cfg.registry),
    )
    write_manifest(cfg)
    return ws


def stage_retrieve(
    cfg: PipelineConfig,
    ws: Workspace,
    models: Sequence[str] | None = None,
    datasets: Sequence[str] | None = None,
) -> None:
    """Write one run file per (model, dataset) at the configured depth.

    ``models``/``datasets`` restrict the work for ad-hoc CLI invocations;
    the full pipeline always retrieves everything.
    """
    ws.preload()
    all_models = cfg.registry.model_ids()
    all_datasets = (cfg.source.name, *cfg.target_names())
    for model_id in models or ():
        if model_id not in all_models:
            raise ConfigError(f"unknown model {model_id!r}")
    for dataset in datasets or ():
        if dataset not in all_datasets:
            raise ConfigError(f"unknown dataset {dataset!r}")
    (cfg.out_dir / "runs").mkdir(parents=True, exist_ok=True)
    tasks = [
        (model_id, dataset)
        for model_id in (models or all_models)
        for dataset in (datasets or all_datasets)
    ]

    def work(task):
        model_id, dataset = task
        runs = retrieval.retrieve_all(
            ws.embeddings(model_id, dataset, "query"),
            ws.embeddings(model_id, dataset, "doc"),
            cfg.registry.similarity(model_id),
            cfg.retrieval_depth,
        )
        return task, runs

    results = _run_tasks(
        work, tasks, lambda t: f"stage=retrieve model={t[0]} dataset={t[1]}"
    )
    for (model_id, dataset), runs in results:
        ws.store_runs(model_id, dataset, runs)
        write_run(runs, ws.run_path(model_id, dataset), tag="drselect")
    log.info("retrieve: wrote %d run files", len(results))
    write_manifest(cfg)


def stage_perturb(cfg: PipelineConfig, ws: Workspace) -> None:
    """Write masked-query TSVs for every target and mask proportion."""
    if "qalter" not in cfg.methods:
        log.info("perturb: qalter not configured, nothing to do")
        return
    params = cfg.methods["qalter"]
    trials = int(params.get("trials", 3))
    out = cfg.out_dir / "perturbed"
    out.mkdir(parents=True, exist_ok=True)
    for dataset in cfg.target_names():
        ds = cfg.dataset(dataset)
        for p in params.get("p_values", [0.1, 0.2, 0.3]):
            pcfg = PerturbConfig(p=float(p), seed=cfg.seed, trials=trials)
            perturb_file(
                ds.queries,
                out / f"{dataset}__p{p}.tsv",
                pcfg,
                header_comment=cfg.provenance(),
            )
    log.info("perturb: wrote masked queries for %d targets", len(cfg.targets))
    write_manifest(cfg)


def _source_effectiveness(cfg: PipelineConfig, ws: Workspace) -> EffectivenessTable:
    """Measured source-split effectiveness, the input to the indomain method."""
    values = {}
    source = cfg.source.name
    qrels = ws.bundle(source).qrels
    for model_id in cfg.registry.model_ids():
        result = mean_ndcg(ws.runs(model_id, source), qrels, k=10)
        values[(model_id, source)] = result.value
    return EffectivenessTable(TRUTH_METRIC, values)


def _score_table_path(cfg: PipelineConfig, label: str, dataset: str) -> Path:
    return cfg.out_dir / "scores" / f"{label}__{dataset}.csv"


def _method_tasks(cfg: PipelineConfig):
    """Flatten configured methods into (label, method, params) variants."""
    variants = []
    for method in KNOWN_METHODS:
        if method not in cfg.methods:
            continue
        params = cfg.methods[method]
        if method == "entropy":
            for cutoff in params.get("cutoffs", [10, 1000]):
                variants.append(("entropy", {"cutoff": int(cutoff),
                                             "negatives": int(params.get("negatives", 100))}))
        elif method == "qalter":
            for p in params.get("p_values", [0.1, 0.2, 0.3]):
                variants.append(("qalter", {"p": float(p),
                                            "trials": int(params.get("trials", 3)),
                                            "k": int(params.get("k", 10))}))
        elif method == "fd_extracted":
            variants.append(("fd_extracted", {"k": int(params.get("k", 100))}))
        else:
            variants.append((method, {}))
    return variants


def stage_select(cfg: PipelineConfig, ws: Workspace) -> None:
    """Score every configured method variant for every model and target."""
    ws.preload()
    (cfg.out_dir / "scores").mkdir(parents=True, exist_ok=True)
    source = cfg.source.name
    variants = _method_tasks(cfg)

    # Pull every run file the configured methods will touch into the cache
    # now, so the threaded tasks below stay read-only.
    if any(m in ("entropy", "qalter") for m, _ in variants):
        for model_id in cfg.registry.model_ids():
            for dataset in cfg.target_names():
                ws.runs(model_id, dataset)

    source_eff: EffectivenessTable | None = None
    if any(m == "indomain" for m, _ in variants):
        source_eff = _source_effectiveness(cfg, ws)
        write_effectiveness(
            source_eff,
            cfg.out_dir / "scores" / "source_effectiveness.csv",
            header_comment=cfg.provenance(),
        )

    tasks = [
        (method, params, dataset, model_id)
        for method, params in variants
        for dataset in cfg.target_names()
        for model_id in cfg.registry.model_ids()
    ]

    def work(task):
        method, params, dataset, model_id = task
        kind = cfg.registry.similarity(model_id)
        if method == "indomain":
            score = source_eff.value(model_id, source)
        elif method == "qsim":
            src_q = ws.embeddings(model_id, source, "query").subset(
                ws.source_query_sample()
            )
            tgt_q = ws.embeddings(model_id, dataset, "query")
            score, _ = selectors.query_similarity_score(src_q, tgt_q)
        elif method == "fd_corpus":
            src_d = ws.embeddings(model_id, source, "doc").subset(ws.source_doc_sample())
            score = selectors.corpus_fd_score(src_d, ws.embeddings(model_id, dataset, "doc"))
        elif method == "fd_extracted":
            src_d = ws.embeddings(model_id, source, "doc").subset(ws.source_doc_sample())
            score, _ = selectors.extracted_fd_score(
                ws.embeddings(model_id, dataset, "query"),
                src_d,
                ws.embeddings(model_id, dataset, "doc"),
                kind,
                k=params["k"],
            )
        elif method == "entropy":
            runs = ws.runs(model_id, dataset)
            docs = ws.embeddings(model_id, dataset, "doc")
            queries = ws.embeddings(model_id, dataset, "query")
            corpus_ids = ws.bundle(dataset).doc_ids
            mins = {}
            for qid, run in runs.items():
                negative_ids = retrieval.sample_negatives(
                    qid, run.doc_ids(), corpus_ids, params["negatives"], cfg.seed
                )
                neg_scores = retrieval.score_ids(
                    queries.vector(qid), docs, negative_ids, kind
                )
                mins[qid] = float(neg_scores.min())
            score, _ = selectors.binary_entropy_score(runs, mins, params["cutoff"])
        elif method == "qalter":
            runs = ws.runs(model_id, dataset)
            score, _ = selectors.query_alteration_score(
                runs,
                ws.embeddings(model_id, dataset, "query"),
                ws.perturbed_embeddings(model_id, dataset, params["p"]),
                ws.embeddings(model_id, dataset, "doc"),
                kind,
                k=params["k"],
            )
        else:  # unreachable given config validation
            raise ConfigError(f"unknown method {method!r}")
        return task, float(score)

    results = _run_tasks(
        work,
        tasks,
        lambda t: f"method={method_label(t[0], t[1])} dataset={t[2]} model={t[3]}",
    )

    scores: dict[tuple[str, str], dict[str, float]] = {}
    variant_meta: dict[str, tuple[str, dict]] = {}
    for (method, params, dataset, model_id), score in results:
        label = method_label(method, params)
        variant_meta[label] = (method, params)
        scores.setdefault((label, dataset), {})[model_id] = score

    for (label, dataset), per_model in sorted(scores.items()):
        method, params = variant_meta[label]
        table_params = dict(params)
        if method == "indomain":
            table_params["source_dataset"] = source
        if method in ("qsim",):
            table_params["source_queries"] = len(ws.source_query_sample())
        if method in ("fd_corpus", "fd_extracted"):
            table_params["source_docs"] = len(ws.source_doc_sample())
        if method in ("entropy", "qalter"):
            table_params["seed"] = cfg.seed
        table = MethodScoreTable(
            method=method,
            dataset=dataset,
            scores=per_model,
            orientation=selectors.METHOD_ORIENTATIONS[method],
            params=table_params,
        )
        selectors.write_score_table(
            table, _score_table_path(cfg, label, dataset), header_comment=cfg.provenance()
        )
    log.info("select: wrote %d score tables", len(scores))
    write_manifest(cfg)


def stage_truth(cfg: PipelineConfig, ws: Workspace, metric: str = TRUTH_METRIC) -> None:
    """Measure ground-truth effectiveness on every target dataset."""
    if metric != TRUTH_METRIC:
        raise ConfigError(f"unsupported truth metric {metric!r}; only {TRUTH_METRIC}")
    (cfg.out_dir / "truth").mkdir(parents=True, exist_ok=True)
    values = {}
    for dataset in cfg.target_names():
        qrels = ws.bundle(dataset).qrels
        for model_id in cfg.registry.model_ids():
            result = mean_ndcg(ws.runs(model_id, dataset), qrels, k=10)
            for qid in result.skipped_unjudged:
                log.warning("truth: %s/%s query %s missing from qrels", dataset, model_id, qid)
            values[(model_id, dataset)] = result.value
    table = EffectivenessTable(TRUTH_METRIC, values)
    write_effectiveness(
        table, cfg.out_dir / "truth" / "effectiveness.csv", header_comment=cfg.provenance()
    )
    log.info("truth: measured %d cells", len(values))
    write_manifest(cfg)


def stage_evaluate(cfg: PipelineConfig) -> None:
    """Meta-evaluate every scored method against the measured truth."""
    truth_path = cfg.out_dir / "truth" / "effectiveness.csv"
    if not truth_path.exists():
        raise DataValidationError(f"missing {truth_path}; run the truth stage first")
    effectiveness = read_effectiveness(truth_path)
    datasets = list(cfg.target_names())

    labels = [method_label(m, p) for m, p in _method_tasks(cfg)]
    evaluations = []
    for label in labels:
        tables = {}
        for dataset in datasets:
            path = _score_table_path(cfg, label, dataset)
            if not path.exists():
                raise DataValidationError(f"missing {path}; run the select stage first")
            tables[dataset] = selectors.read_score_table(path)
        evaluations.append(
            evaluate_method(label, tables, effectiveness, cfg.registry, datasets)
        )

    (cfg.out_dir / "eval").mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "eval" / "rows.csv").write_bytes(
        render_report_csv(evaluations, header_comment=cfg.provenance()).encode("utf-8")
    )
    log.info("evaluate: %d methods x %d datasets", len(labels), len(datasets))
    write_manifest(cfg)


def stage_report(cfg: PipelineConfig) -> None:
    """Render the markdown + CSV report from the evaluation rows."""
    rows_path = cfg.out_dir / "eval" / "rows.csv"
    if not rows_path.exists():
        raise DataValidationError(f"missing {rows_path}; run the evaluate stage first")
    rows = read_report_csv(rows_path)

    from drselect.metaeval import AVERAGE_LABEL, EvaluationRow, MethodEvaluation

    by_method: dict[str, list[EvaluationRow]] = {}
    averages: dict[str, EvaluationRow] = {}
    for row in rows:
        if row.dataset == AVERAGE_LABEL:
            averages[row.method] = row
        else:
            by_method.setdefault(row.method, []).append(row)
    evaluations = []
    for method, method_rows in by_method.items():
        if method not in averages:
            raise DataValidationError(f"report rows missing average for {method!r}")
        avg = averages[method]
        evaluations.append(
            MethodEvaluation(
                method=method,
                rows=tuple(method_rows),
                avg_tau=avg.tau,
                avg_delta_e=avg.delta_e,
                avg_pct_delta_e=avg.pct_delta_e,
            )
        )
    datasets = list(cfg.target_names())
    (cfg.out_dir / "report").mkdir(parents=True, exist_ok=True)
    write_report(
        evaluations,
        datasets,
        cfg.out_dir / "report" / "report.csv",
        cfg.out_dir / "report" / "report.md",
        header_comment=cfg.provenance(),
    )
    log.info("report: rendered %d methods", len(evaluations))
    write_manifest(cfg)


def run_pipeline(config_path: str | Path) -> PipelineConfig:
    """All stages in order; returns the parsed config for inspection."""
    cfg = load_config(config_path)
    ws = Workspace(cfg)
    stage_ingest(cfg, ws)
    stage_retrieve(cfg, ws)
    stage_perturb(cfg, ws)
    stage_select(cfg, ws)
    stage_truth(cfg, ws)
    stage_evaluate(cfg)
    stage_report(cfg)
    return cfg
