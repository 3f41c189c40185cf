"""File-level pipeline stages with manifests and restartability.

Every stage reads declared inputs from the output directory (or config
paths), writes its artifacts there and records a manifest under
``manifests/<stage>.json`` holding the config digest, input digests and an
output digest for every file it wrote. Rerunning a stage whose manifest
still matches is a no-op unless ``force`` is set.
"""

from __future__ import annotations

import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .corpus import AnnotatedQuery, AnnotationError, annotate_query, load_qa_dataset
from .config import ConfigError, PipelineConfig
from .curation import curate
from .evaluation import METRICS, evaluate, output_stats
from .export import IntegrityError, build_dpo_pairs, rl_reward, to_sft_example
from .jsonio import file_digest, read_jsonl, write_json, write_jsonl
from .orchestrator import Trajectory, sample_candidates
from .sampler import sample_with_report

logger = logging.getLogger(__name__)

# artifact name -> stage that produces it
PRODUCERS = {
    "annotated.jsonl": "annotate",
    "sampled.jsonl": "sample",
    "trajectories.jsonl": "synthesize",
    "curated.jsonl": "curate",
}


class DependencyError(RuntimeError):
    """An upstream artifact is missing."""


class BackendFailure(RuntimeError):
    """A stage could not proceed because an external backend failed."""


@dataclass
class StageResult:
    stage: str
    outputs: list[Path]
    skipped: bool = False
    summary: dict | None = None


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        producer = PRODUCERS.get(path.name)
        hint = f"; run {producer}" if producer else ""
        raise DependencyError(f"missing {what}{hint} (expected {path})")
    return path


def _manifest_path(out: Path, stage: str) -> Path:
    return out / "manifests" / f"{stage}.json"


def _signature(cfg: PipelineConfig, inputs: dict[str, Path], params: dict) -> dict:
    return {
        "config_digest": cfg.digest(),
        "inputs": {role: {"name": p.name, "sha256": file_digest(p)} for role, p in sorted(inputs.items())},
        "params": params,
    }


def _up_to_date(out: Path, stage: str, signature: dict) -> bool:
    path = _manifest_path(out, stage)
    if not path.exists():
        return False
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if {k: manifest.get(k) for k in signature} != signature:
        return False
    return all((out / rel).exists() and file_digest(out / rel) == digest
               for rel, digest in manifest.get("outputs", {}).items())


def run_stage(stage: str, cfg: PipelineConfig, out: Path, inputs: dict[str, Path], params: dict,
              body: Callable[[], tuple[list[Path], dict | None]], force: bool = False) -> StageResult:
    out = Path(out)
    signature = _signature(cfg, inputs, params)
    if not force and _up_to_date(out, stage, signature):
        logger.info("%s: up to date, skipping", stage)
        return StageResult(stage, [], skipped=True)
    outputs, summary = body()
    manifest = {
        "stage": stage,
        **signature,
        "outputs": {p.relative_to(out).as_posix(): file_digest(p) for p in outputs},
        "versions": {"deepsearch_data": __version__, "python": platform.python_version()},
    }
    if summary is not None:
        manifest["summary"] = summary
    write_json(_manifest_path(out, stage), manifest)
    return StageResult(stage, outputs, summary=summary)


def load_trajectories(path: Path) -> list[Trajectory]:
    return [Trajectory.from_dict(d) for d in read_jsonl(path)]


def group_by_question(ts: Sequence[Trajectory]) -> dict[str, list[Trajectory]]:
    groups: dict[str, list[Trajectory]] = {}
    for t in ts:
        groups.setdefault(t.query.id, []).append(t)
    return groups


def _gen_params(cfg: PipelineConfig) -> dict:
    lp = cfg.loop
    return {"temperature": lp.temperature, "top_p": lp.top_p, "top_k": lp.top_k,
            "max_tokens": lp.max_tokens, "seed": lp.seed}


# --- stages ---------------------------------------------------------------------

def annotate(cfg: PipelineConfig, backends, out: Path, force: bool = False) -> StageResult:
    if not cfg.paths.corpus:
        raise ConfigError("paths.corpus", "annotate needs a corpus path")
    corpus = Path(cfg.paths.corpus)
    if not corpus.exists():
        raise ConfigError("paths.corpus", f"{corpus} does not exist")

    def body():
        records = load_qa_dataset(corpus, cfg.paths.corpus_format)
        gen = _gen_params(cfg)

        def one(rec):
            try:
                return annotate_query(rec, backends.annotator, cfg.label_set, **gen)
            except AnnotationError as exc:
                return exc

        results = [one(r) for r in records]
        failures = [r for r in results if isinstance(r, AnnotationError)]
        hard = [f for f in failures if f.code == "llm_failure"]
        if hard:
            raise BackendFailure(f"{len(hard)} annotation calls failed, first: {hard[0]}")
        ok = [r for r in results if not isinstance(r, AnnotationError)]
        paths = [write_jsonl(out / "annotated.jsonl", (q.to_dict() for q in ok)),
                 write_jsonl(out / "annotation_errors.jsonl",
                             ({"id": f.record_id, "code": f.code, "message": str(f)} for f in failures))]
        return paths, {"annotated": len(ok), "errors": len(failures)}

    return run_stage("annotate", cfg, out, {"corpus": corpus}, {"format": cfg.paths.corpus_format}, body, force)


def sample(cfg: PipelineConfig, out: Path, n: int | None = None, force: bool = False) -> StageResult:
    src = _require(out / "annotated.jsonl", "annotated queries")
    n = n or cfg.sample_size

    def body():
        dataset = [AnnotatedQuery.from_dict(d) for d in read_jsonl(src)]
        selected, report = sample_with_report(dataset, n)
        paths = [write_jsonl(out / "sampled.jsonl", (q.to_dict() for q in selected)),
                 write_json(out / "sampling_report.json", report.to_dict())]
        return paths, {"selected": len(selected)}

    return run_stage("sample", cfg, out, {"annotated": src}, {"n": n}, body, force)


def synthesize(cfg: PipelineConfig, backends, out: Path, force: bool = False) -> StageResult:
    src = _require(out / "sampled.jsonl", "sampled queries")

    def body():
        queries = [AnnotatedQuery.from_dict(d) for d in read_jsonl(src)]

        def one(q):
            return sample_candidates(q, cfg.loop, backends.reasoner, backends.searcher, backends.summarizer)

        with ThreadPoolExecutor(cfg.concurrency) as pool:
            batches = list(pool.map(one, queries))
        trajs = [t for batch in batches for t in batch]
        errors = sum(t.stop_reason == "backend_error" for t in trajs)
        if errors:
            if getattr(backends, "mode", None) == "replay" or errors == len(trajs):
                first = next(t.error for t in trajs if t.stop_reason == "backend_error")
                raise BackendFailure(f"{errors} of {len(trajs)} trajectories hit backend errors, first: {first}")
            logger.warning("%d of %d trajectories ended with backend_error", errors, len(trajs))
        stop_counts: dict[str, int] = {}
        for t in trajs:
            stop_counts[t.stop_reason] = stop_counts.get(t.stop_reason, 0) + 1
        path = write_jsonl(out / "trajectories.jsonl", (t.to_dict() for t in trajs))
        return [path], {"queries": len(queries), "trajectories": len(trajs),
                        "stop_reasons": dict(sorted(stop_counts.items()))}

    return run_stage("synthesize", cfg, out, {"sampled": src}, {}, body, force)


def curate_stage(cfg: PipelineConfig, out: Path, force: bool = False) -> StageResult:
    src = _require(out / "trajectories.jsonl", "trajectories")

    def body():
        result = curate(group_by_question(load_trajectories(src)), cfg.curation)
        paths = [
            write_jsonl(out / "curated.jsonl", (c.to_dict() for c in result.curated)),
            write_jsonl(out / "audit.jsonl", (e.to_dict() for e in result.audit.entries)),
            write_jsonl(out / "runners_up.jsonl",
                        ({"question_id": c.question_id, "trajectory_refs": [t.id for t in c.runners_up]}
                         for c in result.curated)),
        ]
        return paths, {"curated": len(result.curated), "rejections": len(result.audit)}

    return run_stage("curate", cfg, out, {"trajectories": src}, {}, body, force)


def export_sft(cfg: PipelineConfig, out: Path, force: bool = False) -> StageResult:
    curated = _require(out / "curated.jsonl", "curated set")
    trajs = _require(out / "trajectories.jsonl", "trajectories")

    def body():
        by_id = {t.id: t for t in load_trajectories(trajs)}
        rows, skipped = [], 0
        for item in read_jsonl(curated):
            t = by_id.get(item["trajectory_ref"])
            if t is None:
                raise DependencyError(f"curated entry references unknown trajectory {item['trajectory_ref']}")
            try:
                rows.append(to_sft_example(t).to_dict())
            except IntegrityError as exc:
                logger.error("refusing to export %s: %s", t.id, exc)
                skipped += 1
        return [write_jsonl(out / "sft.jsonl", rows)], {"examples": len(rows), "skipped": skipped}

    return run_stage("export-sft", cfg, out, {"curated": curated, "trajectories": trajs}, {}, body, force)


def export_dpo(cfg: PipelineConfig, out: Path, strong: Path, weak: Path, force: bool = False) -> StageResult:
    strong = _require(Path(strong), "strong-model trajectories")
    weak = _require(Path(weak), "weak-model trajectories")

    def body():
        pairs = build_dpo_pairs(group_by_question(load_trajectories(strong)),
                                group_by_question(load_trajectories(weak)), cfg.curation)
        return [write_jsonl(out / "dpo.jsonl", (p.to_dict() for p in pairs))], {"pairs": len(pairs)}

    return run_stage("export-dpo", cfg, out, {"strong": strong, "weak": weak}, {}, body, force)


def reward(cfg: PipelineConfig, out: Path, source: Path | None = None, force: bool = False) -> StageResult:
    src = _require(Path(source) if source else out / "trajectories.jsonl", "trajectories")

    def body():
        rows = [rl_reward(t, t.query.record.gold_answers).to_dict(t.id) for t in load_trajectories(src)]
        return [write_jsonl(out / "rewards.jsonl", rows)], {"scored": len(rows)}

    return run_stage("reward", cfg, out, {"trajectories": src}, {}, body, force)


def eval_stage(cfg: PipelineConfig, out: Path, backends=None, metrics: Sequence[str] = ("f1", "stages", "stats"),
               source: Path | None = None, force: bool = False) -> StageResult:
    src = _require(Path(source) if source else out / "trajectories.jsonl", "trajectories")
    metrics = tuple(metrics)
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ConfigError("metrics", f"unknown metrics {sorted(unknown)}")
    if "judge" in metrics and backends is None:
        raise ConfigError("metrics", "the judge metric needs a backend")

    def body():
        report = evaluate(load_trajectories(src), backends.judge if backends else None, metrics)
        paths = [write_jsonl(out / "eval_report.jsonl", report.rows())]
        table = out / "eval_table.txt"
        table.write_text(report.table(), encoding="utf-8")
        paths.append(table)
        return paths, report.summary()

    return run_stage("eval", cfg, out, {"trajectories": src}, {"metrics": list(metrics)}, body, force)


def stats(cfg: PipelineConfig, out: Path, source: Path | None = None, force: bool = False) -> StageResult:
    src = _require(Path(source) if source else out / "trajectories.jsonl", "trajectories")

    def body():
        ts = load_trajectories(src)
        if not ts:
            raise DependencyError("no trajectories to summarize")
        s = output_stats(ts)
        result = {"n": len(ts), "mean_alternatively": s.mean_reflections,
                  "mean_search": s.mean_searches, "mean_output_length": s.mean_length}
        return [write_json(out / "stats.json", result)], result

    return run_stage("stats", cfg, out, {"trajectories": src}, {}, body, force)
