from __future__ import annotations

import json
from pathlib import Path

import pytest

from readlevel.dataset import Corpus, CorpusEntry
from readlevel.embeddings import LexiconEmbeddings
from readlevel.pipeline import (
    AbortedByAuthError,
    CorpusHashMismatch,
    IncompleteRun,
    RecordStore,
    ResumeMismatch,
    StorageError,
    load_manifest,
    make_manifest,
    read_score_rows,
    run,
    score_run,
)
from readlevel.providers import AuthError, GenerationRecord, ProviderConfig, TransportError
from readlevel.synth import synthetic_corpus
from readlevel.textcore import TARGET_LEVELS, analyze


def small_corpus(n=4, seed=1) -> Corpus:
    return synthetic_corpus(n, seed=seed)


def sorted_store_bytes(run_dir: Path) -> bytes:
    lines = (run_dir / "records.jsonl").read_bytes().splitlines(keepends=False)
    key = lambda line: (
        json.loads(line)["source_id"],
        json.loads(line)["target_level"],
        json.loads(line)["step"],
    )
    return b"\n".join(sorted(lines, key=key))


class FlakyProvider:
    """Mock-like provider that fails with a scripted error pattern."""

    def __init__(self, fail_on: set[int] | None = None, error=TransportError("down")):
        self.calls = 0
        self.fail_on = fail_on or set()
        self.error = error

    def preflight(self):
        pass

    def generate(self, payload):
        self.calls += 1
        if self.calls in self.fail_on:
            raise self.error
        return f"Rewritten text for level {payload['target_level']} here now.", {"model": "flaky"}


class GarbageOnStepTwoProvider:
    """First call per (source, target) is fine; second returns junk."""

    def __init__(self):
        self.seen: set[tuple[int, str]] = set()

    def preflight(self):
        pass

    def generate(self, payload):
        key = (payload["target_level"], payload["document"])
        step2 = any(k[0] == payload["target_level"] for k in self.seen)
        self.seen.add(key)
        if step2:
            return "zz qqq xxxx wwww zz qqq xxxx wwww", {"model": "junk"}
        return f"A decent first pass for level {payload['target_level']} of this text.", {"model": "junk"}


# --- copy mode --------------------------------------------------------------------


def test_copy_mode_writes_eight_records_per_source(tmp_path):
    corpus = small_corpus(10)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="c1")
    result = run(manifest, corpus, tmp_path)
    records = RecordStore(result.run_dir / "records.jsonl").load()
    assert len(records) == 80
    assert all(not r.fallback for r in records)
    assert all(r.output_text == r.input_text for r in records)


def test_copy_rerun_is_idempotent(tmp_path):
    corpus = small_corpus(3)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="c2")
    first = run(manifest, corpus, tmp_path)
    again = run(manifest, corpus, tmp_path)
    assert first.written == 24
    assert again.written == 0 and again.skipped == 24
    assert len(RecordStore(first.run_dir / "records.jsonl").load()) == 24


# --- mock mode -------------------------------------------------------------------


def test_mock_run_lands_near_targets(tmp_path):
    corpus = small_corpus(6, seed=5)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "one-step", run_id="m1")
    result = run(manifest, corpus, tmp_path)
    records = RecordStore(result.run_dir / "records.jsonl").load()
    assert len(records) == 48
    close = sum(abs(analyze(r.output_text).fres - r.target_level) <= 4 for r in records)
    assert close / len(records) >= 0.9


def test_exactly_once_keys(tmp_path):
    corpus = small_corpus(5)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "two-step", run_id="m2")
    run(manifest, corpus, tmp_path)
    run(manifest, corpus, tmp_path)  # resume over a complete store
    records = RecordStore(tmp_path / "m2" / "records.jsonl").load()
    keys = [(r.source_id, r.target_level, r.step) for r in records]
    assert len(keys) == len(set(keys)) == 80


def test_corpus_hash_mismatch_refused(tmp_path):
    corpus = small_corpus(3)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="m3")
    run(manifest, corpus, tmp_path)
    other = small_corpus(3, seed=99)
    stale = make_manifest(other, ProviderConfig(kind="mock"), "copy", run_id="m3")
    with pytest.raises(CorpusHashMismatch):
        run(stale, other, tmp_path)


def test_mode_change_on_resume_refused(tmp_path):
    corpus = small_corpus(2)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="m4")
    run(manifest, corpus, tmp_path)
    changed = make_manifest(corpus, ProviderConfig(kind="mock"), "one-step", run_id="m4")
    with pytest.raises(ResumeMismatch):
        run(changed, corpus, tmp_path)


def test_auth_error_aborts_run(tmp_path):
    corpus = small_corpus(3)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "one-step", run_id="m5")
    provider = FlakyProvider(fail_on={2}, error=AuthError("rejected"))
    with pytest.raises(AbortedByAuthError):
        run(manifest, corpus, tmp_path, provider=provider)
    # partial store remains resumable
    records = RecordStore(tmp_path / "m5" / "records.jsonl").load()
    assert len(records) == 1
    result = run(manifest, corpus, tmp_path, provider=FlakyProvider())
    assert result.written == 23


def test_transient_provider_failure_falls_back_to_source(tmp_path):
    corpus = small_corpus(2)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "one-step", run_id="m6")
    provider = FlakyProvider(fail_on={3, 7})
    run(manifest, corpus, tmp_path, provider=provider)
    records = RecordStore(tmp_path / "m6" / "records.jsonl").load()
    fallbacks = [r for r in records if r.fallback]
    assert len(fallbacks) == 2
    for rec in fallbacks:
        assert rec.output_text == rec.input_text
        assert rec.fallback_reason.startswith("provider-error")


# --- two-step ----------------------------------------------------------------------


def test_two_step_records_and_final_step(tmp_path):
    corpus = small_corpus(3, seed=8)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "two-step", run_id="t1")
    run(manifest, corpus, tmp_path)
    records = RecordStore(tmp_path / "t1" / "records.jsonl").load()
    step1 = {(r.source_id, r.target_level): r for r in records if r.step == 1}
    step2 = {(r.source_id, r.target_level): r for r in records if r.step == 2}
    assert set(step1) == set(step2)
    for key, rec2 in step2.items():
        assert rec2.input_text == step1[key].output_text


def test_two_step_tightens_or_holds(tmp_path):
    corpus = small_corpus(4, seed=12)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "two-step", run_id="t2")
    run(manifest, corpus, tmp_path)
    records = RecordStore(tmp_path / "t2" / "records.jsonl").load()
    by_key = {}
    for r in records:
        by_key.setdefault((r.source_id, r.target_level), {})[r.step] = r
    improved = 0
    for (sid, level), steps in by_key.items():
        e1 = abs(analyze(steps[1].output_text).fres - level)
        e2 = abs(analyze(steps[2].output_text).fres - level)
        improved += e2 <= e1 + 1e-9
    assert improved / len(by_key) >= 0.95


def test_step2_garbage_falls_back_to_step1_output(tmp_path):
    corpus = small_corpus(2, seed=2)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "two-step", run_id="t3")
    run(manifest, corpus, tmp_path, provider=GarbageOnStepTwoProvider())
    records = RecordStore(tmp_path / "t3" / "records.jsonl").load()
    step1 = {(r.source_id, r.target_level): r for r in records if r.step == 1}
    for rec in records:
        if rec.step == 2:
            assert rec.fallback is True
            assert rec.fallback_reason == "garbage-detected"
            assert rec.output_text == step1[(rec.source_id, rec.target_level)].output_text


def test_step1_garbage_falls_back_to_source_then_step2_runs(tmp_path):
    class GarbageFirstProvider:
        def __init__(self):
            self.calls = 0

        def preflight(self):
            pass

        def generate(self, payload):
            self.calls += 1
            if self.calls == 1:
                return "qqq zzz xxxx qqq zzz xxxx qqq", {"model": "junk"}
            return "A sensible rewrite of the document text for this level.", {"model": "junk"}

    corpus = Corpus.from_entries([CorpusEntry("s0", small_corpus(1, seed=4).entries[0].text)])
    manifest = make_manifest(
        corpus, ProviderConfig(kind="mock"), "two-step", targets=(5,), run_id="t4"
    )
    run(manifest, corpus, tmp_path, provider=GarbageFirstProvider())
    records = RecordStore(tmp_path / "t4" / "records.jsonl").load()
    rec1 = next(r for r in records if r.step == 1)
    rec2 = next(r for r in records if r.step == 2)
    assert rec1.fallback is True and rec1.output_text == corpus.entries[0].text
    assert rec2.input_text == corpus.entries[0].text
    assert rec2.fallback is False


# --- crash recovery ------------------------------------------------------------------


def test_interrupted_then_resumed_equals_clean_run(tmp_path):
    corpus = small_corpus(4, seed=21)
    provider_cfg = ProviderConfig(kind="mock", seed=3)

    clean = make_manifest(corpus, provider_cfg, "one-step", run_id="clean")
    run(clean, corpus, tmp_path)

    resumed = make_manifest(corpus, provider_cfg, "one-step", run_id="resumed")
    with pytest.raises(KeyboardInterrupt):
        run(resumed, corpus, tmp_path, provider=_InterruptingMock(after=13))
    # simulate a torn final line from the kill
    store_path = tmp_path / "resumed" / "records.jsonl"
    with open(store_path, "ab") as fh:
        fh.write(b'{"source_id": "synth-0002", "target_level": 5')
    run(resumed, corpus, tmp_path)

    assert sorted_store_bytes(tmp_path / "clean") == sorted_store_bytes(tmp_path / "resumed")


class _InterruptingMock:
    """Real mock outputs, but dies after N generations."""

    def __init__(self, after: int):
        from readlevel.providers import MockProvider

        self.inner = MockProvider(ProviderConfig(kind="mock", seed=3))
        self.after = after

    def preflight(self):
        pass

    def generate(self, payload):
        if self.after <= 0:
            raise KeyboardInterrupt("simulated kill")
        self.after -= 1
        return self.inner.generate(payload)


def test_store_repair_drops_torn_tail(tmp_path):
    path = tmp_path / "records.jsonl"
    store = RecordStore(path)
    store.append(GenerationRecord("s", 5, 1, "in", "out", False))
    with open(path, "ab") as fh:
        fh.write(b'{"half a record')
    store.repair()
    assert len(store.load()) == 1
    store.append(GenerationRecord("s", 20, 1, "in", "out", False))
    assert len(store.load()) == 2


def test_store_rejects_corrupt_interior_line(tmp_path):
    path = tmp_path / "records.jsonl"
    path.write_text('not json\n{"also": "incomplete record"}\n', "utf-8")
    with pytest.raises(StorageError):
        RecordStore(path).load()


def test_store_rejects_duplicate_keys(tmp_path):
    path = tmp_path / "records.jsonl"
    store = RecordStore(path)
    store.append(GenerationRecord("s", 5, 1, "a", "b", False))
    store.append(GenerationRecord("s", 5, 1, "a", "c", False))
    with pytest.raises(StorageError):
        store.existing_outputs()


def test_parallel_run_writes_same_set_as_serial(tmp_path):
    corpus = small_corpus(6, seed=30)
    cfg = ProviderConfig(kind="mock")
    serial = make_manifest(corpus, cfg, "copy", run_id="ser")
    parallel = make_manifest(corpus, cfg, "copy", run_id="par")
    run(serial, corpus, tmp_path)
    run(parallel, corpus, tmp_path, workers=4)
    assert sorted_store_bytes(tmp_path / "ser") == sorted_store_bytes(tmp_path / "par")


# --- scoring --------------------------------------------------------------------------


def test_score_run_copy_laws(tmp_path):
    corpus = small_corpus(5, seed=17)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="s1")
    run(manifest, corpus, tmp_path)
    score_run(tmp_path / "s1")
    examples = read_score_rows(tmp_path / "s1", "individual")
    assert len(examples) == 5
    for row in examples:
        assert row["spearman_rho"] == 0.0
        assert row["accuracy"] == 0.125
    population = read_score_rows(tmp_path / "s1", "population")
    for row in population:
        assert row["pcc"] == pytest.approx(1.0, abs=1e-9)
        assert row["slope_a"] == pytest.approx(1.0, abs=1e-9)
        assert row["intercept_b"] == pytest.approx(0.0, abs=1e-7)


def test_score_run_incomplete_store(tmp_path):
    corpus = small_corpus(2)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="s2")
    run(manifest, corpus, tmp_path)
    store_path = tmp_path / "s2" / "records.jsonl"
    lines = store_path.read_text("utf-8").splitlines()
    store_path.write_text("\n".join(lines[:-1]) + "\n", "utf-8")
    with pytest.raises(IncompleteRun) as err:
        score_run(tmp_path / "s2")
    assert len(err.value.missing) == 1


def test_score_run_is_deterministic(tmp_path):
    corpus = small_corpus(3, seed=23)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "one-step", run_id="s3")
    run(manifest, corpus, tmp_path)
    score_run(tmp_path / "s3", embedder=LexiconEmbeddings(dim=16))
    first = {
        name: (tmp_path / "s3" / "scores" / f"{name}.jsonl").read_bytes()
        for name in ("individual", "pairs", "population")
    }
    score_run(tmp_path / "s3", embedder=LexiconEmbeddings(dim=16))
    for name, blob in first.items():
        assert (tmp_path / "s3" / "scores" / f"{name}.jsonl").read_bytes() == blob


def test_score_run_pairs_have_semantic_scores_only_with_embedder(tmp_path):
    corpus = small_corpus(2, seed=29)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "copy", run_id="s4")
    run(manifest, corpus, tmp_path)
    score_run(tmp_path / "s4")
    rows = read_score_rows(tmp_path / "s4", "pairs")
    assert all(row["sem_f1"] is None for row in rows)
    score_run(tmp_path / "s4", embedder=LexiconEmbeddings(dim=8))
    rows = read_score_rows(tmp_path / "s4", "pairs")
    assert all(row["sem_f1"] == pytest.approx(1.0) for row in rows)  # copy run
    assert all(row["self_wer"] == 0.0 for row in rows)


def test_manifest_round_trip(tmp_path):
    corpus = small_corpus(2)
    manifest = make_manifest(corpus, ProviderConfig(kind="mock"), "two-step", run_id="s5")
    run(manifest, corpus, tmp_path)
    loaded = load_manifest(tmp_path / "s5")
    assert loaded == manifest
