"""Stage orchestration for one audiobook run.

Output layout under ``out/<story_id>/``:

    audiobook.wav      assembled audiobook (RIFF PCM, 24 kHz, mono, 16-bit)
    manifest.json      complete provenance record (written even on failure)
    script.json        script lines plus fallback counters
    personas/          persona store (one folder per speaker)
    segments/          per-sentence WAV segments
    request_log.jsonl  hashed backend requests (fixedness audit trail)
    events.jsonl       run event log

Stages are cached by content fingerprints: rerunning with unchanged
inputs performs zero backend calls and leaves output bytes untouched.
A lock file gives each run exclusive ownership of its directory.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

from .audio import write_wav
from .config import Backends, EngineConfig
from .model import (
    AudiobookManifest,
    PersonaRef,
    ScriptLine,
    SegmentRef,
    SpeakerPersona,
    Story,
)
from .personas import PersonaStore, build_personas
from .script import ScriptCounters, build_script
from .synthesis import assemble, synthesize_script
from .util import fingerprint, sha256_bytes, sha256_text

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class RunLock:
    """Exclusive ownership of an output directory for the run's duration."""

    def __init__(self, out_dir: Path) -> None:
        self.path = out_dir / ".lock"

    def __enter__(self) -> "RunLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise PipelineError(
                "lock", f"output directory is locked by another run: {self.path}"
            ) from None
        with os.fdopen(fd, "w") as handle:
            handle.write(str(os.getpid()))
        return self

    def __exit__(self, *exc: object) -> None:
        self.path.unlink(missing_ok=True)


class EventLog:
    def __init__(self, path: Path) -> None:
        self.path = path
        self._seq = 0
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("", encoding="utf-8")

    def emit(self, event: str, **fields: object) -> None:
        self._seq += 1
        record = {"seq": self._seq, "ts": time.time(), "event": event, **fields}
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record) + "\n")


@dataclass
class RunResult:
    out_dir: Path
    manifest: AudiobookManifest
    cache_hits: list[str]


def _stage_marker(path: Path) -> dict | None:
    if not path.is_file():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None


def _write_stage_marker(path: Path, stage_fingerprint: str) -> None:
    path.write_text(json.dumps({"fingerprint": stage_fingerprint}) + "\n", encoding="utf-8")


def run_personas_stage(
    story: Story,
    config: EngineConfig,
    backends: Backends,
    out_dir: Path,
    events: EventLog,
    force: bool = False,
    request_log: list[dict] | None = None,
) -> tuple[list[SpeakerPersona], bool]:
    """Build or reload the persona store; returns (personas, cache_hit)."""
    store = PersonaStore(out_dir / "personas")
    marker_path = out_dir / "personas" / ".stage.json"
    stage_fp = fingerprint(
        {
            "story_sha256": sha256_text(story.raw_text),
            "config": config.fingerprint(),
            "backends": {
                "llm": str(backends.llm.identity),
                "image": str(backends.image.identity),
                "tts": str(backends.tts.identity),
            },
        }
    )
    marker = _stage_marker(marker_path)
    if not force and marker and marker.get("fingerprint") == stage_fp:
        try:
            personas = store.load()
            events.emit("personas.cache_hit", count=len(personas))
            log.info("personas: cache hit (%d personas)", len(personas))
            return personas, True
        except Exception as exc:
            log.warning("personas cache invalid (%s); regenerating", exc)
    events.emit("personas.start")
    try:
        personas = build_personas(
            story,
            backends.llm,
            backends.image,
            backends.tts,
            seed=config.seed,
            max_attempts=config.personas.max_attempts,
            max_speakers=config.personas.max_speakers,
            image_size=config.image.size,
            extraction_temperature=config.llm.temperature_creative,
            request_log=request_log,
        )
    except Exception as exc:
        raise PipelineError("personas", str(exc)) from exc
    store.save(personas)
    _write_stage_marker(marker_path, stage_fp)
    events.emit("personas.done", count=len(personas))
    return personas, False


def run_script_stage(
    story: Story,
    personas: list[SpeakerPersona],
    config: EngineConfig,
    backends: Backends,
    out_dir: Path,
    events: EventLog,
    force: bool = False,
) -> tuple[list[ScriptLine], ScriptCounters, bool]:
    """Build or reload script.json; returns (lines, counters, cache_hit)."""
    script_path = out_dir / "script.json"
    stage_fp = fingerprint(
        {
            "story_sha256": sha256_text(story.raw_text),
            "config": config.fingerprint(),
            "llm": str(backends.llm.identity),
            "personas": sorted(sha256_bytes(p.face_image + p.voice_sample) for p in personas),
        }
    )
    existing = _stage_marker(script_path)
    if not force and existing and existing.get("fingerprint") == stage_fp:
        lines = [ScriptLine(**line) for line in existing["lines"]]
        counters = ScriptCounters(**existing["counters"], windowed=existing.get("windowed", False))
        events.emit("script.cache_hit", lines=len(lines))
        log.info("script: cache hit (%d lines)", len(lines))
        return lines, counters, True
    events.emit("script.start", sentences=len(story.sentences))
    try:
        lines, counters = build_script(
            story,
            personas,
            backends.llm,
            attribution_temperature=config.llm.temperature_attribution,
            instruction_temperature=config.llm.temperature_creative,
            window=config.script.window_sentences,
            budget_chars=config.llm.context_budget_chars,
            max_workers=config.llm.inflight,
        )
    except Exception as exc:
        raise PipelineError("script", str(exc)) from exc
    payload = {
        "fingerprint": stage_fp,
        "lines": [vars(line) for line in lines],
        "counters": counters.as_dict(),
        "windowed": counters.windowed,
    }
    script_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    events.emit("script.done", lines=len(lines), **counters.as_dict())
    return lines, counters, False


def run_generate(
    story: Story,
    config: EngineConfig,
    backends: Backends,
    out_dir: Path,
    force: bool = False,
    stage: str = "full",
) -> RunResult:
    """Run the pipeline end to end (or up to ``stage``) for one story.

    A manifest is written before returning even when a stage fails, with
    its ``status`` naming the failed stage.
    """
    if stage not in ("personas", "script", "full"):
        raise PipelineError("config", f"unknown stage {stage!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    events = EventLog(out_dir / "events.jsonl")
    cache_hits: list[str] = []
    request_log: list[dict] = []
    manifest: AudiobookManifest | None = None

    with RunLock(out_dir):
        events.emit("run.start", story_id=story.id, stage=stage)
        (out_dir / "story.json").write_text(
            json.dumps(story.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        try:
            personas, hit = run_personas_stage(
                story, config, backends, out_dir, events, force, request_log
            )
            if hit:
                cache_hits.append("personas")
            if stage == "personas":
                manifest = _partial_manifest(story, config, backends, personas, status="personas")
                _write_manifest(out_dir, manifest)
                return RunResult(out_dir, manifest, cache_hits)

            lines, counters, hit = run_script_stage(
                story, personas, config, backends, out_dir, events, force
            )
            if hit:
                cache_hits.append("script")
            if stage == "script":
                manifest = _partial_manifest(
                    story, config, backends, personas, lines=lines, counters=counters, status="script"
                )
                _write_manifest(out_dir, manifest)
                return RunResult(out_dir, manifest, cache_hits)

            manifest, hit = _run_audio_stage(
                story, config, backends, out_dir, events, personas, lines, counters,
                request_log, force,
            )
            if hit:
                cache_hits.append("audio")
            events.emit("run.done", total_duration_s=manifest.total_duration_s)
            return RunResult(out_dir, manifest, cache_hits)
        except Exception as exc:
            stage_name = exc.stage if isinstance(exc, PipelineError) else "unknown"
            events.emit("run.failed", stage=stage_name, error=str(exc))
            failed = _partial_manifest(story, config, backends, status=f"failed:{stage_name}")
            _write_manifest(out_dir, failed)
            raise


def _run_audio_stage(
    story: Story,
    config: EngineConfig,
    backends: Backends,
    out_dir: Path,
    events: EventLog,
    personas: list[SpeakerPersona],
    lines: list[ScriptLine],
    counters: ScriptCounters,
    request_log: list[dict],
    force: bool,
) -> tuple[AudiobookManifest, bool]:
    manifest_path = out_dir / "manifest.json"
    audiobook_path = out_dir / "audiobook.wav"
    config_fp = config.fingerprint()

    if not force and manifest_path.is_file() and audiobook_path.is_file():
        try:
            existing = AudiobookManifest.from_dict(
                json.loads(manifest_path.read_text(encoding="utf-8"))
            )
            if existing.status == "complete" and existing.config_fingerprint == config_fp:
                events.emit("audio.cache_hit")
                log.info("audio: cache hit")
                return existing, True
        except Exception as exc:
            log.warning("manifest cache invalid (%s); regenerating", exc)

    events.emit("audio.start", lines=len(lines))
    sentence_texts = {s.index: s.text for s in story.sentences}
    try:
        segments, tts_log = synthesize_script(
            lines,
            personas,
            sentence_texts,
            backends.tts,
            cap=backends.tts_cap,
            max_workers=config.tts.inflight,
        )
        request_log.extend(tts_log)
        result = assemble(
            segments,
            lines,
            gap_ms=config.synthesis.gap_ms,
            speaker_change_gap_ms=config.synthesis.speaker_change_gap_ms,
            fade_ms=config.synthesis.fade_ms,
        )
    except Exception as exc:
        raise PipelineError("synthesis", str(exc)) from exc

    segments_dir = out_dir / "segments"
    segments_dir.mkdir(exist_ok=True)
    segment_refs = []
    for segment, start in zip(segments, result.segment_starts):
        seg_path = segments_dir / f"{segment.sentence_index:05d}.wav"
        write_wav(seg_path, segment.pcm)
        segment_refs.append(
            SegmentRef(
                sentence_index=segment.sentence_index,
                path=str(seg_path.relative_to(out_dir)),
                duration_s=segment.duration_s,
                start_sample=start,
            )
        )
    write_wav(audiobook_path, result.pcm)
    with (out_dir / "request_log.jsonl").open("w", encoding="utf-8") as handle:
        for entry in request_log:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")

    manifest = AudiobookManifest(
        story_id=story.id,
        personas=tuple(_persona_ref(p, out_dir) for p in personas),
        lines=tuple(lines),
        segments=tuple(segment_refs),
        total_duration_s=result.total_duration_s,
        config_fingerprint=config_fp,
        backend_ids=backends.identities(),
        status="complete",
        counters=counters.as_dict(),
        parameters={
            "gap_ms": config.synthesis.gap_ms,
            "speaker_change_gap_ms": config.synthesis.speaker_change_gap_ms,
            "fade_ms": config.synthesis.fade_ms,
            "windowed_context": counters.windowed,
            "seed": config.seed,
        },
    )
    _write_manifest(out_dir, manifest)
    events.emit("audio.done", segments=len(segment_refs))
    return manifest, False


def _persona_ref(persona: SpeakerPersona, out_dir: Path) -> PersonaRef:
    base = Path("personas") / persona.speaker_id
    return PersonaRef(
        speaker_id=persona.speaker_id,
        name_or_role=persona.name_or_role,
        is_narrator=persona.is_narrator,
        persona_path=str(base / "persona.json"),
        face_path=str(base / f"face.{persona.face_format}"),
        voice_path=str(base / "voice.wav"),
        face_sha256=sha256_bytes(persona.face_image),
        voice_sha256=sha256_bytes(persona.voice_sample),
        caption_sha256=sha256_text(persona.face_caption),
    )


def _partial_manifest(
    story: Story,
    config: EngineConfig,
    backends: Backends,
    personas: list[SpeakerPersona] | None = None,
    lines: list[ScriptLine] | None = None,
    counters: ScriptCounters | None = None,
    status: str = "partial",
) -> AudiobookManifest:
    return AudiobookManifest(
        story_id=story.id,
        personas=tuple(_persona_ref(p, Path(".")) for p in (personas or [])),
        lines=tuple(lines or []),
        segments=(),
        total_duration_s=0.0,
        config_fingerprint=config.fingerprint(),
        backend_ids=backends.identities(),
        status=status,
        counters=counters.as_dict() if counters else {},
    )


def _write_manifest(out_dir: Path, manifest: AudiobookManifest) -> None:
    path = out_dir / "manifest.json"
    path.write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
