"""Run configuration: one JSON file declares backends, seeds, and knobs.

Every value has a default; a minimal mock config is just
``{"backends": {"llm": {"kind": "mock", "fixtures": "fixtures.json"}}}``.
The resolved configuration is hashed into the manifest fingerprint, so a
config change is always visible in provenance.

Defaults (JSON paths):
  seed                                  0
  backends.llm.kind                     mock
  backends.llm.fixtures                 null (path or "builtin:demo")
  backends.llm.base_url                 null
  backends.llm.model                    default
  backends.llm.api_key_env              ENGINE_LLM_API_KEY
  backends.llm.temperature_attribution  0.0
  backends.llm.temperature_creative     0.7
  backends.llm.context_budget_chars     24000
  backends.llm.inflight                 4
  backends.image.kind                   mock
  backends.image.non_face_seeds         []
  backends.image.size                   [512, 512]
  backends.image.api_key_env            ENGINE_IMAGE_API_KEY
  backends.tts.kind                     mock
  backends.tts.api_key_env              ENGINE_TTS_API_KEY
  backends.judge.kind                   none (mock | http | none)
  backends.judge.api_key_env            ENGINE_JUDGE_API_KEY
  personas.max_attempts                 4
  personas.max_speakers                 12
  script.window_sentences               20
  synthesis.gap_ms                      250
  synthesis.speaker_change_gap_ms       500
  synthesis.fade_ms                     5
  eval.window_s                         10.0
  eval.frame_hop_s                      0.01
  eval.f_min_hz                         50.0
  eval.f_max_hz                         600.0
  eval.judge_chunk_s                    60.0
  eval.questions                        null (metric -> question override)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .backends.base import BackendError, InflightCap
from .util import fingerprint


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LlmConfig:
    kind: str = "mock"
    fixtures: str | None = None
    base_url: str | None = None
    model: str = "default"
    api_key_env: str = "ENGINE_LLM_API_KEY"
    temperature_attribution: float = 0.0
    temperature_creative: float = 0.7
    context_budget_chars: int = 24_000
    inflight: int = 4


@dataclass(frozen=True)
class ImageConfig:
    kind: str = "mock"
    non_face_seeds: tuple[int, ...] = ()
    base_url: str | None = None
    api_key_env: str = "ENGINE_IMAGE_API_KEY"
    size: tuple[int, int] = (512, 512)
    inflight: int = 4


@dataclass(frozen=True)
class TtsConfig:
    kind: str = "mock"
    base_url: str | None = None
    api_key_env: str = "ENGINE_TTS_API_KEY"
    inflight: int = 4


@dataclass(frozen=True)
class JudgeConfig:
    kind: str = "none"
    fixtures: str | None = None
    base_url: str | None = None
    model: str = "default"
    api_key_env: str = "ENGINE_JUDGE_API_KEY"


@dataclass(frozen=True)
class PersonasConfig:
    max_attempts: int = 4
    max_speakers: int = 12


@dataclass(frozen=True)
class ScriptConfig:
    window_sentences: int = 20


@dataclass(frozen=True)
class SynthesisConfig:
    gap_ms: int = 250
    speaker_change_gap_ms: int = 500
    fade_ms: int = 5


@dataclass(frozen=True)
class EvalConfig:
    window_s: float = 10.0
    frame_hop_s: float = 0.01
    f_min_hz: float = 50.0
    f_max_hz: float = 600.0
    judge_chunk_s: float = 60.0
    questions: dict | None = None


@dataclass(frozen=True)
class EngineConfig:
    seed: int = 0
    llm: LlmConfig = field(default_factory=LlmConfig)
    image: ImageConfig = field(default_factory=ImageConfig)
    tts: TtsConfig = field(default_factory=TtsConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    personas: PersonasConfig = field(default_factory=PersonasConfig)
    script: ScriptConfig = field(default_factory=ScriptConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    config_dir: Path = field(default_factory=Path, compare=False)

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "backends": {
                "llm": {
                    "kind": self.llm.kind,
                    "fixtures": self.llm.fixtures,
                    "base_url": self.llm.base_url,
                    "model": self.llm.model,
                    "api_key_env": self.llm.api_key_env,
                    "temperature_attribution": self.llm.temperature_attribution,
                    "temperature_creative": self.llm.temperature_creative,
                    "context_budget_chars": self.llm.context_budget_chars,
                    "inflight": self.llm.inflight,
                },
                "image": {
                    "kind": self.image.kind,
                    "non_face_seeds": list(self.image.non_face_seeds),
                    "base_url": self.image.base_url,
                    "api_key_env": self.image.api_key_env,
                    "size": list(self.image.size),
                    "inflight": self.image.inflight,
                },
                "tts": {
                    "kind": self.tts.kind,
                    "base_url": self.tts.base_url,
                    "api_key_env": self.tts.api_key_env,
                    "inflight": self.tts.inflight,
                },
                "judge": {
                    "kind": self.judge.kind,
                    "fixtures": self.judge.fixtures,
                    "base_url": self.judge.base_url,
                    "model": self.judge.model,
                    "api_key_env": self.judge.api_key_env,
                },
            },
            "personas": {
                "max_attempts": self.personas.max_attempts,
                "max_speakers": self.personas.max_speakers,
            },
            "script": {"window_sentences": self.script.window_sentences},
            "synthesis": {
                "gap_ms": self.synthesis.gap_ms,
                "speaker_change_gap_ms": self.synthesis.speaker_change_gap_ms,
                "fade_ms": self.synthesis.fade_ms,
            },
            "eval": {
                "window_s": self.eval.window_s,
                "frame_hop_s": self.eval.frame_hop_s,
                "f_min_hz": self.eval.f_min_hz,
                "f_max_hz": self.eval.f_max_hz,
                "judge_chunk_s": self.eval.judge_chunk_s,
                "questions": self.eval.questions,
            },
        }

    def fingerprint(self) -> str:
        return fingerprint(self.as_dict())


def _section(data: dict, *path: str) -> dict:
    node = data
    for step in path:
        node = node.get(step, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config section {'.'.join(path)} must be an object")
    return node


def parse_config(data: dict, config_dir: Path | None = None) -> EngineConfig:
    try:
        llm_raw = _section(data, "backends", "llm")
        image_raw = _section(data, "backends", "image")
        tts_raw = _section(data, "backends", "tts")
        judge_raw = _section(data, "backends", "judge")
        personas_raw = _section(data, "personas")
        script_raw = _section(data, "script")
        synthesis_raw = _section(data, "synthesis")
        eval_raw = _section(data, "eval")
        config = EngineConfig(
            seed=int(data.get("seed", 0)),
            llm=LlmConfig(
                kind=llm_raw.get("kind", "mock"),
                fixtures=llm_raw.get("fixtures"),
                base_url=llm_raw.get("base_url"),
                model=llm_raw.get("model", "default"),
                api_key_env=llm_raw.get("api_key_env", "ENGINE_LLM_API_KEY"),
                temperature_attribution=float(llm_raw.get("temperature_attribution", 0.0)),
                temperature_creative=float(llm_raw.get("temperature_creative", 0.7)),
                context_budget_chars=int(llm_raw.get("context_budget_chars", 24_000)),
                inflight=int(llm_raw.get("inflight", 4)),
            ),
            image=ImageConfig(
                kind=image_raw.get("kind", "mock"),
                non_face_seeds=tuple(int(s) for s in image_raw.get("non_face_seeds", ())),
                base_url=image_raw.get("base_url"),
                api_key_env=image_raw.get("api_key_env", "ENGINE_IMAGE_API_KEY"),
                size=tuple(image_raw.get("size", (512, 512))),  # type: ignore[arg-type]
                inflight=int(image_raw.get("inflight", 4)),
            ),
            tts=TtsConfig(
                kind=tts_raw.get("kind", "mock"),
                base_url=tts_raw.get("base_url"),
                api_key_env=tts_raw.get("api_key_env", "ENGINE_TTS_API_KEY"),
                inflight=int(tts_raw.get("inflight", 4)),
            ),
            judge=JudgeConfig(
                kind=judge_raw.get("kind", "none"),
                fixtures=judge_raw.get("fixtures"),
                base_url=judge_raw.get("base_url"),
                model=judge_raw.get("model", "default"),
                api_key_env=judge_raw.get("api_key_env", "ENGINE_JUDGE_API_KEY"),
            ),
            personas=PersonasConfig(
                max_attempts=int(personas_raw.get("max_attempts", 4)),
                max_speakers=int(personas_raw.get("max_speakers", 12)),
            ),
            script=ScriptConfig(window_sentences=int(script_raw.get("window_sentences", 20))),
            synthesis=SynthesisConfig(
                gap_ms=int(synthesis_raw.get("gap_ms", 250)),
                speaker_change_gap_ms=int(synthesis_raw.get("speaker_change_gap_ms", 500)),
                fade_ms=int(synthesis_raw.get("fade_ms", 5)),
            ),
            eval=EvalConfig(
                window_s=float(eval_raw.get("window_s", 10.0)),
                frame_hop_s=float(eval_raw.get("frame_hop_s", 0.01)),
                f_min_hz=float(eval_raw.get("f_min_hz", 50.0)),
                f_max_hz=float(eval_raw.get("f_max_hz", 600.0)),
                judge_chunk_s=float(eval_raw.get("judge_chunk_s", 60.0)),
                questions=eval_raw.get("questions"),
            ),
            config_dir=config_dir or Path.cwd(),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    for name, kind in (("llm", config.llm.kind), ("image", config.image.kind), ("tts", config.tts.kind)):
        if kind not in ("mock", "http"):
            raise ConfigError(f"backends.{name}.kind must be 'mock' or 'http', got {kind!r}")
    if config.judge.kind not in ("mock", "http", "none"):
        raise ConfigError(f"backends.judge.kind must be 'mock', 'http', or 'none'")
    return config


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return parse_config(data, config_dir=path.parent)


def _load_fixtures(spec: str, config_dir: Path) -> dict[str, str]:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        payload = resources.files("castbook.data").joinpath(f"{name}/llm_fixtures.json").read_text("utf-8")
    else:
        fixture_path = Path(spec)
        if not fixture_path.is_absolute():
            fixture_path = config_dir / fixture_path
        try:
            payload = fixture_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read fixtures {fixture_path}: {exc}") from exc
    data = json.loads(payload)
    if not isinstance(data, dict):
        raise ConfigError(f"fixtures {spec} must be a JSON object of key -> response")
    return {str(k): str(v) for k, v in data.items()}


@dataclass
class Backends:
    llm: object
    image: object
    tts: object
    judge: object | None
    llm_cap: InflightCap
    image_cap: InflightCap
    tts_cap: InflightCap

    def identities(self) -> dict[str, str]:
        ids = {
            "llm": str(self.llm.identity),
            "image": str(self.image.identity),
            "tts": str(self.tts.identity),
        }
        if self.judge is not None:
            ids["mllm_judge"] = str(self.judge.identity)
        return ids


def build_backends(config: EngineConfig) -> Backends:
    """Instantiate the configured backend set; validates env for HTTP."""
    from .backends import http as http_backends
    from .backends import mock as mock_backends

    if config.llm.kind == "mock":
        fixtures = _load_fixtures(config.llm.fixtures, config.config_dir) if config.llm.fixtures else {}
        llm = mock_backends.ScriptedLlm(fixtures)
    else:
        if not config.llm.base_url:
            raise ConfigError("backends.llm.base_url is required for kind 'http'")
        try:
            llm = http_backends.HttpLlmBackend(
                config.llm.base_url,
                model=config.llm.model,
                api_key_env=config.llm.api_key_env,
                require_key=True,
            )
        except http_backends.MissingApiKeyError as exc:
            raise ConfigError(str(exc)) from exc

    if config.image.kind == "mock":
        image = mock_backends.ProceduralImageBackend(
            non_face_seeds=frozenset(config.image.non_face_seeds)
        )
    else:
        if not config.image.base_url:
            raise ConfigError("backends.image.base_url is required for kind 'http'")
        image = http_backends.HttpImageBackend(config.image.base_url, api_key_env=config.image.api_key_env)

    if config.tts.kind == "mock":
        tts = mock_backends.SyntheticVoiceBackend()
    else:
        if not config.tts.base_url:
            raise ConfigError("backends.tts.base_url is required for kind 'http'")
        tts = http_backends.HttpTtsBackend(config.tts.base_url, api_key_env=config.tts.api_key_env)

    judge: object | None = None
    if config.judge.kind == "mock":
        fixtures = (
            _load_fixtures(config.judge.fixtures, config.config_dir) if config.judge.fixtures else {}
        )
        judge = mock_backends.ScriptedJudge(fixtures)
    elif config.judge.kind == "http":
        if not config.judge.base_url:
            raise ConfigError("backends.judge.base_url is required for kind 'http'")
        try:
            judge = http_backends.HttpJudgeBackend(
                config.judge.base_url,
                model=config.judge.model,
                api_key_env=config.judge.api_key_env,
                require_key=True,
            )
        except http_backends.MissingApiKeyError as exc:
            raise ConfigError(str(exc)) from exc

    return Backends(
        llm=llm,
        image=image,
        tts=tts,
        judge=judge,
        llm_cap=InflightCap(config.llm.inflight),
        image_cap=InflightCap(config.image.inflight),
        tts_cap=InflightCap(config.tts.inflight),
    )


__all__ = [
    "BackendError",
    "Backends",
    "ConfigError",
    "EngineConfig",
    "build_backends",
    "load_config",
    "parse_config",
]
