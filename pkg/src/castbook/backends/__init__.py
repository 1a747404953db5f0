from .base import (  # noqa: F401
    MODE_PERSONA_BOOTSTRAP,
    MODE_SENTENCE_SYNTHESIS,
    BackendError,
    BackendIdentity,
    ImageRequest,
    ImageResponse,
    InflightCap,
    LlmRequest,
    LlmResponse,
    RetryPolicy,
    SchemaViolationError,
    TransportError,
    TtsRequest,
    TtsResponse,
    generate_image,
    llm_complete,
    synthesize,
)
from .mock import ProceduralImageBackend, ScriptedJudge, ScriptedLlm, SyntheticVoiceBackend  # noqa: F401
