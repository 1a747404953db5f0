"""castbook: multi-speaker audiobook engine with persona-anchored voices."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AudiobookManifest,
    SAMPLE_RATE,
    ScriptLine,
    Sentence,
    SpeakerPersona,
    Story,
)
from .segmentation import load_story, make_story, segment_sentences  # noqa: F401
