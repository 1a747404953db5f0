"""Per-sentence speaker attribution and reading-instruction generation.

Attribution is a closed-world operation: whatever the LLM answers is
resolved against the persona roster, retried once with a corrective
prompt on a miss, and finally falls back to the narrator (counted, never
silent). Instruction generation threads the previous sentence's
instruction through each prompt so emotional transitions stay smooth,
and filters out directions that are not about vocal delivery.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

from .backends.base import (
    BackendError,
    InflightCap,
    LlmBackend,
    LlmRequest,
    RetryPolicy,
    llm_complete,
)
from .model import ScriptLine, Sentence, SpeakerPersona, Story, require_one_narrator
from .segmentation import segment_sentences

log = logging.getLogger(__name__)

FALLBACK_INSTRUCTION = "Read in a neutral, steady tone."
MAX_INSTRUCTION_CHARS = 300
DEFAULT_WINDOW_SENTENCES = 20
DEFAULT_CONTEXT_BUDGET_CHARS = 24_000


def _load_lexicon() -> re.Pattern[str]:
    text = resources.files("castbook.data").joinpath("delivery_lexicon.txt").read_text("utf-8")
    words = [
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return re.compile(r"\b(" + "|".join(re.escape(w) for w in words) + r")\b", re.IGNORECASE)


_DELIVERY_RE = _load_lexicon()


def is_delivery_instruction(text: str) -> bool:
    """Speech-relevance filter: the line must mention how to speak."""
    return bool(_DELIVERY_RE.search(text))


@dataclass
class ScriptCounters:
    attribution_fallback: int = 0
    attribution_retry: int = 0
    instruction_fallback: int = 0
    instruction_retry: int = 0
    windowed: bool = False

    def as_dict(self) -> dict[str, int]:
        return {
            "attribution_fallback": self.attribution_fallback,
            "attribution_retry": self.attribution_retry,
            "instruction_fallback": self.instruction_fallback,
            "instruction_retry": self.instruction_retry,
        }


@dataclass(frozen=True)
class _Roster:
    personas: tuple[SpeakerPersona, ...]
    narrator_id: str
    by_alias: dict[str, str] = field(hash=False, default_factory=dict)

    @classmethod
    def build(cls, personas: list[SpeakerPersona]) -> "_Roster":
        narrator = require_one_narrator(personas)
        aliases: dict[str, str] = {"narrator": narrator.speaker_id, "narration": narrator.speaker_id}
        for persona in personas:
            aliases[persona.speaker_id.casefold()] = persona.speaker_id
            aliases[persona.name_or_role.casefold()] = persona.speaker_id
        return cls(personas=tuple(personas), narrator_id=narrator.speaker_id, by_alias=aliases)

    def resolve(self, answer: str) -> str | None:
        cleaned = answer.strip().strip("\"'`.,:;!").strip()
        return self.by_alias.get(cleaned.casefold())

    def listing(self) -> str:
        return "\n".join(
            f"- {p.speaker_id}: {p.name_or_role}" + (" (narrator)" if p.is_narrator else "")
            for p in self.personas
        )


def _story_context(story: Story, sentence: Sentence, window: int, budget_chars: int) -> tuple[str, bool]:
    """Full story text, or a +/-window sentence excerpt when over budget."""
    if len(story.raw_text) <= budget_chars:
        return story.raw_text, False
    sentences = story.sentence_window(sentence.index, window)
    return " ".join(s.text for s in sentences), True


_ATTRIBUTION_SYSTEM_PROMPT = (
    "You assign story sentences to the voice that should read them aloud. "
    "Answer with exactly one speaker id from the provided cast list and "
    "nothing else."
)

_ATTRIBUTION_USER_TEMPLATE = """Cast (answer with one id from this list):
{roster}

Decide who speaks the sentence below.
- Use the story context for indirect clues.
- Dialogue attribution markers (for example: said {example_name}) identify the speaker directly.
- If the sentence is narration rather than dialogue, answer {narrator_id}.

Story context:
{context}

Sentence {index}: {sentence}
"""

_ATTRIBUTION_RETRY_SUFFIX = (
    "\nYour previous answer {bad!r} is not in the cast list. "
    "Answer with exactly one id from the cast list above."
)


def attribute_speaker(
    story: Story,
    sentence: Sentence,
    personas: list[SpeakerPersona],
    llm: LlmBackend,
    temperature: float = 0.0,
    window: int = DEFAULT_WINDOW_SENTENCES,
    budget_chars: int = DEFAULT_CONTEXT_BUDGET_CHARS,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> tuple[str, bool, bool]:
    """Resolve the sentence's speaker id.

    Returns (speaker_id, retried, fell_back). A first answer outside the
    cast triggers one corrective retry; a second miss falls back to the
    narrator so the closed-world invariant holds unconditionally.
    """
    roster = _Roster.build(personas)
    context, _ = _story_context(story, sentence, window, budget_chars)
    example_name = next((p.name_or_role for p in personas if not p.is_narrator), "the speaker")
    prompt = _ATTRIBUTION_USER_TEMPLATE.format(
        roster=roster.listing(),
        example_name=example_name,
        narrator_id=roster.narrator_id,
        context=context,
        index=sentence.index,
        sentence=sentence.text,
    )
    base_key = f"attribute/{story.id}/{sentence.index}"
    response = llm_complete(
        llm,
        LlmRequest(
            system_prompt=_ATTRIBUTION_SYSTEM_PROMPT,
            user_prompt=prompt,
            temperature=temperature,
            key=base_key,
        ),
        retry=retry,
        cap=cap,
    )
    speaker = roster.resolve(response.text)
    if speaker is not None:
        return speaker, False, False

    corrective = prompt + _ATTRIBUTION_RETRY_SUFFIX.format(bad=response.text.strip())
    retry_response = llm_complete(
        llm,
        LlmRequest(
            system_prompt=_ATTRIBUTION_SYSTEM_PROMPT,
            user_prompt=corrective,
            temperature=temperature,
            key=base_key + "/retry",
        ),
        retry=retry,
        cap=cap,
    )
    speaker = roster.resolve(retry_response.text)
    if speaker is not None:
        return speaker, True, False
    log.warning(
        "attribution fallback for sentence %d: %r / %r not in cast",
        sentence.index,
        response.text.strip(),
        retry_response.text.strip(),
    )
    return roster.narrator_id, True, True


_INSTRUCTION_SYSTEM_PROMPT = (
    "You direct an audiobook narrator. For the given sentence, reply with "
    "one short sentence telling the performer how to deliver it: tone, "
    "pitch, pacing, and emotion. Never describe appearance, plot, or "
    "anything unrelated to the way the line is spoken."
)

_INSTRUCTION_USER_TEMPLATE = """Story context:
{context}

Speaker: {speaker_name} - {speaker_caption}
Sentence {index}: {sentence}
{transition}
Give a single concise delivery instruction for this sentence."""

_TRANSITION_TEMPLATE = (
    "The previous sentence was delivered as: {previous!r}. "
    "Let the emotion transition smoothly from there."
)


def generate_instruction(
    story: Story,
    sentence: Sentence,
    speaker: SpeakerPersona,
    previous_instruction: str,
    llm: LlmBackend,
    temperature: float = 0.7,
    window: int = DEFAULT_WINDOW_SENTENCES,
    budget_chars: int = DEFAULT_CONTEXT_BUDGET_CHARS,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> tuple[str, bool, bool]:
    """One delivery instruction for the sentence.

    Returns (instruction, retried, fell_back). Output that is empty,
    overlong, or fails the speech-relevance filter is regenerated once,
    then replaced by the neutral fallback instruction.
    """
    context, _ = _story_context(story, sentence, window, budget_chars)
    transition = (
        _TRANSITION_TEMPLATE.format(previous=previous_instruction)
        if previous_instruction
        else ""
    )
    prompt = _INSTRUCTION_USER_TEMPLATE.format(
        context=context,
        speaker_name=speaker.name_or_role,
        speaker_caption=speaker.caption,
        index=sentence.index,
        sentence=sentence.text,
        transition=transition,
    )
    base_key = f"instruction/{story.id}/{sentence.index}"

    first = _try_instruction(llm, prompt, temperature, base_key, retry, cap)
    if first is not None:
        return first, False, False
    corrective = prompt + (
        "\nYour previous reply was not a usable delivery instruction "
        "(it must be one sentence, at most 300 characters, about vocal "
        "delivery only). Reply again."
    )
    second = _try_instruction(llm, corrective, temperature, base_key + "/retry", retry, cap)
    if second is not None:
        return second, True, False
    log.warning("instruction fallback for sentence %d", sentence.index)
    return FALLBACK_INSTRUCTION, True, True


def _try_instruction(
    llm: LlmBackend,
    prompt: str,
    temperature: float,
    key: str,
    retry: RetryPolicy | None,
    cap: InflightCap | None,
) -> str | None:
    try:
        response = llm_complete(
            llm,
            LlmRequest(
                system_prompt=_INSTRUCTION_SYSTEM_PROMPT,
                user_prompt=prompt,
                temperature=temperature,
                key=key,
            ),
            retry=retry,
            cap=cap,
        )
    except BackendError:
        raise
    return _normalize_instruction(response.text)


def _normalize_instruction(text: str) -> str | None:
    """Trim to one sentence and validate the delivery filter and length."""
    cleaned = " ".join(text.split())
    if not cleaned:
        return None
    try:
        first = segment_sentences(cleaned)[0].text
    except Exception:
        first = cleaned
    if not first or len(first) > MAX_INSTRUCTION_CHARS:
        return None
    if not is_delivery_instruction(first):
        return None
    return first


def build_script(
    story: Story,
    personas: list[SpeakerPersona],
    llm: LlmBackend,
    attribution_temperature: float = 0.0,
    instruction_temperature: float = 0.7,
    window: int = DEFAULT_WINDOW_SENTENCES,
    budget_chars: int = DEFAULT_CONTEXT_BUDGET_CHARS,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
    max_workers: int = 4,
) -> tuple[list[ScriptLine], ScriptCounters]:
    """Attribute and direct every sentence, in order.

    Attribution runs concurrently across sentences; instruction
    generation is sequential because each prompt consumes the previous
    sentence's instruction.
    """
    counters = ScriptCounters(windowed=len(story.raw_text) > budget_chars)

    def attribute(sentence: Sentence) -> tuple[str, bool, bool]:
        return attribute_speaker(
            story,
            sentence,
            personas,
            llm,
            temperature=attribution_temperature,
            window=window,
            budget_chars=budget_chars,
            retry=retry,
            cap=cap,
        )

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        attributions = list(pool.map(attribute, story.sentences))
    speaker_ids = [speaker_id for speaker_id, _, _ in attributions]
    counters.attribution_retry = sum(1 for _, retried, _ in attributions if retried)
    counters.attribution_fallback = sum(1 for _, _, fell in attributions if fell)

    by_id = {p.speaker_id: p for p in personas}
    lines: list[ScriptLine] = []
    previous_instruction = ""
    for sentence, speaker_id in zip(story.sentences, speaker_ids):
        instruction, retried, fell_back = generate_instruction(
            story,
            sentence,
            by_id[speaker_id],
            previous_instruction,
            llm,
            temperature=instruction_temperature,
            window=window,
            budget_chars=budget_chars,
            retry=retry,
            cap=cap,
        )
        if retried:
            counters.instruction_retry += 1
        if fell_back:
            counters.instruction_fallback += 1
        lines.append(
            ScriptLine(sentence_index=sentence.index, speaker_id=speaker_id, instruction=instruction)
        )
        previous_instruction = instruction
    return lines, counters
