"""Rule-based, quote-aware sentence segmentation.

The splitter is deliberately deterministic: identical input text yields
identical sentences on every run and platform, which keeps run manifests
reproducible. Rules, in order of precedence:

* ``.``, ``!``, ``?`` and ``…`` end a sentence.
* A period after a known abbreviation (shipped table) or a single
  capital-letter initial does not split, nor does a decimal point.
* A terminator inside an open double quotation does not split while the
  quotation continues. When the quotation closes right after the
  terminator, the closing quote attaches to the sentence; the sentence
  continues if the following word starts lowercase (dialogue tags such
  as ``"Stop!" she cried.``) and ends otherwise.
* A blank line always ends the open sentence and resets quote state, so
  an unbalanced quote cannot swallow the rest of the document.

Single straight quotes are not tracked (apostrophes make them ambiguous);
curly single quotes attach as closers but carry no state.
"""

from __future__ import annotations

import unicodedata
from importlib import resources
from pathlib import Path

from .model import ModelError, Sentence, Story, story_content_id

TERMINATORS = frozenset({".", "!", "?", "…"})
_OPEN_DOUBLE = {'"', "“"}
_CLOSE_DOUBLE = {'"', "”"}
_ATTACHABLE_CLOSERS = {'"', "”", "'", "’", ")", "]"}


def _load_abbreviations() -> frozenset[str]:
    text = resources.files("castbook.data").joinpath("abbreviations.txt").read_text("utf-8")
    entries = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            entries.add(line)
    return frozenset(entries)


ABBREVIATIONS = _load_abbreviations()


def _token_before(text: str, index: int) -> str:
    """Word characters immediately preceding ``index`` (the terminator)."""
    start = index
    while start > 0 and not text[start - 1].isspace() and text[start - 1] not in _OPEN_DOUBLE:
        start -= 1
    return text[start:index]


def _is_abbreviation(token: str) -> bool:
    token = token.strip("(").strip("'‘")
    if not token:
        return False
    if len(token) == 1 and token.isalpha() and token.isupper():
        return True  # initials: "J. K. Rowling"
    return token.lower() in ABBREVIATIONS


def segment_sentences(text: str) -> list[Sentence]:
    """Split ``text`` into sentences with byte spans into its UTF-8 form.

    Total on non-empty text; raises ``ModelError`` when the text contains
    no non-whitespace characters.
    """
    if not text.strip():
        raise ModelError("empty story: no non-whitespace text")

    n = len(text)
    boundaries: list[tuple[int, int]] = []  # (start, end) char offsets
    start: int | None = None
    last_nonspace = -1
    in_double = False
    i = 0

    def emit(end: int) -> None:
        nonlocal start
        if start is not None and end > start:
            boundaries.append((start, end))
        start = None

    while i < n:
        ch = text[i]

        if ch == "\n":
            # Paragraph break: blank line ends the open sentence and resets
            # any dangling quotation.
            j = i + 1
            while j < n and text[j] in " \t\r":
                j += 1
            if j < n and text[j] == "\n":
                emit(last_nonspace + 1)
                in_double = False
            i += 1
            continue

        if ch.isspace():
            i += 1
            continue

        if start is None:
            start = i
        last_nonspace = i

        if ch in _OPEN_DOUBLE and ch in _CLOSE_DOUBLE:  # straight quote toggles
            in_double = not in_double
            i += 1
            continue
        if ch in _OPEN_DOUBLE:
            in_double = True
            i += 1
            continue
        if ch in _CLOSE_DOUBLE:
            in_double = False
            i += 1
            continue

        if ch not in TERMINATORS:
            i += 1
            continue

        # Consume the whole terminator run ("...", "?!", etc.).
        run_start = i
        j = i
        while j < n and text[j] in TERMINATORS:
            j += 1
        run = text[run_start:j]
        last_nonspace = j - 1

        if run == ".":
            if _is_abbreviation(_token_before(text, run_start)):
                i = j
                continue
            if (
                run_start > 0
                and text[run_start - 1].isdigit()
                and j < n
                and text[j].isdigit()
            ):
                i = j  # decimal point
                continue

        if in_double:
            # Terminator inside a quotation: split only if the quote closes
            # here and the following text starts a new sentence.
            if j < n and text[j] in _CLOSE_DOUBLE:
                k = j
                closed = False
                while k < n and text[k] in _ATTACHABLE_CLOSERS:
                    if text[k] in _CLOSE_DOUBLE:
                        if closed:
                            break  # a second double quote opens new speech
                        in_double = False
                        closed = True
                    k += 1
                last_nonspace = k - 1
                m = k
                while m < n and text[m].isspace():
                    m += 1
                if m < n and (text[m].islower() or text[m] == ","):
                    i = k  # dialogue tag continues the sentence
                    continue
                emit(k)
                i = k
                continue
            i = j  # quotation continues
            continue

        # Terminator outside quotes: attach trailing closers and split.
        k = j
        while k < n and text[k] in _ATTACHABLE_CLOSERS and text[k] not in _OPEN_DOUBLE:
            k += 1
        last_nonspace = k - 1
        emit(k)
        i = k

    emit(last_nonspace + 1)

    # Map char offsets to byte offsets in one pass.
    byte_at = [0] * (n + 1)
    total = 0
    for idx, ch in enumerate(text):
        byte_at[idx] = total
        total += len(ch.encode("utf-8"))
    byte_at[n] = total

    return [
        Sentence(index=pos, text=text[s:e], span=(byte_at[s], byte_at[e]))
        for pos, (s, e) in enumerate(boundaries)
    ]


def make_story(raw_text: str, story_id: str | None = None, title: str = "") -> Story:
    """Normalize, segment, and wrap text into a ``Story``."""
    normalized = unicodedata.normalize("NFC", raw_text)
    sentences = segment_sentences(normalized)
    return Story(
        id=story_id or story_content_id(normalized),
        title=title,
        raw_text=normalized,
        sentences=tuple(sentences),
    )


def load_story(path: str | Path, story_id: str | None = None) -> Story:
    """Read a UTF-8 plain-text story file and segment it.

    Raises ``ModelError`` for unreadable files, invalid encodings, or
    whitespace-only content.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ModelError(f"cannot read story file {path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ModelError(f"story file {path} is not valid UTF-8: {exc}") from exc
    if text.startswith("﻿"):
        text = text[1:]
    return make_story(text, story_id=story_id, title=path.stem)
