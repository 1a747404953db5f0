#!/usr/bin/env python3
"""Regenerate the bundled demo LLM/judge fixtures.

The demo story is authored alongside these annotations: one speaker and
one delivery instruction per sentence. Run after editing the demo story
and commit the resulting llm_fixtures.json.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from castbook.segmentation import load_story  # noqa: E402

DEMO_DIR = REPO / "src" / "castbook" / "data" / "demo"

EXTRACTION = {
    "narrator": {
        "name": "Narrator",
        "caption": (
            "a weathered traveling clockmaker in a salt-stained gray coat, "
            "with careful hands, short silver hair, and watchful pale eyes"
        ),
    },
    "characters": [
        {
            "name": "Mara",
            "caption": (
                "a sturdy lighthouse keeper in her fifties with windburned "
                "cheeks, cropped dark hair streaked white, and a heavy wool sweater"
            ),
        },
        {
            "name": "Tomas",
            "caption": (
                "a lanky young apprentice with curly black hair, quick brown "
                "eyes, and a patched oilskin jacket a size too big"
            ),
        },
    ],
}

# One entry per demo sentence, in order.
SPEAKERS = [
    "Narrator",  # 0 ferry dropped me
    "Narrator",  # 1 come to mend
    "Narrator",  # 2 salt wind
    "Narrator",  # 3 at the gate stood Mara
    "Narrator",  # 4 her apprentice Tomas
    "Mara",      # 5 you're the clockmaker
    "Mara",      # 6 expected you on Tuesday
    "Narrator",  # 7 the strait had other plans
    "Narrator",  # 8 she weighed that
    "Mara",      # 9 come up before the light goes
    "Narrator",  # 10 the stair smelled
    "Narrator",  # 11 Tomas trailed us
    "Tomas",     # 12 is it true the clock
    "Mara",      # 13 true enough
    "Mara",      # 14 relief boat sets its watch
    "Narrator",  # 15 clock room sat below
    "Narrator",  # 16 found the trouble
    "Narrator",  # 17 there it is
    "Narrator",  # 18 your wheel has split
    "Narrator",  # 19 Tomas whistled low
    "Mara",      # 20 can you cut a new one
    "Narrator",  # 21 I can
    "Narrator",  # 22 if your forge still draws
    "Narrator",  # 23 we worked through the evening
    "Narrator",  # 24 Mara kept the lamp turning
    "Narrator",  # 25 Tomas read the log
    "Tomas",     # 26 listen to this
    "Tomas",     # 27 in the winter of the great freeze
    "Narrator",  # 28 Mara's voice went quiet
    "Mara",      # 29 my grandmother kept the light
    "Narrator",  # 30 past midnight
    "Narrator",  # 31 eased the pallet
    "Narrator",  # 32 the clock gathered itself
    "Narrator",  # 33 there's your noon
    "Narrator",  # 34 Tomas laughed
    "Tomas",     # 35 wound the whole island
    "Narrator",  # 36 Mara walked me down
    "Mara",      # 37 stay for the spring tide
    "Mara",      # 38 a clock likes to be visited
    "Narrator",  # 39 I told her I would
]

INSTRUCTIONS = [
    "Read in an even, unhurried tone, setting the scene.",
    "Keep a steady, reflective pace with quiet purpose.",
    "Let the voice rise and fall gently, like wind off the water.",
    "Speak with mild curiosity, the pace picking up slightly.",
    "Read evenly, with a small warm lift on the name.",
    "Speak in a firm, level tone with a hint of appraisal.",
    "Add a dry, pointed edge, clipped and unhurried.",
    "Reply in a mild, wry tone, lightly apologetic.",
    "Read quietly and evenly, letting the pause do the work.",
    "Speak briskly, a touch warmer, as an invitation.",
    "Use a hushed, close tone, slowing with the climb.",
    "Keep an easy, light pace with a smile in the voice.",
    "Ask with eager, boyish excitement, pitch rising.",
    "Answer in a low, matter-of-fact tone.",
    "Add quiet gravity, slowing on the last words.",
    "Read calmly, with settled, deliberate pacing.",
    "Let focused interest sharpen the tone, quickening slightly.",
    "Speak softly with satisfaction, almost to yourself.",
    "State it plainly, in a clear diagnostic tone.",
    "Give a low, impressed whistle of a tone, playful.",
    "Ask in an urgent, pressing tone, leaning forward.",
    "Answer with quiet, steady confidence.",
    "Add a careful, conditional tone, slightly slower.",
    "Read warmly, with an easy communal rhythm.",
    "Keep a steady working cadence, calm and absorbed.",
    "Use a light, storytelling lilt, relaxed.",
    "Speak up with sudden bright interest, faster.",
    "Read the old entry in a hushed, dramatic tone, slowing at the rocks.",
    "Drop to a soft, careful tone, almost a whisper.",
    "Speak low and solemn, heavy with memory.",
    "Lift the pace gently, quiet relief entering the voice.",
    "Read with held-breath care, slow and precise.",
    "Let the tone open with wonder, bright and clear.",
    "Speak with warm, tired satisfaction.",
    "Read with easy, laughing energy.",
    "Burst out in an excited, delighted voice, quick and loud.",
    "Settle into a calm, pre-dawn hush, slower.",
    "Use a calm and reassuring tone.",
    "Add a small, wry smile to the voice, gentle.",
    "Close in a steady, contented tone, fading like the light.",
]

JUDGE_SCORES = {"CharCon": 3.9, "MOS-Q": 3.3, "MOS-E": 4.6, "MOS-S": 3.4}


def main() -> None:
    story = load_story(DEMO_DIR / "demo.txt", story_id="demo")
    assert len(story.sentences) == len(SPEAKERS) == len(INSTRUCTIONS), (
        len(story.sentences),
        len(SPEAKERS),
        len(INSTRUCTIONS),
    )
    fixtures: dict[str, str] = {
        f"extract_speakers/{story.id}": json.dumps(EXTRACTION, indent=2)
    }
    for sentence, speaker, instruction in zip(story.sentences, SPEAKERS, INSTRUCTIONS):
        fixtures[f"attribute/{story.id}/{sentence.index}"] = speaker
        fixtures[f"instruction/{story.id}/{sentence.index}"] = instruction
    for metric, score in JUDGE_SCORES.items():
        answer = json.dumps({"score": score})
        fixtures[f"judge/{metric}"] = answer
        for chunk in range(8):
            fixtures[f"judge/{metric}/chunk{chunk}"] = answer

    out = DEMO_DIR / "llm_fixtures.json"
    out.write_text(json.dumps(fixtures, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(fixtures)} fixtures)")


if __name__ == "__main__":
    main()
