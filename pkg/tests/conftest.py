from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from castbook.segmentation import load_story

_ACCEPTANCE_LABELS = {
    "test_end_to_end_mock_run": "end-to-end mock demo run",
    "test_turning_point_oracle_equivalence": "turning-point oracle equivalence (1000 contours)",
    "test_pitch_accuracy_on_pure_tones": "pitch accuracy on pure tones",
    "test_similarity_identity_and_scale": "similarity identity and amplitude invariance",
    "test_consistency_ranking_20_of_20": "consistency ranking 20/20 seeded trials",
    "test_expressiveness_ranking_20_of_20": "expressiveness ranking 20/20 seeded trials",
    "test_persona_fixedness_audit": "persona fixedness audit",
    "test_closed_world_attribution_under_fuzzing": "closed-world attribution under fuzzing",
    "test_report_fidelity_four_system_fixture": "report fidelity (four-system fixture)",
    "test_mllm_harness_contract": "MLLM judge harness contract",
}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    label = _ACCEPTANCE_LABELS.get(name)
    if label:
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {label}: {outcome}", flush=True)

DEMO_DIR = Path(__file__).parent.parent / "src" / "castbook" / "data" / "demo"


@pytest.fixture(scope="session")
def demo_story():
    return load_story(DEMO_DIR / "demo.txt", story_id="demo")


@pytest.fixture(scope="session")
def demo_config_path() -> Path:
    return DEMO_DIR / "mock.json"


@pytest.fixture(scope="session")
def demo_fixtures() -> dict[str, str]:
    import json

    return json.loads((DEMO_DIR / "llm_fixtures.json").read_text(encoding="utf-8"))
