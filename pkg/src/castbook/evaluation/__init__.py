from .judge import MOS_METRICS, mllm_evaluate  # noqa: F401
from .metrics import EvalReport, count_turning_points, evaluate_audio, speaker_similarity  # noqa: F401
from .pitch import PitchContour, extract_pitch  # noqa: F401
from .report import compare_report, render_table  # noqa: F401
