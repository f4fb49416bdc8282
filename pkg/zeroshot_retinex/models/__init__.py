from .enhance_config import (
    ABLATION_PRESETS,
    AdamConfig,
    EnhanceConfig,
    LossWeights,
    NetConfig,
    apply_preset,
)
from .results import DarkRegionMask, DecompositionResult, EnhanceResult, LossBreakdown
from .run_record import RunRecord, format_report, parse_report
