"""Cross-user activity recognition with attitude-based global views."""

from ._core import (
    FlowError,
    accuracy,
    config_text,
    confusion,
    gen_shuffle_matrix,
    mahony_run,
    mc_transform,
    prepare_summary,
    quat_from_accel_mag,
    rotation_matrix,
    run_louo,
    weighted_f1,
)

__all__ = [
    "FlowError",
    "accuracy",
    "config_text",
    "confusion",
    "gen_shuffle_matrix",
    "mahony_run",
    "mc_transform",
    "prepare_summary",
    "quat_from_accel_mag",
    "rotation_matrix",
    "run_louo",
    "weighted_f1",
]
