"""Python veneer over the native training-arena core.

All structured data crosses the boundary as canonical JSON strings, matching
the artifact formats of the command-line harness.
"""

from agentarena._core import (
    ArenaError,
    baseline_pass_rate,
    canonicalize,
    forge_environment,
    synthesize_suite,
    theme_names,
    train_final_reward,
    value_digest,
)

__all__ = [
    "ArenaError",
    "baseline_pass_rate",
    "canonicalize",
    "forge_environment",
    "synthesize_suite",
    "theme_names",
    "train_final_reward",
    "value_digest",
]
