"""Vision-only smartphone operation through a simulated single-contact arm.

The package bundles a deterministic phone simulator, an arm model with
pixel-to-workspace calibration, the action engine (including gesture-first
back/exit and anchor-based keyboard typing), mock and remote perception,
the agent loop, benchmark metrics and the episode dataset tooling.
"""

from armphone.geometry import BBox, center_of
from armphone.device import Environment, load_screen_pack, screen_delta
from armphone.arm import CalibrationMap, fit_calibration, plan_swipe, plan_tap, trace_of
from armphone.actions import ActionSpec, execute, resolve_swipe, synthesize_back, synthesize_exit
from armphone.keyboard import KeyboardLayout, localize_keyboard, plan_text_input
from armphone.perception import MockGrounder, annotate_marks
from armphone.metrics import completion_rate, step_efficiency, success_rate

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "BBox",
    "CalibrationMap",
    "Environment",
    "KeyboardLayout",
    "MockGrounder",
    "annotate_marks",
    "center_of",
    "completion_rate",
    "execute",
    "fit_calibration",
    "load_screen_pack",
    "localize_keyboard",
    "plan_swipe",
    "plan_tap",
    "plan_text_input",
    "resolve_swipe",
    "screen_delta",
    "step_efficiency",
    "success_rate",
    "synthesize_back",
    "synthesize_exit",
    "trace_of",
]
