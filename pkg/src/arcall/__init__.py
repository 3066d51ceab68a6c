"""ARcall stack: timed call sessions, a bit-exact wire protocol, a relay
server with a privacy blur pipeline, and a deterministic simulation harness.
"""

from .catalog import (
    ArContent,
    ContentKind,
    ProjectionState,
    builtin_catalog,
    clear_on_dropin_end,
    load_catalog,
    project,
    reposition,
)
from .errors import ArcallError
from .media import Frame, FovModel, blur_frame, compose_overlay, glasses_viewport, view_mismatch
from .metrics import LatencyBreakdown, MetricsReport, compute_metrics, latency_breakdown
from .protocol import Message, StreamDecoder, decode, encode
from .relay import RelayCore
from .session import (
    ArcallSession,
    DropInSession,
    SessionConfig,
    drop_in,
    end_arcall,
    end_dropin,
    extend_drop_in,
    start_arcall,
    tick,
    validate_config,
)
from .sim import NetworkModel, Scenario, ThermalState, run_scenario, thermal_step
from .store import FriendshipDb, Preferences, StoreDir

__version__ = "0.1.0"

__all__ = [
    "ArcallError",
    "ArcallSession",
    "ArContent",
    "builtin_catalog",
    "blur_frame",
    "clear_on_dropin_end",
    "compute_metrics",
    "compose_overlay",
    "ContentKind",
    "decode",
    "drop_in",
    "DropInSession",
    "encode",
    "end_arcall",
    "end_dropin",
    "extend_drop_in",
    "Frame",
    "FriendshipDb",
    "FovModel",
    "glasses_viewport",
    "latency_breakdown",
    "LatencyBreakdown",
    "load_catalog",
    "Message",
    "MetricsReport",
    "NetworkModel",
    "Preferences",
    "project",
    "ProjectionState",
    "RelayCore",
    "reposition",
    "run_scenario",
    "Scenario",
    "SessionConfig",
    "start_arcall",
    "StoreDir",
    "StreamDecoder",
    "ThermalState",
    "thermal_step",
    "tick",
    "validate_config",
    "view_mismatch",
]
