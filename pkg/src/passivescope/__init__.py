"""Passive network scope discovery.

Sniffs ARP and same-segment IPv4 traffic, infers the surrounding network
ranges, proposes an address and default gateway for the scanner, and writes
a scan plan for active tooling.
"""

from .codec import IGNORED, ArpOp, ArpSummary, IpSummary, RawFrame, decode_frame
from .exceptions import (
    EmptyInput,
    InvalidArguments,
    InvalidSpec,
    MalformedTraceFile,
    NoFreeAddress,
    NoRangesDetermined,
    ReconError,
    SourceOpenFailure,
)
from .hints import HopcountTable, OsFamily, TtlHint, infer_internal_gateway, ttl_hint
from .planner import (
    GatewayProvenance,
    InterfaceState,
    PlanDocument,
    ProposedConfig,
    ScanPlan,
    ScopePlanner,
    build_scan_plan,
    determine_gateway,
    finalize_ranges,
    fits_configuration,
    load_plan,
    select_free_ip,
    select_own_network,
)
from .ranges import (
    AddressClass,
    ClusteringPolicy,
    ClusteringVariant,
    NetworkRange,
    RangeClusterer,
    classify_address,
    cluster,
    order_ranges,
)
from .scanner import (
    CaptureConfig,
    CaptureMode,
    HostObservation,
    LiveInterface,
    ObservationSet,
    PassiveScanner,
    TerminationReason,
    TraceFile,
    admit,
    observe,
    run_passive_phase,
)
from .synth import ScenarioSpec, SubnetSpec, synthesize

__version__ = "0.1.0"
