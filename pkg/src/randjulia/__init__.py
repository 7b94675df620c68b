"""Random quadratic Julia sets: non-autonomous dynamics, degree profiles and
Monte Carlo escape statistics."""

from .connectivity import (
    ComponentReport,
    DegreeProfile,
    GridField,
    SufficiencyReport,
    Verdict,
    bbr_disconnected_scan,
    components,
    critical_profile,
    grid_escape_field,
    property_Kk,
    sufficient_condition_report,
)
from .domain import (
    Circle,
    Constant,
    Disk,
    DiskAt,
    Explicit,
    MainCardioid,
    Periodic,
    Random,
    RegionUnion,
    bounding_radius,
    contains,
    sample,
    sequence_at,
)
from .dynamics import Bounded, Constants, Escaped, GreenEval, Overflow, derive_constants, escape_time, green, iterate
from .stats import (
    GammaFit,
    InsufficientData,
    Mode,
    TailCurve,
    disconnect_fraction,
    fit_gamma,
    green_summary,
    sample_tail,
)

__version__ = "0.1.0"
