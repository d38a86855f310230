from .direct import (
    direct_process_certify,
    direct_state_certify,
    estimate_observable,
    minimax_spectral_gap,
    observable_certify,
)
from .fidelity import certify_from_estimate, dfe, sfe
from .rb import rb_interleaved, rb_standard
from .types import Plan, RbCurve, RbFit, Verdict
from .xeb import porter_thomas_check, xeb

__all__ = [
    "Plan",
    "RbCurve",
    "RbFit",
    "Verdict",
    "certify_from_estimate",
    "dfe",
    "direct_process_certify",
    "direct_state_certify",
    "estimate_observable",
    "minimax_spectral_gap",
    "observable_certify",
    "porter_thomas_check",
    "rb_interleaved",
    "rb_standard",
    "sfe",
    "xeb",
]
