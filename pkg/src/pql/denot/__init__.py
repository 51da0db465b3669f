"""Categorical semantics: completely positive maps, branching monad,
and the interpretation of derivations and channels."""

from .cpmap import CPMap
from .category import BMor, FVal, KMor, Obj
from .interp import (
    ChannelElem,
    DenotError,
    GlobalElem,
    Interpreter,
    SemClosure,
    SoundnessReport,
    denote_type,
    equal_observable,
    kmor_observable_deviation,
    soundness_trace,
)

__all__ = [
    "BMor",
    "CPMap",
    "ChannelElem",
    "DenotError",
    "FVal",
    "GlobalElem",
    "Interpreter",
    "KMor",
    "Obj",
    "SemClosure",
    "SoundnessReport",
    "denote_type",
    "equal_observable",
    "kmor_observable_deviation",
    "soundness_trace",
]
