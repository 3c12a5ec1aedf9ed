from .penalties import Clique, DeltaLinear, ExplicitAsym, ExplicitSym, Penalty, Pow, Sqrt
from .sequence import ConcaveSeq, MonotoneConcaveSeq
from .plcover import Line, PLFunction, greedy_pl_cover, symmetric_pl_cover
from .gadget import GadgetGraph
from .flow import FlowNetwork, min_st_cut
from .dsfm import (
    Component,
    DSFMInstance,
    Solution,
    SolveOptions,
    brute_force,
    evaluate_objective,
    evaluate_penalty,
    sparse_card,
)
from .errors import SparseCardError, ValidationError

try:
    from .version import __version__  # noqa: F401
except ImportError:
    __version__ = "0.1.0a0"
