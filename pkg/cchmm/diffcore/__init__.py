from cchmm.diffcore import ops
from cchmm.diffcore.gradcheck import GradCheckResult, OpFault, check_gradients, locate_faulty_op
from cchmm.diffcore.linalg import solve_small
from cchmm.diffcore.tensor import ComputationTape, Tensor, active_tape, backward

__all__ = [
    "ComputationTape",
    "GradCheckResult",
    "OpFault",
    "Tensor",
    "active_tape",
    "backward",
    "check_gradients",
    "locate_faulty_op",
    "ops",
    "solve_small",
]
