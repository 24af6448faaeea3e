"""Per-layer convolution kernel-size selection.

Scores odd kernel candidates at each layer by normalized information gain,
modeled accuracy gain and MAC cost, and reports shapes, receptive fields,
MACs and parameter counts for whole networks. No training is involved.
"""

from kernelsize.arch import (
    FREE,
    LayerSpec,
    NetworkSpec,
    OpKind,
    free_all,
    propagate_shapes,
    receptive_field_trace,
    validate_spec,
)
from kernelsize.cost import layer_macs, layer_params, network_cost, oracle_macs_bruteforce
from kernelsize.errors import InfeasibleError, SpecError, UnresolvedKernelError
from kernelsize.objective import (
    ObjectiveWeights,
    ScoreTable,
    accuracy_gain,
    info_gain,
    min_max_normalize,
    score_candidates,
    select_kernel,
)
from kernelsize.optimizer import (
    OptimizationConfig,
    OptimizationResult,
    apply_budget_repair,
    optimize_network,
    profile_weights,
    sweep,
)
from kernelsize.report import (
    analyze,
    compare,
    emit_report,
    emit_spec,
    load_fixture,
    load_spec,
    parse_spec,
)

__version__ = "0.1.0"
