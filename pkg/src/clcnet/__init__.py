"""Channel-local convolutions, channel dependency graph analysis and clcNet."""

from .cdg import ChannelDependencyGraph, block_cdg, cdg_of_kernel, compose, crf_sizes, export_dot, has_fcrf
from .conv import (
    BatchNormParams,
    BlockSpec,
    KernelKind,
    KernelSpec,
    batchnorm_inference,
    clc_block_forward,
    conv2d,
    igc_equivalence_check,
    relu,
)
from .errors import ClcError, ConfigParseError, ConstraintError, DivisibilityError, ShapeError
from .model import (
    CLCNET_A,
    CLCNET_B,
    NetworkConfig,
    NetworkSpec,
    build_clcnet,
    count_macs,
    count_params,
    forward,
    init_weights,
    parse,
    serialize,
    verify_network_fcrf,
)
from .optimize import CostQuery, CostResult, cost, fixed_g2_policy, minimize_cost, table1
from .tensor import Tensor4D, WeightTensor, interlace_channels, new_tensor

__version__ = "0.1.0"
