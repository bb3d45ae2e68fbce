"""Physics-consistency evaluation of frame sequences via dense optical flow.

The package couples a Farneback flow estimator with discrete differential
operators (vorticity, divergence, Q-criterion, stream function) to score how
well a generated sequence preserves the motion physics of a reference one,
and ships a small quaternion network for fusing flow and knowledge embeddings
into pseudo-prompt vectors with LoRA cross-attention.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    FlowPhysError,
    LengthError,
    NumericError,
    ShapeError,
)
from .fields import Frame, FrameSequence, FlowField, ScalarField, to_grayscale
from .flow import FarnebackFlow, FlowDiagnostics, FlowParams, farneback_flow, sequence_flows
from .diffops import divergence, gradient, q_criterion, stream_function, vorticity
from .metrics import MetricReport, PhysicsFidelityEvaluator, evaluate_all
from .quaternion import Quaternion, hamilton_product, quaternion_matrix
from .promptnet import (
    EmbeddingBundle,
    LoraAdapter,
    PromptResult,
    QTensor,
    QuaternionPromptProjector,
    lora_cross_attention,
    pseudo_prompt,
    quaternion_layer,
)
from .synth import (
    GridSpec,
    render_advected_sequence,
    rigid_rotation_flow,
    smoothed_noise_texture,
    taylor_green_flow,
    uniform_flow,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "FlowPhysError",
    "LengthError",
    "NumericError",
    "ShapeError",
    "Frame",
    "FrameSequence",
    "FlowField",
    "ScalarField",
    "to_grayscale",
    "FarnebackFlow",
    "FlowDiagnostics",
    "FlowParams",
    "farneback_flow",
    "sequence_flows",
    "divergence",
    "gradient",
    "q_criterion",
    "stream_function",
    "vorticity",
    "MetricReport",
    "PhysicsFidelityEvaluator",
    "evaluate_all",
    "Quaternion",
    "hamilton_product",
    "quaternion_matrix",
    "EmbeddingBundle",
    "LoraAdapter",
    "PromptResult",
    "QTensor",
    "QuaternionPromptProjector",
    "lora_cross_attention",
    "pseudo_prompt",
    "quaternion_layer",
    "GridSpec",
    "render_advected_sequence",
    "rigid_rotation_flow",
    "smoothed_noise_texture",
    "taylor_green_flow",
    "uniform_flow",
]
