"""Graph scattering with diffusion wavelets and learnable scale selection.

The package splits into graph plumbing (``graph``), the fixed wavelet bank
and its frame certificate (``filterbank``), the handcrafted scattering
transform (``scattering``), the trainable selection module (``learnable``),
a small reverse-mode tape (``autodiff``), task heads and training
(``heads``, ``train``), dataset handling (``data``), and verification
suites (``checks``).
"""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    DiffusionOperator,
    Graph,
    build_graph,
    clustering_coefficient,
    conjugate_spectrum,
    eccentricity,
    lazy_diffusion,
    permute_nodes,
    weighted_norm,
)
from .filterbank import (  # noqa: F401
    FilterBank,
    FrameCertificate,
    ScaleSequence,
    apply_filter,
    build_bank,
    dyadic_scales,
    frame_certificate,
    frame_constant,
    response_stack,
)
from .scattering import (  # noqa: F401
    FeatureVector,
    ScatterConfig,
    enumerate_paths,
    scatter_features,
    scatter_moment,
    scatter_node,
)
from .learnable import (  # noqa: F401
    DiffusionStack,
    SelectionMatrix,
    SelectionParams,
    diffusion_stack,
    init_selection,
    legs_filters,
    legs_forward,
    selection_matrix,
)
from .autodiff import Tape, backward, finite_diff_check  # noqa: F401
from .heads import FCNHead, RBFHead, init_fcn, init_rbf, loss, rbf_forward  # noqa: F401
from .train import TrainConfig, TrainedModel, crossval, train  # noqa: F401
from .data import (  # noqa: F401
    DatasetBundle,
    export_features,
    parse_tudataset,
    synth_scales_dataset,
    write_tudataset,
)
