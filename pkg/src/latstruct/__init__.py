"""latstruct: unsupervised neural-architecture synthesis from data.

Learns a deep latent generative DAG by recursive conditional-independence
testing, constructs its stochastic inverse and a class-conditional
discriminative DAG, and exports the result as a trainable feed-forward
architecture description.
"""

from .graphs import (
    MixedGraph,
    NodeKind,
    NodeRef,
    SepsetRegistry,
    apply_orientation_rules,
    d_separated,
    materialize_projection,
    orient_v_structures,
    sink_components,
)
from .independence import (
    Dataset,
    IndependenceSource,
    TestResult,
    fisher_z_test,
    g2_test,
    load_dataset,
)
from .learner import AuxGraph, LatentStructure, LearnResult, learn_structure, recur_lat_struct
from .inverse import (
    DiscriminativeGraph,
    InverseGraph,
    build_discriminative,
    build_stochastic_inverse,
    verify_preservation,
)
from .export import ArchitectureSpec, ExportConfig, export_architecture, validate_architecture
from .synth import DiscreteBN, ancestral_sample, random_bn, structural_distance, true_cpdag

__version__ = "0.1.0"
