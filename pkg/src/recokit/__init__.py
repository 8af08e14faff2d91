"""recokit: splitting, evaluation, classical recommenders and tuning."""
__version__ = "0.1.0"

from .interactions import (
    Interaction,
    InteractionSet,
    SparseMatrixView,
    SyntheticSpec,
    generate_synthetic,
    load_interactions,
    to_sparse,
    write_interactions,
)

__all__ = [
    "Interaction", "InteractionSet", "SparseMatrixView", "SyntheticSpec", "generate_synthetic",
    "load_interactions", "to_sparse", "write_interactions",
]
