from .tt_core import TTTensor, random_tt, tt_to_dense, tt_values
from .observation import ObservationSet, observe, sample_mask
from .projection import SparseProjectionPair, project_tt, sample_projection

__all__ = [
    'TTTensor', 'random_tt', 'tt_to_dense', 'tt_values',
    'ObservationSet', 'observe', 'sample_mask',
    'SparseProjectionPair', 'project_tt', 'sample_projection',
]
