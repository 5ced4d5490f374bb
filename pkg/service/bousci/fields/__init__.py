"""Fields on the periodic box: grid, Fourier fields, norms and operators."""

from .grid import Grid
from .field import (
    Field,
    Rank,
    TimeSeriesField,
    dealias,
    dot,
    multiply,
    sym_outer,
    transform_forward,
    transform_inverse,
)
from .derivatives import curl, derivative, div, grad, laplacian
from .norms import holder_norm, l2_norm, mean, sobolev_norm, sup_norm
from .calculus import (
    biot_savart,
    inverse_divergence,
    leray_project,
    mollify,
    quadratic_commutator,
    traceless,
    traceless_product,
)

__all__ = [
    'Grid', 'Field', 'Rank', 'TimeSeriesField', 'dealias', 'dot', 'multiply', 'sym_outer',
    'transform_forward', 'transform_inverse', 'curl', 'derivative', 'div', 'grad', 'laplacian',
    'holder_norm', 'l2_norm', 'mean', 'sobolev_norm', 'sup_norm', 'biot_savart',
    'inverse_divergence', 'leray_project', 'mollify', 'quadratic_commutator', 'traceless',
    'traceless_product',
]
