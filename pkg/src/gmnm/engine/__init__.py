from . import fn
from .gradcheck import BlockReport, check_gradients, gradient_error, numerical_gradient
from .hyperdual import HyperDual, UnsupportedPrimitiveError, hyperdual_d2, hyperdual_laplacian, seed_direction
from .tape import Tape, Var, backward, value_of
from .tensor import NonFiniteError, Rng, ShapeError, Tensor, as_tensor, matmul, rng_uniform, tensor_binop

__all__ = [
    "BlockReport", "HyperDual", "NonFiniteError", "Rng", "ShapeError", "Tape", "Tensor",
    "UnsupportedPrimitiveError", "Var", "as_tensor", "backward", "check_gradients", "fn",
    "gradient_error", "hyperdual_d2", "hyperdual_laplacian", "matmul", "numerical_gradient",
    "rng_uniform", "seed_direction", "tensor_binop", "value_of",
]
