"""Central finite-difference oracle for all gradient claims."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import ContractError, Tape, Tensor, backward


class OracleError(RuntimeError):
    """The checked function is unusable as an oracle target."""


def _evaluate(fn: Callable[[Mapping[str, Tensor]], Tensor], params: Mapping[str, np.ndarray]):
    tape = Tape()
    leaves = {name: tape.leaf(arr) for name, arr in params.items()}
    out = fn(leaves)
    if out.values.size != 1:
        raise ContractError("finite_difference_check: function must return a scalar")
    return tape, leaves, out


def finite_difference_check(
    fn: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """Compare backward() gradients of ``fn`` against central differences.

    ``fn`` receives a dict of leaf tensors and must return a scalar tensor.
    Returns the maximum relative error over every parameter coordinate,
    with an absolute fallback when both magnitudes are below 1e-8.
    """
    if epsilon <= 0:
        raise ContractError("finite_difference_check: epsilon must be positive")
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    tape, leaves, out = _evaluate(fn, params)
    _, _, out2 = _evaluate(fn, params)
    if out.item() != out2.item():
        raise OracleError("function is not deterministic for fixed parameters")

    grads = backward(tape, out)
    analytic = {name: grads[leaf.node_id] for name, leaf in leaves.items()}

    max_err = 0.0
    for name, base in params.items():
        for idx in np.ndindex(base.shape):
            def value_with(delta):
                shifted = {k: v.copy() for k, v in params.items()}
                shifted[name][idx] += delta
                return _evaluate(fn, shifted)[2].item()

            numeric = (value_with(epsilon) - value_with(-epsilon)) / (2.0 * epsilon)
            a = float(analytic[name][idx])
            scale = max(abs(a), abs(numeric))
            if scale < 1e-8:
                err = abs(a - numeric)
            else:
                err = abs(a - numeric) / scale
            max_err = max(max_err, err)
    return max_err
