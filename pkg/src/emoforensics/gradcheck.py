"""Central finite-difference gradient checking.

The numerical contract for every differentiable operation in this package:
analytic gradients must agree with ``(f(x + eps e_i) - f(x - eps e_i)) /
(2 eps)`` coordinate-wise at 64-bit precision.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import torch

ValueAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def gradient_check(
    fn: ValueAndGrad,
    point: np.ndarray,
    eps: float = 1e-5,
    max_coords: int = 200,
    seed: int = 0,
    value_fn: Callable[[np.ndarray], float] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` maps a flat float64 vector to ``(value, gradient)``. When the
    point has more than ``max_coords`` coordinates, a seeded random subset of
    ``max_coords`` (>= 200 for the package-level contracts) is checked.
    Relative error uses denominator ``max(|analytic|, |numeric|, 1e-8)``.
    ``value_fn``, when given, evaluates the perturbed points without paying
    for an unused gradient; it must agree with ``fn``'s value.
    """
    point = np.asarray(point, dtype=np.float64)
    if value_fn is None:
        value_fn = lambda x: fn(x)[0]  # noqa: E731
    value, grad = fn(point)
    if not np.isfinite(value):
        raise ValueError("function value is non-finite at the check point")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != point.shape:
        raise ValueError(f"gradient shape {grad.shape} != point shape {point.shape}")
    if not np.isfinite(grad).all():
        raise ValueError("analytic gradient contains non-finite values")

    dim = point.size
    if dim <= max_coords:
        coords = np.arange(dim)
    else:
        coords = np.random.default_rng(seed).choice(dim, size=max_coords, replace=False)

    max_rel = 0.0
    for i in coords:
        shifted = point.copy()
        shifted[i] = point[i] + eps
        f_plus = value_fn(shifted)
        shifted[i] = point[i] - eps
        f_minus = value_fn(shifted)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError(f"function value non-finite at perturbation of coordinate {i}")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        analytic = grad[i]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel


def torch_point_and_fns(
    loss_fn: Callable[[], "torch.Tensor"], parameters: list["torch.nn.Parameter"]
) -> tuple[np.ndarray, ValueAndGrad, Callable[[np.ndarray], float]]:
    """Adapt a torch scalar loss over a parameter list to the checker's API.

    Returns ``(point, fn, value_fn)``: the current flattened parameters, a
    function producing (value, autograd gradient) at any parameter vector,
    and a cheaper value-only evaluator for the finite differences.
    """
    parameters = list(parameters)
    shapes = [tuple(p.shape) for p in parameters]
    sizes = [int(np.prod(s)) if s else 1 for s in shapes]

    def write(x: np.ndarray) -> None:
        offset = 0
        with torch.no_grad():
            for param, shape, size in zip(parameters, shapes, sizes):
                chunk = torch.from_numpy(x[offset : offset + size].reshape(shape).copy())
                param.copy_(chunk)
                offset += size

    def fn(x: np.ndarray) -> tuple[float, np.ndarray]:
        write(x)
        for param in parameters:
            param.grad = None
        loss = loss_fn()
        loss.backward()
        grads = [
            (param.grad if param.grad is not None else torch.zeros_like(param))
            .detach()
            .numpy()
            .ravel()
            for param in parameters
        ]
        return float(loss.detach()), np.concatenate(grads)

    def value_fn(x: np.ndarray) -> float:
        write(x)
        with torch.no_grad():
            return float(loss_fn())

    point = np.concatenate([p.detach().numpy().ravel() for p in parameters])
    return point, fn, value_fn
