# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from maiplab.autodiff.tensor import no_grad


logger = logging.getLogger(__name__)


def num_grad(func, tensor, indices=None, delta=1e-4):
    """
    Central finite differences of a scalar function w.r.t. entries of `tensor`.

    (f(X + delta) - f(X - delta)) / (2 delta), evaluated entry by entry with
    `tensor.data` perturbed in place and restored afterwards.

    Args:
        func: callable returning a scalar (float or Tensor) for the current parameter values
        tensor: Tensor to perturb
        indices: flat indices to check (all entries when None)
    Returns:
        array of numerical derivatives, one per index
    """
    flat = tensor.data.reshape(-1)
    indices = np.arange(flat.size) if indices is None else np.asarray(indices)
    out = np.zeros(len(indices))
    with no_grad():
        for k, i in enumerate(indices):
            orig = flat[i]
            flat[i] = orig + delta
            f_plus = _scalar(func())
            flat[i] = orig - delta
            f_minus = _scalar(func())
            flat[i] = orig
            out[k] = (f_plus - f_minus) / (2.0 * delta)
    return out


def _scalar(value):
    return float(value.item()) if hasattr(value, 'item') else float(value)


def relative_error(analytic, numeric, floor):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


@dataclass
class GradCheckResult:
    name: str
    checked: int
    max_rel_error: float
    worst_index: int
    passed: bool


@dataclass
class GradCheckReport:
    results: List[GradCheckResult] = field(default_factory=list)
    loss: float = 0.0
    rtol: float = 1e-3

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def max_rel_error(self):
        return max((r.max_rel_error for r in self.results), default=0.0)

    def format(self):
        lines = [f"{'parameter':<28} {'checked':>8} {'max rel err':>12}  status"]
        for r in self.results:
            lines.append(f"{r.name:<28} {r.checked:>8d} {r.max_rel_error:>12.3e}  {'ok' if r.passed else 'FAIL'}")
        lines.append(f"loss {self.loss:.6g}, tolerance {self.rtol:g}: {'PASS' if self.passed else 'FAIL'}")
        return '\n'.join(lines)


def check_gradients(loss_fn, named_params, delta=1e-4, rtol=1e-3, max_entries=None, seed=0):
    """
    Compare reverse-mode gradients of `loss_fn` with central finite differences.

    The relative error of each entry is |a - n| / max(|a|, |n|, floor), where the
    floor 1e-8 * max(1, |loss|) keeps entries whose derivative is zero up to
    rounding from dominating the report.

    Args:
        loss_fn: callable building the scalar loss Tensor from the current parameters
        named_params: iterable of (name, Tensor)
        max_entries: check at most this many randomly chosen entries per tensor (all when None)
        seed: seed of the entry sampling
    """
    named_params = list(named_params)
    for _, p in named_params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    loss_value = loss.item()
    floor = 1e-8 * max(1.0, abs(loss_value))
    rng = np.random.default_rng(seed)

    report = GradCheckReport(loss=loss_value, rtol=rtol)
    for name, p in named_params:
        if max_entries is None or p.size <= max_entries:
            indices = np.arange(p.size)
        else:
            indices = np.sort(rng.choice(p.size, size=max_entries, replace=False))
        analytic = p.grad.reshape(-1)[indices].copy()
        numeric = num_grad(loss_fn, p, indices, delta)
        errors = relative_error(analytic, numeric, floor)
        worst = int(np.argmax(errors)) if errors.size else 0
        result = GradCheckResult(name, len(indices), float(errors.max(initial=0.0)),
                                 int(indices[worst]) if errors.size else -1,
                                 bool(np.all(errors < rtol)))
        if not result.passed:
            logger.warning("gradient mismatch in %s at entry %d: analytic %.6e numeric %.6e",
                           name, result.worst_index, analytic[worst], numeric[worst])
        report.results.append(result)
    for _, p in named_params:
        p.zero_grad()
    return report
