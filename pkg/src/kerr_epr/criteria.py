"""Entanglement, EPR and teleportation figures computed from the variance set.

Normalisation: ``v_sum_plus`` and ``v_diff_minus`` are two-beam
normalised; the inferred (conditional) variances of one beam are in
single-beam shot-noise units and are therefore twice as large.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .quadrature_core import GaussianState, StateError, carrier_coefficients

NONSEPARABLE_BOUND = 2.0
EPR_BOUND = 1.0
CLASSICAL_FIDELITY = 0.5
NO_CLONING_FIDELITY = 2.0 / 3.0


def _positive(*values: float) -> None:
    for v in values:
        if not v > 0:
            raise ValueError(f"variances must be positive, got {v}")


def nonseparability(v_sum_plus: float, v_diff_minus: float) -> tuple[float, bool]:
    """Sum criterion; ``True`` when the value certifies an inseparable state (< 2)."""
    _positive(v_sum_plus, v_diff_minus)
    value = v_sum_plus + v_diff_minus
    return value, value < NONSEPARABLE_BOUND


def conditional_variances_unity_gain(v_sum_plus: float, v_diff_minus: float) -> tuple[float, float]:
    _positive(v_sum_plus, v_diff_minus)
    return 2.0 * v_sum_plus, 2.0 * v_diff_minus


def epr_product_unity_gain(v_sum_plus: float, v_diff_minus: float) -> tuple[float, bool]:
    """Product of the unity-gain inferred variances of one beam; EPR when < 1."""
    c_plus, c_minus = conditional_variances_unity_gain(v_sum_plus, v_diff_minus)
    product = c_plus * c_minus
    return product, product < EPR_BOUND


def conditional_variance_optimal_gain(state: GaussianState, quadrature: str, target_mode: str = "a",
                                      reference_mode: str | None = None) -> float:
    """Residual variance of ``target_mode`` after the best linear estimate from the partner beam.

    ``V_t - C**2 / V_r`` with carrier-frame quadratures of the same sign.
    """
    if quadrature not in ("+", "-"):
        raise ValueError("quadrature must be '+' or '-'")
    if reference_mode is None:
        others = [m for m in state.modes if m != target_mode]
        if len(others) != 1:
            raise StateError("reference mode is ambiguous; pass reference_mode")
        reference_mode = others[0]
    ct = carrier_coefficients(state, {(target_mode, quadrature): 1.0})
    cr = carrier_coefficients(state, {(reference_mode, quadrature): 1.0})
    v_t = float(ct @ state.cov @ ct)
    v_r = float(cr @ state.cov @ cr)
    c = float(ct @ state.cov @ cr)
    if v_r == 0:
        raise StateError("reference variance is zero")
    return v_t - c * c / v_r


def teleportation_fidelity(v_sum_plus: float, v_diff_minus: float) -> float:
    """Unity-gain coherent-state teleportation fidelity for a symmetric Gaussian resource."""
    if v_sum_plus < 0 or v_diff_minus < 0:
        raise ValueError("variances must be non-negative")
    return 1.0 / math.sqrt((1.0 + v_sum_plus) * (1.0 + v_diff_minus))


def _partials(tag: str, values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if tag == "sum":
        return np.ones_like(x)
    if tag == "product":
        return np.array([np.prod(np.delete(x, k)) for k in range(x.size)])
    if tag == "epr_product":
        a, b = x
        return np.array([4.0 * b, 4.0 * a])
    if tag == "fidelity":
        a, b = x
        f = teleportation_fidelity(a, b)
        return np.array([-0.5 * f / (1.0 + a), -0.5 * f / (1.0 + b)])
    raise ValueError(f"unknown propagation tag {tag!r}")


def propagate_uncertainty(values: Sequence[float], errs: Sequence[float], tag: str) -> float:
    """First-order error for independent inputs.

    ``tag`` is one of ``sum``, ``product``, ``epr_product`` (``4 x y``)
    or ``fidelity``.
    """
    e = np.asarray(errs, dtype=float)
    if np.any(e < 0):
        raise ValueError("errors must be non-negative")
    g = _partials(tag, values)
    return float(np.sqrt(np.sum((g * e) ** 2)))


@dataclass(frozen=True)
class CriteriaReport:
    v_sum_plus: float
    v_diff_minus: float
    v_sum_plus_err: float
    v_diff_minus_err: float
    sum_value: float
    sum_err: float
    nonseparable: bool
    epr_product: float
    epr_product_err: float
    epr_demonstrated: bool
    conditional_plus: float
    conditional_minus: float
    gain: str
    fidelity: float
    fidelity_err: float
    above_classical: bool
    above_no_cloning: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["normalisation"] = ("v_sum_plus, v_diff_minus: two-beam shot noise; "
                              "conditional_plus/minus: single-beam shot noise (factor 2)")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        rows = [
            ("V_sum+", self.v_sum_plus, self.v_sum_plus_err, ""),
            ("V_diff-", self.v_diff_minus, self.v_diff_minus_err, ""),
            ("sum criterion", self.sum_value, self.sum_err,
             "nonseparable (< 2)" if self.nonseparable else "not certified (>= 2)"),
            (f"EPR product ({self.gain} gain)", self.epr_product, self.epr_product_err,
             "EPR (< 1)" if self.epr_demonstrated else "no EPR (>= 1)"),
            ("fidelity F", self.fidelity, self.fidelity_err,
             ("> 2/3" if self.above_no_cloning else "> 1/2" if self.above_classical else "classical")),
        ]
        out = [f"{'quantity':<26}{'value':>10}{'err':>10}  verdict"]
        for name, v, e, verdict in rows:
            out.append(f"{name:<26}{v:>10.4f}{e:>10.4f}  {verdict}")
        return "\n".join(out)


def evaluate(v_sum_plus: float, v_diff_minus: float, v_sum_plus_err: float = 0.0,
             v_diff_minus_err: float = 0.0) -> CriteriaReport:
    values = (v_sum_plus, v_diff_minus)
    errs = (v_sum_plus_err, v_diff_minus_err)
    s, ok_s = nonseparability(*values)
    p, ok_p = epr_product_unity_gain(*values)
    c_plus, c_minus = conditional_variances_unity_gain(*values)
    f = teleportation_fidelity(*values)
    return CriteriaReport(
        v_sum_plus=v_sum_plus, v_diff_minus=v_diff_minus,
        v_sum_plus_err=v_sum_plus_err, v_diff_minus_err=v_diff_minus_err,
        sum_value=s, sum_err=propagate_uncertainty(values, errs, "sum"), nonseparable=ok_s,
        epr_product=p, epr_product_err=propagate_uncertainty(values, errs, "epr_product"),
        epr_demonstrated=ok_p, conditional_plus=c_plus, conditional_minus=c_minus, gain="unity",
        fidelity=f, fidelity_err=propagate_uncertainty(values, errs, "fidelity"),
        above_classical=f > CLASSICAL_FIDELITY, above_no_cloning=f > NO_CLONING_FIDELITY,
    )

