"""Brute-force cross-checks of the scalable bounds on tiny networks.

Everything here enumerates the joint configuration chain, so it only runs
for a handful of vertices; in exchange it validates the fast path end to
end: the sandwich lambda_max(abar) <= E[lambda_max(A_G)] <= lambda_max(abar)
+ min f, the probability tail bound behind the penalty, and the agreement
between the enumerated stationary law and the closed-form edge moments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import JointChain, build_joint_chain, mean_stability_abscissa
from .netmodel import EdgeChain, EpidemicParams, SwitchedNetworkSpec, stationary_stats
from .spectral import lambda_max_dense
from .stability import EXP_FLOOR, minimize_penalty

REL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TailCheck:
    """Exact exceedance probabilities against the concentration bound."""

    s_values: np.ndarray
    exact_tail: np.ndarray
    bound: np.ndarray
    max_violation: float
    ok: bool


def check_tail_bound(
    joint: JointChain, delta_u: float, s_values: np.ndarray
) -> TailCheck:
    """Compare P(lambda_max(A_G) > lambda_max(abar) + s), enumerated exactly,
    with the bound 2 n exp(-3 s^2 / (2 s + 6 Delta)) at each requested s."""
    abar = np.tensordot(joint.stationary, joint.configs, axes=1)
    lam_bar = lambda_max_dense(abar)
    lam_all = np.linalg.eigvalsh(joint.configs)[:, -1]
    s = np.asarray(s_values, dtype=float)
    exact = np.array(
        [float(joint.stationary[lam_all > lam_bar + si].sum()) for si in s]
    )
    denom = 2.0 * s + 6.0 * delta_u
    expo = np.where(denom > 0, -3.0 * s * s / np.where(denom > 0, denom, 1.0), 0.0)
    bound = 2.0 * joint.n * np.exp(np.maximum(expo, EXP_FLOOR))
    violation = float((exact - bound).max(initial=-np.inf))
    return TailCheck(
        s_values=s,
        exact_tail=exact,
        bound=bound,
        max_violation=violation,
        ok=violation <= 1e-12,
    )


@dataclass(frozen=True)
class OracleReport:
    """One random instance: enumerated truths next to the fast bounds."""

    n: int
    m: int
    lambda_max_abar: float
    delta_uncertainty: float
    f_min: float
    lhs_upper: float
    e_lambda_max: float
    eta_beta1: float
    sandwich_ok: bool
    tail_ok: bool
    tail_max_violation: float
    abar_consistent: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "lambda_max_abar": self.lambda_max_abar,
            "delta_uncertainty": self.delta_uncertainty,
            "f_min": self.f_min,
            "lhs_upper": self.lhs_upper,
            "e_lambda_max": self.e_lambda_max,
            "eta_beta1": self.eta_beta1,
            "sandwich_ok": self.sandwich_ok,
            "tail_ok": self.tail_ok,
            "tail_max_violation": self.tail_max_violation,
            "abar_consistent": self.abar_consistent,
        }

    @property
    def passed(self) -> bool:
        return self.sandwich_ok and self.tail_ok and self.abar_consistent


def random_small_spec(rng: np.random.Generator) -> SwitchedNetworkSpec:
    """A random binary instance with 2-4 vertices and rates in [0.1, 5]."""
    n = int(rng.integers(2, 5))
    edges = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if len(edges) > 0 and rng.random() < 0.15:
                continue  # drop some edges so not every instance is complete
            p, q = rng.uniform(0.1, 5.0, size=2)
            edges.append(EdgeChain(i=i, j=j, p_rate=float(p), q_rate=float(q)))
    return SwitchedNetworkSpec(n=n, edges=tuple(edges))


def check_instance(spec: SwitchedNetworkSpec) -> OracleReport:
    """Run every cross-check on one small instance."""
    stats = stationary_stats(spec)
    lam_bar = lambda_max_dense(stats.abar)
    pm = minimize_penalty(spec.n, stats.delta_uncertainty)
    joint = build_joint_chain(spec)

    abar_enum = np.tensordot(joint.stationary, joint.configs, axes=1)
    abar_consistent = float(np.abs(abar_enum - stats.abar).max()) <= 1e-10

    lam_all = np.linalg.eigvalsh(joint.configs)[:, -1]
    e_lam = float(joint.stationary @ lam_all)
    tol = REL_TOL * max(1.0, abs(lam_bar), abs(e_lam))
    sandwich_ok = (lam_bar - tol <= e_lam) and (e_lam <= lam_bar + pm.f_min + tol)

    s_top = max(1.0, float(lam_all.max()) - lam_bar)
    tail = check_tail_bound(
        joint, stats.delta_uncertainty, np.linspace(0.0, 1.5 * s_top, 20)
    )
    eta = mean_stability_abscissa(joint, EpidemicParams(beta=1.0, delta=1.0))
    return OracleReport(
        n=spec.n,
        m=len(spec.edges),
        lambda_max_abar=lam_bar,
        delta_uncertainty=stats.delta_uncertainty,
        f_min=pm.f_min,
        lhs_upper=lam_bar + pm.f_min,
        e_lambda_max=e_lam,
        eta_beta1=eta,
        sandwich_ok=bool(sandwich_ok),
        tail_ok=tail.ok,
        tail_max_violation=tail.max_violation,
        abar_consistent=abar_consistent,
    )


def run_sandwich_suite(count: int = 100, seed: int = 0) -> list[OracleReport]:
    """Random-instance suite; deterministic for a fixed (count, seed)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    return [check_instance(random_small_spec(rng)) for _ in range(count)]


def suite_summary(reports: list[OracleReport]) -> dict:
    failures = sum(0 if r.passed else 1 for r in reports)
    return {
        "count": len(reports),
        "passed": len(reports) - failures,
        "failures": failures,
    }
