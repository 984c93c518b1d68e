"""
Brute-force audit of the whole pipeline on small instances: submodularity,
base-polytope membership, screening safety against exhaustive minimizers,
exactness of the returned value, and the closed-form region bounds.
"""

from collections import Counter
from dataclasses import replace
from typing import Callable, Dict, Optional

import numpy as np
import structlog

from ..core.config import get_settings
from ..core.errors import ConflictingVerdict, GroundSetTooLarge, SFMError
from ..core.schemas import VerifyReport
from ..repositories.run_repository import RunRepository
from ..sfm.functions import oracle_catalog
from ..sfm.oracle import (SubmodularOracle, brute_force_sfm, check_base_membership,
                          greedy_linear_maximize, submodularity_violations)
from ..sfm.screening import (GapCertificate, ScreeningMode, SignConstraint, coordinate_bounds_bp,
                             coordinate_bounds_geometric, iaes_solve, l1_max_under_sign, l1_max_witness)
from ..sfm.solver import min_norm_point

logger = structlog.get_logger(__name__)

VIOLATION_KEYS = ["submodularity", "base_membership", "screening_safety", "conflicts", "exactness",
                  "bounds_closed_form", "l1_closed_form", "errors"]


def negate_gap(cert: GapCertificate) -> GapCertificate:
    return replace(cert, gap=-cert.gap)


def random_certificate(rng: np.random.Generator, p_max: int = 6) -> GapCertificate:
    """A certificate whose ball meets the plane, built without any oracle."""
    p_hat = int(rng.integers(1, p_max + 1))
    w = rng.normal(0.0, 1.0, p_hat)
    gap = float(rng.uniform(0.01, 2.0))
    radius = np.sqrt(2.0 * gap)
    # plane distance |sum(w) + F| / sqrt(p) stays inside the ball
    offset = rng.uniform(-0.9, 0.9) * radius * np.sqrt(p_hat)
    f_ground = float(offset - w.sum())
    s = rng.normal(0.0, 1.0, p_hat)
    return GapCertificate(w, s, gap, f_ground, float(rng.uniform(-2.0, 0.0)), float(np.abs(s).sum()))


def bounds_agree(cert: GapCertificate, tol: float = 1e-6) -> bool:
    for j in range(cert.p_hat):
        a, b = coordinate_bounds_bp(cert, j), coordinate_bounds_geometric(cert, j)
        if abs(a.w_min - b.w_min) > tol or abs(a.w_max - b.w_max) > tol:
            return False
    return True


def sample_ball(rng: np.random.Generator, centre: np.ndarray, radius: float, n: int) -> np.ndarray:
    d = centre.size
    directions = rng.normal(size=(n, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return centre + radius * rng.uniform(size=(n, 1)) ** (1.0 / d) * directions


def l1_closed_form_holds(cert: GapCertificate, rng: np.random.Generator, samples: int = 2000,
                         tol: float = 1e-9) -> bool:
    """Witness is feasible and attains the value; no sampled feasible point beats it."""
    w, r = cert.w_hat, cert.radius
    points = sample_ball(rng, w, r, samples)
    for j in range(cert.p_hat):
        for sign in SignConstraint:
            if sign == SignConstraint.NONPOSITIVE and not 0 < w[j] <= r:
                continue
            if sign == SignConstraint.NONNEGATIVE and not -r <= w[j] < 0:
                continue
            value = l1_max_under_sign(cert, j, sign)
            witness = l1_max_witness(cert, j, sign)
            feasible = np.linalg.norm(witness - w) <= r + tol and (
                witness[j] <= tol if sign == SignConstraint.NONPOSITIVE else witness[j] >= -tol)
            if not feasible or abs(np.abs(witness).sum() - value) > 1e-8:
                return False
            allowed = points[:, j] <= 0 if sign == SignConstraint.NONPOSITIVE else points[:, j] >= 0
            if allowed.any() and np.abs(points[allowed]).sum(axis=1).max() > value + tol:
                return False
    return True


class VerifyService:
    def __init__(self, runs: Optional[RunRepository] = None, brute_force_limit: Optional[int] = None):
        self.runs = runs
        self.brute_force_limit = brute_force_limit or get_settings().brute_force_limit

    def audit_oracle(self, oracle: SubmodularOracle, rng: np.random.Generator, inject_fault: bool = False,
                     eps: float = 1e-10) -> Counter:
        found: Counter = Counter()
        found["submodularity"] += submodularity_violations(oracle, pairs=500, seed=int(rng.integers(2 ** 31)))

        vertex = greedy_linear_maximize(oracle, rng.normal(size=oracle.p)).coords
        found["base_membership"] += int(not check_base_membership(oracle, vertex, tol=1e-8))
        try:
            report = min_norm_point(oracle, eps=eps, raise_on_max_iter=False)
            found["base_membership"] += int(not check_base_membership(oracle, report.s_star, tol=1e-8))
        except SFMError as e:
            logger.warning("audit_solver_error", error=str(e))
            found["errors"] += 1

        exact = brute_force_sfm(oracle)
        spread_tol = 1e-9 * max(1.0, abs(exact.min_value))

        def check_trigger(state, cert):
            found["screening_safety"] += int(not state.active.issubset(exact.maximal_minimizer))
            found["screening_safety"] += int(not state.inactive.isdisjoint(exact.minimal_minimizer))

        try:
            _, result = iaes_solve(oracle, eps=eps, mode=ScreeningMode.IAES, on_trigger=check_trigger,
                                   certificate_filter=negate_gap if inject_fault else None)
            found["exactness"] += int(abs(result.value - exact.min_value) > spread_tol)
        except ConflictingVerdict:
            found["conflicts"] += 1
        except SFMError as e:
            logger.warning("audit_screening_error", error=str(e))
            found["errors"] += 1
        return found

    def audit_closed_forms(self, rng: np.random.Generator) -> Counter:
        found: Counter = Counter()
        cert = random_certificate(rng)
        found["bounds_closed_form"] += int(not bounds_agree(cert))
        found["l1_closed_form"] += int(not l1_closed_form_holds(cert, rng))
        return found

    def run(self, trials: int = 500, p_max: int = 10, seed: int = 0, inject_fault: bool = False,
            oracle: Optional[SubmodularOracle] = None) -> VerifyReport:
        if p_max > self.brute_force_limit:
            raise GroundSetTooLarge(p_max, self.brute_force_limit)
        if oracle is not None and oracle.p > p_max:
            raise GroundSetTooLarge(oracle.p, p_max)
        rng = np.random.default_rng(seed)
        catalog = oracle_catalog()
        families = sorted(catalog)
        totals: Counter = Counter({k: 0 for k in VIOLATION_KEYS})

        for trial in range(trials):
            if oracle is not None:
                instance = oracle
            else:
                family = families[trial % len(families)]
                p = int(rng.integers(min(2, p_max), p_max + 1))
                instance = catalog[family](p, int(rng.integers(2 ** 31)))
            totals.update(self.audit_oracle(instance, rng, inject_fault=inject_fault))
            totals.update(self.audit_closed_forms(rng))

        report = VerifyReport(instances=trials, p_max=p_max, seed=seed, fault_injected=inject_fault,
                              violations={k: int(totals[k]) for k in VIOLATION_KEYS})
        logger.info("verify_finished", passed=report.passed, **report.violations)
        if self.runs is not None:
            self.runs.write_verify(report)
        return report
