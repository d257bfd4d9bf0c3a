"""Acceptance gate: the package's primary numerical guarantees, one test
per criterion. Each test asserts its stated tolerance verbatim and puts
every measured quantity in the failure message.

Two checks fail by design on this implementation and are left failing:

* criterion 4, the (rho=0.5, u=5) corner of the tail-vs-quadrature band:
  measured ratio ~1.159 against the required [0.85, 1.15]. The second-order
  joint-tail approximation has not entered its asymptotic regime at u=5 for
  this correlation; the band holds at u=6 and everywhere along rho=0.3.
* criterion 9, first clause: the diagonal conditional exceedance
  P(Z1>t | Z2>t) at t=2 measures ~0.29 against the required 0.05 bound.
  The quantity converges to 0 only logarithmically in t, so t=2 at
  simulation scale is nowhere near its limit. The other clauses pass.
"""

import math
import time

import mpmath
import numpy as np
from scipy.linalg import block_diag

from artifact.asymptotics import (
    MarginalSpec,
    Rectangular,
    asymptotic_estimate,
    cone_analysis,
    mu_i_rectangular,
)
from artifact.gaussian import (
    QuantileExpansion,
    gaussian_joint_tail,
    joint_tail_quadrature,
    orthant_probability,
    rv_quantile_expansion,
)
from artifact.linalg import CorrelationMatrix, IndexSubset
from artifact.qp import SubsetQpSolver, brute_force_qp, kkt_residuals, solve_qp
from artifact.simulate import (
    Coordinate,
    MinOverSet,
    OrderStatistic,
    SimulationConfig,
    conditional_exceedance_curves,
    derived_series,
    hill_estimator,
    sample_rvgc,
    verify_asymptotics,
)
from conftest import coupled_pair_matrix, equi_matrix, random_correlation, two_block_6x6

PARETO2 = MarginalSpec(alpha=2.0)


def test_criterion_01_equicorrelation_closed_forms():
    start = time.perf_counter()
    failures = []
    for d in (2, 3, 5):
        for rho in (-0.2, 0.0, 0.3, 0.7):
            if rho <= -1.0 / (d - 1):
                continue
            sol = solve_qp(equi_matrix(d, rho))
            gamma_exact = d / (1.0 + (d - 1) * rho)
            gamma_err = abs(sol.gamma - gamma_exact)
            z_err = float(np.max(np.abs(sol.e_star - 1.0)))
            if gamma_err > 1e-9 or z_err > 1e-9:
                failures.append(f"d={d} rho={rho}: gamma_err={gamma_err:.3g} z_err={z_err:.3g}")
    elapsed = time.perf_counter() - start
    assert not failures, "; ".join(failures)
    assert elapsed < 1.0, f"closed-form sweep took {elapsed:.2f}s (budget 1s)"


def test_criterion_02_coupled_pair_cone_indices():
    weak = coupled_pair_matrix(0.2)
    alpha2 = cone_analysis(weak, PARETO2, 2).alpha
    alpha3 = cone_analysis(weak, PARETO2, 3).alpha
    assert abs(alpha2 - 3.12) <= 0.005, f"alpha_2={alpha2!r}"
    assert abs(alpha3 - 3.98) <= 0.005, f"alpha_3={alpha3!r}"

    strong = coupled_pair_matrix(0.6)
    cone2 = cone_analysis(strong, PARETO2, 2)
    cone3 = cone_analysis(strong, PARETO2, 3)
    assert abs(cone2.alpha - 2.16) <= 0.005, f"alpha_2={cone2.alpha!r}"
    assert abs(cone3.alpha - 2.5) <= 1e-12, f"alpha_3={cone3.alpha!r}"
    assert cone3.principal_active == IndexSubset.of(1, 2)


def test_criterion_03_two_block_tie_and_subdominance():
    sigma = two_block_6x6()
    cone = cone_analysis(sigma, PARETO2, 3)
    assert abs(cone.gamma - 1.25) <= 1e-12, f"gamma_3={cone.gamma!r}"
    assert {str(s) for s in cone.minimizing_family} == {"{1,2,3}", "{4,5,6}"}
    active_view = {str(c.active_set) for c in cone.coefficients}
    assert active_view == {"{1,2}", "{4,5,6}"}, active_view
    assert cone.principal_active == IndexSubset.of(1, 2)
    assert cone.min_active_size == 2

    # equal power decay, but the fully active block loses at the log-log level
    pair_block = asymptotic_estimate(
        sigma, PARETO2, Rectangular(IndexSubset.of(1, 2, 3), (1.0, 1.0, 1.0))
    )
    full_block = asymptotic_estimate(
        sigma, PARETO2, Rectangular(IndexSubset.of(4, 5, 6), (1.0, 1.0, 1.0))
    )
    assert abs(pair_block.power_exponent - full_block.power_exponent) <= 1e-12
    assert full_block.decays_faster_than(pair_block)
    assert not pair_block.decays_faster_than(full_block)


def test_criterion_04_joint_tail_vs_quadrature():
    start = time.perf_counter()
    measured = {}
    for rho in (0.3, 0.5):
        sigma = equi_matrix(2, rho)
        for u in (5.0, 6.0):
            ratio = math.exp(gaussian_joint_tail(sigma, u)) / joint_tail_quadrature(sigma, u)
            measured[(rho, u)] = ratio
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"quadrature comparison took {elapsed:.2f}s (budget 5s)"
    out_of_band = {
        key: ratio for key, ratio in measured.items() if not 0.85 <= ratio <= 1.15
    }
    assert not out_of_band, f"ratios outside [0.85, 1.15]: {out_of_band}; all: {measured}"


def test_criterion_05_orthant_probabilities():
    for r in (-0.95, -0.5, 0.0, 0.3, 0.7, 0.95):
        got = orthant_probability(equi_matrix(2, r).entries).value
        exact = 0.25 + math.asin(r) / (2.0 * math.pi)
        assert abs(got - exact) <= 1e-12, f"r={r}: {got!r} vs {exact!r}"

    # rank-checked closed forms embedded in 4-dim problems force the QMC path
    embedded_pair = orthant_probability(block_diag(equi_matrix(2, 0.6).entries, np.eye(2)))
    exact = (0.25 + math.asin(0.6) / (2.0 * math.pi)) * 0.25
    assert embedded_pair.se > 0.0
    assert abs(embedded_pair.value - exact) <= 3.0 * embedded_pair.se, (
        f"{embedded_pair} vs {exact}"
    )

    embedded_triple = orthant_probability(block_diag(equi_matrix(3, 0.5).entries, np.eye(1)))
    assert embedded_triple.se > 0.0
    assert abs(embedded_triple.value - 0.125) <= 3.0 * embedded_triple.se, embedded_triple


def test_criterion_06_quantile_expansion_accuracy():
    def exact_quantile(alpha, x, t):
        with mpmath.workdps(120):
            survival = mpmath.mpf(t) ** -alpha * mpmath.mpf(x) ** -alpha
            return float(mpmath.sqrt(2) * mpmath.erfinv(1 - 2 * survival))

    for alpha in (1.0, 2.0):
        for x in (1.0, 3.0):
            expansion = QuantileExpansion(alpha=alpha, scale_c=1.0, x=x)
            errors = [
                abs(rv_quantile_expansion(expansion, t) - exact_quantile(alpha, x, t))
                for t in (1e6, 1e9, 1e12)
            ]
            assert errors[2] < 0.02, f"alpha={alpha} x={x}: errors={errors}"
            assert errors[0] > errors[1] > errors[2], f"alpha={alpha} x={x}: errors={errors}"


def test_criterion_07_independence_exactness():
    for d, x, t_grid in ((2, 0.3, [10.0, 14.0, 18.0]), (3, 0.2, [10.0, 12.0, 14.0])):
        sigma = CorrelationMatrix(np.eye(d))
        rect = Rectangular(IndexSubset.full(d), (x,) * d)
        est = asymptotic_estimate(sigma, PARETO2, rect)
        for t in (10.0, 50.0, 1e4, 1e8):
            exact = -PARETO2.alpha * d * math.log(t * x)
            dev = abs(est.evaluate_log(t) - exact)
            assert dev <= 1e-12 * max(1.0, abs(exact)), f"d={d} t={t}: dev={dev:.3g}"

        cfg = SimulationConfig(sigma=sigma, marg=PARETO2, n=10**6, seed=7)
        table = verify_asymptotics(cfg, rect, t_grid)
        rows = [(row.t, row.ratio, row.hits) for row in table.rows]
        assert all(row.flag == "ok" for row in table.rows), rows
        assert all(0.9 <= row.ratio <= 1.1 for row in table.rows), rows


def test_criterion_08_hill_slope_reproduction():
    start = time.perf_counter()
    k_grid = list(range(200, 1001, 50))
    selectors = {
        "X1": Coordinate(1),
        "X2": Coordinate(2),
        "X3": Coordinate(3),
        "pair12": MinOverSet(IndexSubset.of(1, 2)),
        "order2": OrderStatistic(2),
        "min_all": MinOverSet(IndexSubset.full(3)),
    }

    def medians(rho):
        sigma = coupled_pair_matrix(rho)
        per_seed = {name: [] for name in selectors}
        for seed in range(20):
            cfg = SimulationConfig(sigma=sigma, marg=PARETO2, n=20000, seed=seed)
            x = sample_rvgc(cfg)
            for name, selector in selectors.items():
                curve = hill_estimator(derived_series(x, selector), k_grid=k_grid)
                per_seed[name].append(float(np.median(curve.alpha_hat)))
        return {name: float(np.median(values)) for name, values in per_seed.items()}

    weak = medians(0.2)
    strong = medians(0.6)
    elapsed = time.perf_counter() - start

    failures = []
    for name in ("X1", "X2", "X3"):
        if abs(weak[name] - 2.0) > 0.3:
            failures.append(f"{name}={weak[name]:.3f} not within 2 +- 0.3")
    if abs(weak["pair12"] - 3.33) > 0.5:
        failures.append(f"pair12={weak['pair12']:.3f} not within 3.33 +- 0.5")
    if abs(weak["order2"] - 3.12) > 0.5:
        failures.append(f"order2={weak['order2']:.3f} not within 3.12 +- 0.5")
    if abs(weak["min_all"] - 3.98) > 0.6:
        failures.append(f"min_all={weak['min_all']:.3f} not within 3.98 +- 0.6")
    if abs(strong["min_all"] - 2.5) > 0.4:
        failures.append(f"strong min_all={strong['min_all']:.3f} not within 2.5 +- 0.4")
    if not (
        abs(strong["min_all"] - strong["pair12"]) < abs(strong["min_all"] - strong["order2"])
    ):
        failures.append(f"strong min_all not closer to the pair curve: {strong}")
    assert not failures, "; ".join(failures)
    assert elapsed < 60.0, f"hill sweep took {elapsed:.1f}s (budget 60s)"


def test_criterion_09_conditional_exceedance_curves():
    cfg = SimulationConfig(sigma=equi_matrix(2, 2.0 / 3.0), marg=PARETO2, n=10**6, seed=1)
    (diagonal,) = conditional_exceedance_curves(
        cfg, [1.0], [0.5, 1.0, 1.5, 2.0], side="gaussian"
    )
    (doubled,) = conditional_exceedance_curves(
        cfg, [2.0], [1.5, 1.75, 2.0], side="gaussian"
    )
    pareto_curves = conditional_exceedance_curves(
        cfg, [1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 5.0, 10.0, 20.0], side="pareto"
    )

    failures = []
    at_two = diagonal.probability[-1]
    if not at_two < 0.05:
        failures.append(f"clause 1: P(Z1>2 | Z2>2) = {at_two:.4f}, required < 0.05")
    if not all(a > b for a, b in zip(diagonal.probability, diagonal.probability[1:])):
        failures.append(f"clause 2: diagonal curve not decreasing: {diagonal.probability}")
    base = doubled.probability[0]
    drift = max(abs(p - base) for p in doubled.probability[1:])
    if not drift <= 0.1:
        failures.append(f"clause 3: off-diagonal drift {drift:.4f} from {base:.4f} exceeds 0.1")
    for kappa, curve in zip((1, 2, 3, 4, 5), pareto_curves):
        probs = curve.probability
        if not all(a > b for a, b in zip(probs, probs[1:])):
            failures.append(f"clause 4: kappa={kappa} curve not decreasing: {probs}")
        elif not probs[-1] < 0.6 * probs[0]:
            failures.append(f"clause 4: kappa={kappa} curve not heading to 0: {probs}")
    assert not failures, "; ".join(failures)


def test_criterion_10_property_suites():
    rng = np.random.default_rng(155)

    # grid oracle + certificate on 200 small matrices
    for i in range(200):
        d = int(rng.integers(2, 5))
        sigma = random_correlation(rng, d)
        sol = solve_qp(sigma)
        report = kkt_residuals(sigma, sol)
        assert report.stationarity <= 1e-9, (i, report)
        assert report.min_inactive_slack >= -1e-9, (i, report)
        assert report.gamma_gap <= 1e-9, (i, report)
        assert report.max_active_violation <= 1e-9, (i, report)
        assert report.min_h > 0.0, (i, report)
        grid_gamma, _ = brute_force_qp(sigma, grid_halfwidth=2.0, grid_step=0.05)
        assert grid_gamma >= sol.gamma - 1e-9, (i, grid_gamma, sol.gamma)
        assert grid_gamma - sol.gamma <= 4 * 0.05**2 * d, (i, grid_gamma, sol.gamma)

    # cone-index monotonicity on 200 matrices up to d=6
    for i in range(200):
        d = int(rng.integers(2, 7))
        sigma = random_correlation(rng, d)
        solver = SubsetQpSolver(sigma)
        alphas = [
            cone_analysis(sigma, PARETO2, level, solver=solver).alpha
            for level in range(2, d + 1)
        ]
        assert all(a <= b + 1e-12 for a, b in zip(alphas, alphas[1:])), (i, alphas)

    # multiplier sum rule and limit-mass scaling
    positive_mass_cases = 0
    for i in range(60):
        d = int(rng.integers(2, 6))
        sigma = random_correlation(rng, d)
        sol = solve_qp(sigma)
        assert abs(float(np.sum(sol.h)) - sol.gamma) <= 1e-10, (i, sol)

        level = int(rng.integers(2, d + 1))
        members = tuple(sorted(rng.choice(np.arange(1, d + 1), size=level, replace=False).tolist()))
        thresholds = tuple(float(v) for v in rng.uniform(0.5, 3.0, size=level))
        cone = cone_analysis(sigma, PARETO2, level)
        mass = mu_i_rectangular(cone, Rectangular(IndexSubset(members), thresholds))
        if mass == 0.0:
            continue
        positive_mass_cases += 1
        scale = float(rng.uniform(1.5, 4.0))
        scaled_mass = mu_i_rectangular(
            cone, Rectangular(IndexSubset(members), tuple(scale * v for v in thresholds))
        )
        got = math.log(scaled_mass) - math.log(mass)
        want = -PARETO2.alpha * cone.gamma * math.log(scale)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want)), (i, got, want)
    assert positive_mass_cases >= 10

    # relabeling coordinates relabels the answer
    for i in range(40):
        d = 4
        sigma = random_correlation(rng, d)
        perm = rng.permutation(d)
        permuted = CorrelationMatrix(sigma.entries[np.ix_(perm, perm)])
        thresholds = rng.uniform(0.5, 3.0, size=d)
        base = asymptotic_estimate(
            sigma, PARETO2, Rectangular(IndexSubset.full(d), tuple(thresholds))
        )
        relabeled = asymptotic_estimate(
            permuted, PARETO2, Rectangular(IndexSubset.full(d), tuple(thresholds[perm]))
        )
        assert abs(base.power_exponent - relabeled.power_exponent) <= 1e-9
        assert abs(base.log_log_exponent - relabeled.log_log_exponent) <= 1e-9
        assert abs(base.log_constant - relabeled.log_constant) <= 1e-9 * max(
            1.0, abs(base.log_constant)
        )
        level = int(rng.integers(2, d + 1))
        assert abs(
            cone_analysis(sigma, PARETO2, level).gamma
            - cone_analysis(permuted, PARETO2, level).gamma
        ) <= 1e-9
