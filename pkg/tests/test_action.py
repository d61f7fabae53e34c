"""Quadratic actions, Gaussian regularizers, and oscillatory means."""

import numpy as np
import pytest

from diracmean import (
    CustomAction,
    StoppingRule,
    boltzmann_policy,
    convergent_source,
    cylinder_function,
    fresnel_limit_scan,
    gaussian_regularizer,
    halton_source,
    normal_quantiles,
    oscillatory_mean,
    oscillatory_policy,
    pullback_source,
    quadratic_action,
    run,
)
from diracmean.errors import (
    AsymmetricMatrix,
    CertificationError,
    NonpositiveWidth,
    RankMismatch,
)
from diracmean.oracle import complex_gaussian_moment

F_X1SQ = cylinder_function(1, lambda x: x[:, 0] ** 2, "x1^2")
FULL = lambda n: StoppingRule(min_samples=n)  # noqa: E731


def ev(action, *coords):
    return float(action(np.asarray([coords], dtype=float))[0])


# ---------------------------------------------------------------------------
# actions and regularizers


def test_quadratic_action_hand_values():
    half_square = quadratic_action([[1.0]])
    assert ev(half_square, 2.0) == 2.0
    const = quadratic_action([[0.0]], constant=np.pi)
    assert ev(const, 0.3) == np.pi
    iso2 = quadratic_action(np.eye(2))
    assert ev(iso2, 1.0, 1.0) == 1.0
    with_linear = quadratic_action([[2.0]], [1.0], 0.5)
    assert ev(with_linear, 3.0) == 9.0 + 3.0 + 0.5


def test_constant_pi_action_flips_every_weight():
    pol = oscillatory_policy(quadratic_action([[0.0]], constant=np.pi))
    w = pol.weights(halton_source(0).block(0, 16, 1))
    assert np.allclose(w, -1.0)


def test_quadratic_action_rejects_asymmetry_and_large_rank():
    with pytest.raises(AsymmetricMatrix):
        quadratic_action([[1.0, 0.2], [0.1, 1.0]])
    with pytest.raises(ValueError):
        quadratic_action(np.eye(17))


def test_custom_action_evaluates_declared_rank():
    act = CustomAction(lambda x: np.abs(x[:, 0]) ** 3, rank=1, label="cubic")
    assert ev(act, -2.0) == 8.0


def test_gaussian_regularizer_values_and_product_structure():
    reg = gaussian_regularizer([1.0])
    assert reg.value(np.array([[0.0]]))[0] == 1.0
    assert reg.value(np.array([[1.0]]))[0] == pytest.approx(np.exp(-0.5), rel=1e-15)
    reg2 = gaussian_regularizer([1.0, 2.0])
    assert reg2.value(np.array([[1.0, 2.0]]))[0] == pytest.approx(np.exp(-1.0), rel=1e-15)
    # product structure: log xi(x) = sum_k log xi_k(x_k)
    pts = np.random.default_rng(2).normal(size=(32, 2))
    joint = np.log(reg2.value(pts))
    split = np.log(reg2.factor(0, pts[:, 0])) + np.log(reg2.factor(1, pts[:, 1]))
    assert np.max(np.abs(joint - split)) <= 1e-12


def test_gaussian_regularizer_quantiles_are_normal():
    reg = gaussian_regularizer([2.0])
    q = reg.quantiles()
    assert q.quantile(0, 0.5) == 0.0
    assert q.quantile(0, 0.8413447447) == pytest.approx(2.0, abs=1e-6)


def test_gaussian_regularizer_rejects_nonpositive_width():
    with pytest.raises(NonpositiveWidth):
        gaussian_regularizer([1.0, -0.5])
    with pytest.raises(NonpositiveWidth):
        gaussian_regularizer([])


# ---------------------------------------------------------------------------
# oscillatory means


def test_oscillatory_mean_plain_gaussian_second_moment():
    report = oscillatory_mean(
        halton_source(1), quadratic_action([[0.0]]), gaussian_regularizer([1.0]),
        F_X1SQ, 10**6, FULL(10**6),
    )
    assert abs(report.final_estimate - 1.0) <= 5e-3


def test_oscillatory_mean_complex_gaussian_second_moment():
    report = oscillatory_mean(
        halton_source(1), quadratic_action([[1.0]]), gaussian_regularizer([1.0]),
        F_X1SQ, 10**6, FULL(10**6),
    )
    assert abs(report.final_estimate - (0.5 - 0.5j)) <= 5e-3


def test_oscillatory_mean_normalization_is_exact():
    one = cylinder_function(0, 1.0, "one")
    report = oscillatory_mean(
        halton_source(1), quadratic_action([[2.5]], constant=1.1),
        gaussian_regularizer([1.3]), one, 2000,
    )
    assert report.final_estimate == 1 + 0j


def test_oscillatory_mean_agrees_with_wick_rotated_route():
    # S = 0 oscillatory estimate vs the positive-weight route on the
    # same pullback points with weights exp(-S), S = 0
    src = pullback_source(halton_source(1), normal_quantiles())
    zero = quadratic_action([[0.0]])
    boltz = run(src, boltzmann_policy(zero), F_X1SQ, 10**5, FULL(10**5))
    osc = oscillatory_mean(
        halton_source(1), zero, gaussian_regularizer([1.0]), F_X1SQ, 10**5, FULL(10**5),
    )
    assert abs(osc.final_estimate - boltz.final_estimate) <= 1e-12
    assert abs(osc.final_estimate - 1.0) <= 2e-2


def test_phase_shift_gauge_invariance():
    base = halton_source(1)
    reg = gaussian_regularizer([1.0])
    rule = StoppingRule(min_samples=10**4)
    plain = oscillatory_mean(base, quadratic_action([[1.0]]), reg, F_X1SQ,
                             10**4, rule, skip_certification=True, trace_stride=500)
    shifted = oscillatory_mean(base, quadratic_action([[1.0]], constant=0.77), reg,
                               F_X1SQ, 10**4, rule, skip_certification=True,
                               trace_stride=500)
    for a, b in zip(plain.trace, shifted.trace):
        assert abs(a.estimate - b.estimate) <= 1e-12 * abs(a.estimate)


def test_partition_function_conditioning_matches_closed_form():
    # |Z_m| / sum|w| approaches |1 + i a s^2|^{-1/2} = 2^{-1/4} for a = s = 1
    report = oscillatory_mean(
        halton_source(1), quadratic_action([[1.0]]), gaussian_regularizer([1.0]),
        F_X1SQ, 10**6, FULL(10**6),
    )
    target = 2.0 ** -0.25
    assert abs(report.trace[-1].den_ratio - target) <= 0.1 * target


def test_oscillatory_mean_requires_wide_enough_regularizer():
    with pytest.raises(RankMismatch):
        oscillatory_mean(
            halton_source(1), quadratic_action(np.eye(2)), gaussian_regularizer([1.0]),
            F_X1SQ, 2000, skip_certification=True,
        )


def test_oscillatory_mean_certifies_the_base_source():
    bad = convergent_source(0.3, 0.5, 0.0)
    with pytest.raises(CertificationError):
        oscillatory_mean(
            bad, quadratic_action([[1.0]]), gaussian_regularizer([1.0]),
            F_X1SQ, 2000,
        )
    # the flag skips the check; the constant point makes a defined ratio
    report = oscillatory_mean(
        bad, quadratic_action([[1.0]]), gaussian_regularizer([1.0]),
        F_X1SQ, 2000, skip_certification=True,
    )
    assert report.final_estimate is not None


def test_oscillatory_mean_rejects_unknown_route():
    with pytest.raises(ValueError):
        oscillatory_mean(
            halton_source(1), quadratic_action([[1.0]]), gaussian_regularizer([1.0]),
            F_X1SQ, 2000, route="sideways", skip_certification=True,
        )


# ---------------------------------------------------------------------------
# width scan


def test_fresnel_scan_values_and_trend():
    scan = fresnel_limit_scan(
        halton_source(1), quadratic_action([[1.0]]), [1.0, 2.0],
        budget=10**6, rule=FULL(10**6), skip_certification=True,
    )
    (s1, r1), (s2, r2) = scan
    assert (s1, s2) == (1.0, 2.0)
    assert abs(r1.final_estimate - complex_gaussian_moment(1.0, 1.0, 2)) <= 5e-3
    assert abs(r2.final_estimate - complex_gaussian_moment(1.0, 2.0, 2)) <= 1e-2
    limit = -1j  # unregularized value for curvature 1
    assert abs(r2.final_estimate - limit) < abs(r1.final_estimate - limit)


def test_fresnel_scan_validates_inputs():
    with pytest.raises(ValueError):
        fresnel_limit_scan(halton_source(1), quadratic_action([[0.0]]), [1.0, 2.0])
    with pytest.raises(ValueError):
        fresnel_limit_scan(halton_source(1), quadratic_action([[1.0]]), [2.0, 1.0])
    with pytest.raises(RankMismatch):
        fresnel_limit_scan(halton_source(1), quadratic_action(np.eye(2)), [1.0, 2.0])
