import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import kstest

from syndatum.datamodel import SeedSpec
from syndatum.densities import (
    BoxSupport,
    LinearTilt1D,
    PiecewiseConstant1D,
    Triangular1D,
    TruncatedNormalDiag,
    UniformBox,
    certify_fidelity_level,
    chi_square_divergence,
    default_c_grid,
    fidelity_tail_probability,
    lemma1_chi2_to_fidelity,
    lemma1_fidelity_to_chi2_bound,
    parse_density,
)
from syndatum.errors import (
    InfiniteDivergence,
    InvalidD,
    InvalidGrid,
    RejectionBudgetExceeded,
    SupportMismatch,
)


def uniform_pm1():
    return UniformBox(BoxSupport((-1.0,), (1.0,)))


def step_density(alpha):
    # 1-alpha on [-1, 0), alpha on [0, 1]
    return PiecewiseConstant1D([-1.0, 0.0, 1.0], [1.0 - alpha, alpha])


def triangular_tail_closed_form(C):
    return (1.0 + 2.0 * C) / (1.0 + C) ** 2


# ---------------------------------------------------------------------------
# pdf
# ---------------------------------------------------------------------------


def test_pdf_uniform_height():
    assert uniform_pm1().pdf(0.3) == pytest.approx(0.5)
    assert uniform_pm1().pdf(1.7) == 0.0


def test_pdf_piecewise_two_level():
    q = step_density(0.75)
    assert q.pdf(0.5) == pytest.approx(0.75)
    assert q.pdf(-0.5) == pytest.approx(0.25)


def test_pdf_triangular():
    assert Triangular1D("increasing").pdf(0.25) == pytest.approx(0.5)
    assert Triangular1D("decreasing").pdf(0.25) == pytest.approx(1.5)


def test_densities_integrate_to_one():
    models = [
        uniform_pm1(),
        step_density(0.3),
        LinearTilt1D(0.4),
        Triangular1D("increasing"),
        TruncatedNormalDiag(BoxSupport((-2.0,), (2.0,)), [1.0], [1.0]),
    ]
    for m in models:
        f = m.factors()[0]
        total, _ = quad(lambda x: float(f.pdf1(x)), f.a, f.b, points=f.knots() or None)
        assert total == pytest.approx(1.0, abs=1e-6)
        xs = np.linspace(f.a, f.b, 501)
        assert np.all(f.pdf1(xs) >= 0.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_uniform_mean():
    d = UniformBox(BoxSupport((0.0,), (2.0,)))
    x = d.sample(10**5, SeedSpec(10))
    assert 0.98 <= x.mean() <= 1.02


def test_sample_trunc_normal_inside_box():
    d = TruncatedNormalDiag(BoxSupport((-2.0, -2.0), (2.0, 2.0)), [1.0, 1.0], [1.0, 1.0])
    x = d.sample(1000, SeedSpec(11))
    assert x.shape == (1000, 2)
    assert np.all((x >= -2.0) & (x <= 2.0))


def test_sample_triangular_mean():
    # E[X] = integral of x * 2x over [0,1] = 2/3
    x = Triangular1D("increasing").sample(10**6, SeedSpec(12))
    assert 0.664 <= x.mean() <= 0.670


def test_sample_marginal_means_close_to_analytic():
    d = TruncatedNormalDiag(BoxSupport((-2.0, -2.0), (2.0, 2.0)), [1.0, 0.0], [1.0, 2.0])
    n = 10**5
    x = d.sample(n, SeedSpec(13))
    for j, f in enumerate(d.factors()):
        tol = 5.0 * math.sqrt(f.variance() / n)
        assert abs(x[:, j].mean() - f.mean()) <= tol


def test_sampling_deterministic():
    d = LinearTilt1D(0.3)
    a = d.sample(1000, SeedSpec(14, 2))
    b = d.sample(1000, SeedSpec(14, 2))
    assert np.array_equal(a, b)


def test_rejection_budget_exceeded():
    d = TruncatedNormalDiag(BoxSupport((8.0,), (8.1,)), [0.0], [1.0])
    with pytest.raises(RejectionBudgetExceeded):
        d.sample(10, SeedSpec(15))


@pytest.mark.parametrize(
    "model",
    [
        uniform_pm1(),
        step_density(0.75),
        LinearTilt1D(0.5),
        Triangular1D("decreasing"),
        TruncatedNormalDiag(BoxSupport((-2.0,), (2.0,)), [1.0], [1.0]),
    ],
)
def test_kolmogorov_smirnov_against_analytic_cdf(model):
    x = model.sample(10**5, SeedSpec(16)).ravel()
    f = model.factors()[0]
    stat = kstest(x, lambda t: np.asarray(f.cdf1(t))).statistic
    critical = 1.949 / math.sqrt(len(x))  # 0.001 significance level
    assert stat < critical


# ---------------------------------------------------------------------------
# chi-square divergence
# ---------------------------------------------------------------------------


def test_chi2_identical_is_zero():
    for m in [uniform_pm1(), Triangular1D("increasing"), LinearTilt1D(0.2)]:
        assert chi_square_divergence(m, m) == pytest.approx(0.0, abs=1e-8)


def test_chi2_uniform_vs_step_closed_form():
    # alpha (1/(2 alpha) - 1)^2 + (1-alpha)(1/(2(1-alpha)) - 1)^2 = 1/3 at alpha=3/4
    val = chi_square_divergence(uniform_pm1(), step_density(0.75))
    assert val == pytest.approx(1.0 / 3.0, abs=1e-6)


def test_chi2_triangular_pair_infinite():
    t1, t2 = Triangular1D("increasing"), Triangular1D("decreasing")
    assert math.isinf(chi_square_divergence(t1, t2))
    assert math.isinf(chi_square_divergence(t2, t1))


def test_chi2_interior_zero_detected():
    degenerate = PiecewiseConstant1D([-1.0, 0.0, 1.0], [0.0, 1.0])
    assert math.isinf(chi_square_divergence(uniform_pm1(), degenerate))


def test_chi2_support_mismatch():
    with pytest.raises(SupportMismatch):
        chi_square_divergence(uniform_pm1(), Triangular1D("increasing"))


def test_chi2_product_identity_two_dims():
    sup = BoxSupport((-2.0, -2.0), (2.0, 2.0))
    tn = TruncatedNormalDiag(sup, [1.0, 1.0], [1.0, 1.0])
    u = UniformBox(sup)
    joint = chi_square_divergence(tn, u)
    f = tn.factors()[0]
    one_d, _ = quad(lambda x: float(f.pdf1(x)) ** 2 * 4.0, -2.0, 2.0)
    expected = (1.0 + (one_d - 1.0)) ** 2 - 1.0
    assert joint == pytest.approx(expected, rel=1e-6)


def test_chi2_non_negative_across_menu():
    models = [uniform_pm1(), step_density(0.3), step_density(0.6)]
    for p in models:
        for q in models:
            assert chi_square_divergence(p, q) >= -1e-8


# ---------------------------------------------------------------------------
# fidelity tails and certificates
# ---------------------------------------------------------------------------


def test_tail_identical_above_one_is_zero():
    assert fidelity_tail_probability(uniform_pm1(), uniform_pm1(), 1.5) == 0.0


def test_tail_triangular_matches_closed_form():
    t1, t2 = Triangular1D("increasing"), Triangular1D("decreasing")
    assert fidelity_tail_probability(t1, t2, 1.0) == pytest.approx(0.75, abs=1e-6)
    assert fidelity_tail_probability(t1, t2, 10.0) == pytest.approx(21.0 / 121.0, abs=1e-6)


def test_tail_triangular_full_grid_closed_form():
    t1, t2 = Triangular1D("increasing"), Triangular1D("decreasing")
    for C in default_c_grid():
        tail = fidelity_tail_probability(t1, t2, C)
        assert tail == pytest.approx(triangular_tail_closed_form(C), abs=1e-6)


def test_tail_monotone_nonincreasing_and_one_at_zero_plus():
    t1, t2 = Triangular1D("increasing"), Triangular1D("decreasing")
    grid = np.geomspace(1e-4, 100.0, 25)
    tails = [fidelity_tail_probability(t1, t2, c) for c in grid]
    assert all(tails[i] >= tails[i + 1] - 1e-9 for i in range(len(tails) - 1))
    assert tails[0] == pytest.approx(1.0, abs=1e-6)


def test_certificate_identical_v_is_one():
    cert = certify_fidelity_level(uniform_pm1(), uniform_pm1(), d=2.0)
    assert cert.V == pytest.approx(1.0, abs=1e-9)
    assert cert.worst_C == pytest.approx(1.0)
    # d = infinity facet: tails vanish for every C > 1
    for C in (1.0 + 1e-9, 2.0, 100.0):
        assert fidelity_tail_probability(uniform_pm1(), uniform_pm1(), C) == 0.0


def test_certificate_triangular_pair():
    cert = certify_fidelity_level(Triangular1D("increasing"), Triangular1D("decreasing"), d=1.0)
    assert 1.99 <= cert.V <= 2.0
    assert cert.attained_sup == cert.V


def test_certificate_satisfies_definition_inequality():
    pairs = [
        (Triangular1D("increasing"), Triangular1D("decreasing"), 1.0),
        (uniform_pm1(), step_density(0.75), 2.0),
        (LinearTilt1D(0.0), LinearTilt1D(0.5), 1.5),
    ]
    for p, q, d in pairs:
        cert = certify_fidelity_level(p, q, d=d)
        for C, tail in zip(cert.C_grid, cert.tails):
            assert tail <= cert.V * C**-d + 1e-9


def test_certificate_bounded_ratio_lemma_item2():
    # ratio of uniform to step_density(0.75) lies in [2/3, 2]
    p, q = uniform_pm1(), step_density(0.75)
    m2, m1 = 2.0, 2.0 / 3.0
    for d in (1.0, 3.0):
        cert = certify_fidelity_level(p, q, d=d)
        assert cert.V <= max(m2**d, m1**-d) + 1e-6


def test_certificate_invalid_inputs():
    with pytest.raises(InvalidGrid):
        certify_fidelity_level(uniform_pm1(), uniform_pm1(), d=1.0, C_grid=[])
    with pytest.raises(InvalidGrid):
        certify_fidelity_level(uniform_pm1(), uniform_pm1(), d=1.0, C_grid=[-1.0])
    with pytest.raises(InvalidD):
        certify_fidelity_level(uniform_pm1(), uniform_pm1(), d=0.0)


def test_certificate_json_shape():
    cert = certify_fidelity_level(uniform_pm1(), step_density(0.6), d=1.0)
    blob = cert.to_json_dict()
    assert set(blob) == {"d", "V", "grid"}
    assert set(blob["grid"][0]) == {"C", "tail", "bound"}


# ---------------------------------------------------------------------------
# Lemma translations
# ---------------------------------------------------------------------------


def test_lemma1_chi2_to_fidelity():
    assert lemma1_chi2_to_fidelity(0.0, 0.0) == (1.0, 1.0)
    assert lemma1_chi2_to_fidelity(1.0 / 3.0, 1.0 / 3.0) == (4.0 / 3.0, 1.0)
    assert lemma1_chi2_to_fidelity(2.0, 5.0) == (6.0, 1.0)
    with pytest.raises(InfiniteDivergence):
        lemma1_chi2_to_fidelity(math.inf, 1.0)


def test_lemma1_fidelity_to_chi2_bound():
    assert lemma1_fidelity_to_chi2_bound(1.0, 2.0, 1.0) == pytest.approx(4.0)
    assert lemma1_fidelity_to_chi2_bound(2.0, 3.0, 2.0) == pytest.approx(1.0 + 4.0 / 3.0)
    with pytest.raises(InvalidD):
        lemma1_fidelity_to_chi2_bound(1.0, 1.0, 2.0)


@settings(max_examples=30, deadline=None)
@given(
    v=st.floats(0.1, 50.0),
    d=st.floats(1.1, 6.0),
    c=st.floats(1.0, 100.0),
)
def test_lemma1_bound_consistent_with_certified_pairs(v, d, c):
    val = lemma1_fidelity_to_chi2_bound(v, d, c)
    assert val >= (c - 1.0) ** 2


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_density_variants():
    d = parse_density("uniform-box lower=-2,-2 upper=2,2")
    assert d.dim == 2 and d.pdf((0.0, 0.0)) == pytest.approx(1.0 / 16.0)
    d = parse_density("trunc-normal lower=-2 upper=2 mean=1 var=1")
    assert d.dim == 1
    d = parse_density("piecewise breaks=-1,0,1 heights=0.25,0.75")
    assert d.pdf(0.5) == pytest.approx(0.75)
    d = parse_density("tilt alpha=0.5")
    assert d.pdf(2.0) == pytest.approx(0.75)
    d = parse_density("triangular direction=decreasing")
    assert d.pdf(0.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        parse_density("banana radius=1")
