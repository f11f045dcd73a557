#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "mc_util.hpp"
#include "oracle_constants.hpp"
#include "prepr/edgeworth.hpp"
#include "prepr/rng.hpp"

using namespace prepr;

namespace {

MarginalMoments unit_normal_moments(std::size_t p) {
    MarginalMoments m;
    m.p = p;
    m.mean.assign(p, 0.0);
    m.variance.assign(p, 1.0);
    m.third_central.assign(p, 0.0);
    m.excess_fourth.assign(p, 0.0);
    return m;
}

}  // namespace

TEST_CASE("eta coefficients for the balanced unit-variance case") {
    const MarginalMoments m = unit_normal_moments(1);
    const EtaCoefficients eta = eta_coefficients(m, m, 10, 10);
    REQUIRE(eta.r_x == 0.5);
    REQUIRE(eta.r_y == 0.5);
    REQUIRE(eta.N == 20);
    REQUIRE(eta.eta1[0] == Catch::Approx(4.0).margin(1e-15));
    REQUIRE(eta.eta2[0] == 0.0);
    REQUIRE(eta.eta3[0] == 0.0);
    REQUIRE(eta.eta4[0] == Catch::Approx(16.0).margin(1e-13));
    REQUIRE(eta.cross_term[0] == Catch::Approx(16.0).margin(1e-13));
}

TEST_CASE("eta coefficients reproduce the exact-arithmetic oracle") {
    const EtaCoefficients eta = eta_coefficients(
        central_moments(fixture_x()), central_moments(fixture_y()), 5, 6);
    REQUIRE(eta.r_x == Catch::Approx(5.0 / 11.0).epsilon(1e-15));
    REQUIRE(eta.r_y == Catch::Approx(6.0 / 11.0).epsilon(1e-15));
    const double* refs[3] = {oracle::kEta0, oracle::kEta1, oracle::kEta2};
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(eta.eta1[i] == Catch::Approx(refs[i][0]).epsilon(1e-12));
        REQUIRE(eta.eta2[i] == Catch::Approx(refs[i][1]).epsilon(1e-12));
        REQUIRE(eta.eta3[i] == Catch::Approx(refs[i][2]).epsilon(1e-12));
        REQUIRE(eta.eta4[i] == Catch::Approx(refs[i][3]).epsilon(1e-12));
        REQUIRE(eta.cross_term[i] == Catch::Approx(refs[i][4]).epsilon(1e-12));
    }
}

TEST_CASE("identical groups cancel the skewness imbalance exactly") {
    const MarginalMoments m = central_moments(fixture_x());
    const EtaCoefficients eta = eta_coefficients(m, m, 5, 5);
    for (std::size_t i = 0; i < eta.p; ++i) REQUIRE(eta.eta2[i] == 0.0);
}

TEST_CASE("eta validation") {
    const MarginalMoments a = unit_normal_moments(2);
    const MarginalMoments b = unit_normal_moments(3);
    REQUIRE_THROWS_AS(eta_coefficients(a, b, 5, 5), validation_error);
    REQUIRE_THROWS_AS(eta_coefficients(a, a, 1, 5), validation_error);
}

TEST_CASE("q polynomial oracle values and structure") {
    const EtaCoefficients eta = eta_coefficients(
        central_moments(fixture_x()), central_moments(fixture_y()), 5, 6);
    REQUIRE(q_polynomial(0.0, eta, 0) == 0.0);
    REQUIRE(q_polynomial(1.5, eta, 0) == Catch::Approx(oracle::kQ_x15).epsilon(1e-12));
    REQUIRE(q_polynomial(2.0, eta, 0) == Catch::Approx(oracle::kQ_x2).epsilon(1e-12));

    // at x = sqrt(3) with eta2 = 0 only the variance-estimation block is
    // left: q = -(sqrt(3)/4) eta1^{-2} (6 eta4 + 2 cross)
    const MarginalMoments m = central_moments(fixture_x());
    const EtaCoefficients sym = eta_coefficients(m, m, 5, 5);
    const double x = std::sqrt(3.0);
    for (std::size_t i = 0; i < sym.p; ++i) {
        const double expect = -(x / 4.0) / (sym.eta1[i] * sym.eta1[i]) *
                              (6.0 * sym.eta4[i] + 2.0 * sym.cross_term[i]);
        REQUIRE(q_polynomial(x, sym, i) == Catch::Approx(expect).epsilon(1e-12));
    }

    REQUIRE_THROWS_AS(q_polynomial(1.0, eta, 99), validation_error);
}

TEST_CASE("degenerate variables are flagged and refused") {
    MarginalMoments z = unit_normal_moments(2);
    z.variance[1] = 0.0;
    const EtaCoefficients eta = eta_coefficients(z, z, 6, 6);
    REQUIRE_FALSE(is_degenerate(eta, 0));
    REQUIRE(is_degenerate(eta, 1));
    REQUIRE_THROWS_AS(q_polynomial(1.0, eta, 1), computation_error);
    REQUIRE_THROWS_AS(prepivot_cdf(1.0, eta, 1), computation_error);
}

TEST_CASE("prepivot cdf oracle values") {
    const EtaCoefficients eta = eta_coefficients(
        central_moments(fixture_x()), central_moments(fixture_y()), 5, 6);
    REQUIRE(prepivot_cdf(2.0, eta, 0) ==
            Catch::Approx(oracle::kPrepivot_x2).epsilon(1e-12));
    REQUIRE(prepivot_cdf(0.7, eta, 0) ==
            Catch::Approx(oracle::kPrepivot_x07).epsilon(1e-12));
    REQUIRE_THROWS_AS(prepivot_cdf(-0.1, eta, 0), validation_error);
}

TEST_CASE("prepivot cdf clips into the open unit interval") {
    const MarginalMoments m = unit_normal_moments(1);
    const EtaCoefficients eta = eta_coefficients(m, m, 10, 10);
    REQUIRE(prepivot_cdf(0.0, eta, 0) == kPrepivotClip);
    REQUIRE(prepivot_cdf(40.0, eta, 0) == 1.0 - kPrepivotClip);
}

TEST_CASE("correction vanishes at population scale") {
    // with n = m = 5e11 the 1/N correction is ~1e-13, so the prepivot is the
    // folded normal CDF to float precision
    const MarginalMoments m = unit_normal_moments(1);
    const std::size_t big = 500000000000ull;
    const EtaCoefficients eta = eta_coefficients(m, m, big, big);
    const double j = prepivot_cdf(1.96, eta, 0);
    REQUIRE(j == Catch::Approx(2.0 * std_normal_cdf(1.96) - 1.0).margin(1e-9));
    REQUIRE(j == Catch::Approx(0.950004).margin(1e-6));
}

TEST_CASE("raw correction stays inside [0,1] until the far tail") {
    // before clipping, 2 Phi(x) - 1 + (2/N) q(x) phi(x) can exit [0,1] only
    // where the base CDF is within ~1e-6 of 1, i.e. past the 1 - 1e-6
    // quantile of the folded normal (~4.8916)
    const double far_tail = std_normal_quantile(1.0 - 5e-7);
    const std::size_t n = 35, m = 35;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        SampleMatrix X = make_matrix(n, 1), Y = make_matrix(m, 1);
        Stream sx(derive_seed(41, 1, rep)), sy(derive_seed(41, 2, rep));
        for (auto& v : X.values) v = sx.normal();
        for (auto& v : Y.values) v = sy.normal();
        const EtaCoefficients eta =
            eta_coefficients(central_moments(X), central_moments(Y), n, m);
        for (double x = 0.0; x <= 6.0; x += 0.03) {
            if (x >= far_tail) continue;
            const double raw = 2.0 * std_normal_cdf(x) - 1.0 +
                               2.0 / static_cast<double>(eta.N) *
                                   q_polynomial(x, eta, 0) * std_normal_pdf(x);
            REQUIRE(raw >= 0.0);
            REQUIRE(raw <= 1.0);
        }
    }
}

TEST_CASE("eta and prepivot match a scalar re-implementation on a seeded draw") {
    const std::size_t n = 60, m = 40;
    SampleMatrix X = make_matrix(n, 2), Y = make_matrix(m, 2);
    Stream sx(59), sy(61);
    for (auto& v : X.values) v = sx.normal() * 1.3 + 0.2;
    for (auto& v : Y.values) v = sy.gamma_centered();
    const MarginalMoments mx = central_moments(X), my = central_moments(Y);
    const EtaCoefficients eta = eta_coefficients(mx, my, n, m);

    // straight-line formulas, written out independently of the header
    const double N = static_cast<double>(n + m);
    const double rx = n / N, ry = m / N;
    for (std::size_t i = 0; i < 2; ++i) {
        const double s2x = mx.variance[i], s2y = my.variance[i];
        REQUIRE(eta.eta1[i] ==
                Catch::Approx(s2x / rx + s2y / ry).epsilon(1e-13));
        REQUIRE(eta.eta2[i] ==
                Catch::Approx(mx.third_central[i] / (rx * rx) -
                              my.third_central[i] / (ry * ry)).epsilon(1e-13));
        REQUIRE(eta.eta3[i] ==
                Catch::Approx(mx.excess_fourth[i] / (rx * rx * rx) +
                              my.excess_fourth[i] / (ry * ry * ry)).epsilon(1e-13));
        REQUIRE(eta.eta4[i] ==
                Catch::Approx(s2x * s2x / (rx * rx * rx) +
                              s2y * s2y / (ry * ry * ry)).epsilon(1e-13));
        REQUIRE(eta.cross_term[i] ==
                Catch::Approx(s2x * s2y / (rx * rx * ry * ry)).epsilon(1e-13));

        const double x = 2.0;
        const double e1 = eta.eta1[i];
        const double q = x * ((1.0 / 12.0) / (e1 * e1) * eta.eta3[i] * (x * x - 3.0) -
                              (1.0 / 18.0) / (e1 * e1 * e1) * eta.eta2[i] * eta.eta2[i] *
                                  (x * x * x * x + 2.0 * x * x - 3.0) -
                              0.25 / (e1 * e1) *
                                  (eta.eta4[i] * (x * x + 3.0) + 2.0 * eta.cross_term[i]));
        REQUIRE(q_polynomial(x, eta, i) == Catch::Approx(q).epsilon(1e-13));
        const double j = 2.0 * std_normal_cdf(x) - 1.0 +
                         2.0 / N * q * std_normal_pdf(x);
        REQUIRE(prepivot_cdf(x, eta, i) == Catch::Approx(j).epsilon(1e-13));
    }
}

TEST_CASE("prepivot values are closer to uniform than the uncorrected CDF") {
    // single skewed variable, null: the corrected CDF evaluated at the root
    // should beat 2 Phi(R) - 1 in KS distance, within subsampling noise
    const std::size_t n = 35, m = 35, reps = 5000;
    std::vector<double> j_vals(reps), u_vals(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        SampleMatrix X = make_matrix(n, 1), Y = make_matrix(m, 1);
        Stream sx(derive_seed(43, 1, rep)), sy(derive_seed(43, 2, rep));
        for (auto& v : X.values) v = sx.gamma_centered();
        for (auto& v : Y.values) v = sy.gamma_centered();
        const MarginalMoments mx = central_moments(X), my = central_moments(Y);
        const EtaCoefficients eta = eta_coefficients(mx, my, n, m);
        const double root = std::fabs(mx.mean[0] - my.mean[0]) /
                            std::sqrt(eta.eta1[0] / static_cast<double>(eta.N));
        j_vals[rep] = prepivot_cdf(root, eta, 0);
        u_vals[rep] = 2.0 * std_normal_cdf(root) - 1.0;
    }
    const double ks_j = ks_against_uniform(j_vals);
    const double ks_u = ks_against_uniform(u_vals);
    const double se = coupled_ks_diff_se(u_vals, j_vals, 43);
    INFO("ks_j=" << ks_j << " ks_u=" << ks_u << " se=" << se);
    REQUIRE(ks_j <= ks_u + 2.0 * se);
}

TEST_CASE("normal quantile of the prepivot is close to standard normal") {
    // normal data: Phi^{-1}(J(R)) should match N(0,1); the reference version
    // with the true CDF matches exactly, so the KS budget is the estimation
    // error only
    const std::size_t n = 35, m = 35, reps = 5000;
    std::vector<double> z_vals(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        SampleMatrix X = make_matrix(n, 1), Y = make_matrix(m, 1);
        Stream sx(derive_seed(47, 1, rep)), sy(derive_seed(47, 2, rep));
        for (auto& v : X.values) v = sx.normal();
        for (auto& v : Y.values) v = sy.normal();
        const MarginalMoments mx = central_moments(X), my = central_moments(Y);
        const EtaCoefficients eta = eta_coefficients(mx, my, n, m);
        const double root = std::fabs(mx.mean[0] - my.mean[0]) /
                            std::sqrt(eta.eta1[0] / static_cast<double>(eta.N));
        z_vals[rep] = std_normal_quantile(prepivot_cdf(root, eta, 0));
    }
    const double ks = ks_against_normal(z_vals);
    INFO("ks=" << ks);
    REQUIRE(ks <= 1.62762 / std::sqrt(5000.0));  // 1% critical value
}
