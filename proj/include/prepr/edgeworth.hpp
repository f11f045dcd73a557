#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "prepr/moments.hpp"
#include "prepr/normal.hpp"
#include "prepr/sample_matrix.hpp"

// Second-order correction to the distribution of the marginal two-sample
// roots. For each variable, the absolute standardized mean difference R has
//
//   P(R <= x)  ~  2*Phi(x) - 1 + (2/N) q(x) phi(x),
//
// where q collects the skewness, kurtosis, and variance-estimation terms of
// the Edgeworth expansion through order 1/N. Evaluating this estimated CDF at
// the observed root ("prepivoting") is what sharpens the max-type statistic
// at small sample sizes.

namespace prepr {

// Prepivot values are clipped into [kPrepivotClip, 1 - kPrepivotClip] so the
// normal quantile applied afterwards stays finite.
inline constexpr double kPrepivotClip = 1e-15;

struct EtaCoefficients {
    std::size_t p = 0;
    std::vector<double> eta1;        // variance scale of the mean difference
    std::vector<double> eta2;        // skewness imbalance
    std::vector<double> eta3;        // excess-kurtosis sum
    std::vector<double> eta4;        // variance-of-variance sum
    std::vector<double> cross_term;  // s2x s2y / (r_x^2 r_y^2)
    double r_x = 0.0;
    double r_y = 0.0;
    std::size_t N = 0;
};

inline EtaCoefficients eta_coefficients(const MarginalMoments& mx,
                                        const MarginalMoments& my,
                                        std::size_t n, std::size_t m) {
    if (mx.p != my.p)
        throw validation_error("eta_coefficients: samples have " +
                               std::to_string(mx.p) + " and " +
                               std::to_string(my.p) + " variables");
    if (n < 2 || m < 2)
        throw validation_error("eta_coefficients: each group needs >= 2 observations");

    EtaCoefficients eta;
    eta.p = mx.p;
    eta.N = n + m;
    eta.r_x = static_cast<double>(n) / static_cast<double>(eta.N);
    eta.r_y = static_cast<double>(m) / static_cast<double>(eta.N);
    eta.eta1.resize(eta.p);
    eta.eta2.resize(eta.p);
    eta.eta3.resize(eta.p);
    eta.eta4.resize(eta.p);
    eta.cross_term.resize(eta.p);

    const double rx = eta.r_x, ry = eta.r_y;
    const double rx2 = rx * rx, ry2 = ry * ry;
    const double rx3 = rx2 * rx, ry3 = ry2 * ry;
    for (std::size_t i = 0; i < eta.p; ++i) {
        const double s2x = mx.variance[i], s2y = my.variance[i];
        eta.eta1[i] = s2x / rx + s2y / ry;
        eta.eta2[i] = mx.third_central[i] / rx2 - my.third_central[i] / ry2;
        eta.eta3[i] = mx.excess_fourth[i] / rx3 + my.excess_fourth[i] / ry3;
        eta.eta4[i] = s2x * s2x / rx3 + s2y * s2y / ry3;
        eta.cross_term[i] = s2x * s2y / (rx2 * ry2);
    }
    return eta;
}

// eta1 == 0 means the variable is constant in both samples; no finite
// standardized root exists for it.
inline bool is_degenerate(const EtaCoefficients& eta, std::size_t i) {
    return !(eta.eta1[i] > 0.0);
}

// Polynomial factor of the order-1/N correction term.
inline double q_polynomial(double x, const EtaCoefficients& eta, std::size_t i) {
    if (i >= eta.p)
        throw validation_error("q_polynomial: variable index " + std::to_string(i) +
                               " out of range");
    if (is_degenerate(eta, i))
        throw computation_error("q_polynomial: variable " + std::to_string(i) +
                                " is degenerate (zero variance in both samples)");
    const double e1 = eta.eta1[i];
    const double inv1 = 1.0 / e1;
    const double inv2 = inv1 * inv1;
    const double inv3 = inv2 * inv1;
    const double x2 = x * x;
    const double e2 = eta.eta2[i];
    const double skew = (1.0 / 12.0) * inv2 * eta.eta3[i] * (x2 - 3.0);
    const double skew2 = (1.0 / 18.0) * inv3 * e2 * e2 * (x2 * x2 + 2.0 * x2 - 3.0);
    const double varest =
        0.25 * inv2 * (eta.eta4[i] * (x2 + 3.0) + 2.0 * eta.cross_term[i]);
    return x * (skew - skew2 - varest);
}

// Estimated CDF of the absolute root, clipped into the open unit interval.
inline double prepivot_cdf(double x, const EtaCoefficients& eta, std::size_t i) {
    if (x < 0.0)
        throw validation_error("prepivot_cdf: absolute root must be >= 0");
    const double base = 2.0 * std_normal_cdf(x) - 1.0;
    const double corr = 2.0 / static_cast<double>(eta.N) * q_polynomial(x, eta, i) *
                        std_normal_pdf(x);
    return std::clamp(base + corr, kPrepivotClip, 1.0 - kPrepivotClip);
}

}  // namespace prepr
