#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "prepr/normal.hpp"
#include "prepr/sample_matrix.hpp"

// Reference tests the prepivot statistic is compared against: two sum-of-
// squares tests (BS, CQ) and a diagonally studentized sum (SD). All three
// are one-sided normal tests after standardization. Quadratic forms are
// computed through N x N Gram matrices of the observation rows, so cost is
// O(N^2 p) rather than O(p^2), which is what makes p in the thousands cheap.
//
// Conventions are kept as each test defines them (pooled divisor N-2 here,
// divisor-n moments in the prepivot test); do not "unify" them, the
// centering corrections are derived for these exact choices.

namespace prepr {

enum class BaselineMethod { BS, CQ, SD };

inline const char* method_name(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::BS: return "BS";
        case BaselineMethod::CQ: return "CQ";
        default: return "SD";
    }
}

struct BaselineResult {
    BaselineMethod method = BaselineMethod::BS;
    double statistic = 0.0;  // standardized, upper-tail normal calibration
    double p_value = 1.0;
    bool reject = false;
    double alpha = 0.05;
    // Diagnostics: the un-standardized quantity and its squared scale.
    // BS: mean-difference norm minus trace correction, and its variance
    // estimate. CQ: the U-statistic, and its variance estimate. SD: the
    // studentized quadratic form, and the squared denominator.
    double raw_statistic = 0.0;
    double variance = 0.0;
};

namespace detail {

using EMat = Eigen::MatrixXd;
using EMap = Eigen::Map<const Eigen::MatrixXd>;

inline EMap map_of(const SampleMatrix& M) {
    return EMap(M.values.data(), static_cast<Eigen::Index>(M.n),
                static_cast<Eigen::Index>(M.p));
}

inline void check_baseline_pair(const SampleMatrix& X, const SampleMatrix& Y) {
    validate(X);
    validate(Y);
    if (X.p != Y.p)
        throw validation_error("baseline test: samples have " +
                               std::to_string(X.p) + " and " +
                               std::to_string(Y.p) + " variables");
}

// Plug-in estimator of tr(Sigma^2) from one group's uncentered Gram matrix,
// leave-two-out form. Unbiased under the model's moment assumptions.
inline double cq_trace_same(const EMat& G, std::size_t n) {
    const Eigen::VectorXd rowsum = G.rowwise().sum();
    const double inv = 1.0 / static_cast<double>(n - 2);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            if (j == k) continue;
            const double gjk = G(j, k);
            const double a = gjk - (rowsum(j) - G(j, j) - gjk) * inv;
            const double b = gjk - (rowsum(k) - G(k, k) - gjk) * inv;
            acc += a * b;
        }
    return acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

// Estimator of tr(Sigma_x Sigma_y) from the cross Gram matrix, leave-one-out
// in each group.
inline double cq_trace_cross(const EMat& Gxy, std::size_t n, std::size_t m) {
    const Eigen::VectorXd rowsum = Gxy.rowwise().sum();
    const Eigen::RowVectorXd colsum = Gxy.colwise().sum();
    const double invm = 1.0 / static_cast<double>(m - 1);
    const double invn = 1.0 / static_cast<double>(n - 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < m; ++k) {
            const double g = Gxy(j, k);
            acc += (g - (rowsum(j) - g) * invm) * (g - (colsum(k) - g) * invn);
        }
    return acc / (static_cast<double>(n) * static_cast<double>(m));
}

}  // namespace detail

// Sum-of-squares test with trace centering; variance uses the bias-corrected
// estimator of tr(Sigma^2) under a pooled covariance.
inline BaselineResult bs_test(const SampleMatrix& X, const SampleMatrix& Y,
                              double alpha = 0.05) {
    detail::check_baseline_pair(X, Y);
    const std::size_t n = X.n, m = Y.n, N = n + m;
    if (N <= 4)
        throw validation_error("bs_test: needs n + m > 4, got " + std::to_string(N));
    if (!(alpha > 0.0 && alpha < 1.0))
        throw validation_error("bs_test: alpha must lie in (0,1)");

    auto MX = detail::map_of(X);
    auto MY = detail::map_of(Y);
    const Eigen::RowVectorXd xbar = MX.colwise().mean();
    const Eigen::RowVectorXd ybar = MY.colwise().mean();

    detail::EMat C(N, X.p);
    C.topRows(n) = MX.rowwise() - xbar;
    C.bottomRows(m) = MY.rowwise() - ybar;
    const detail::EMat G = C * C.transpose();

    const double nu = static_cast<double>(N - 2);
    const double tr_s = G.trace() / nu;
    const double tr_s2 = G.squaredNorm() / (nu * nu);
    const double b2 = nu * nu / ((nu + 2.0) * (nu - 1.0)) * (tr_s2 - tr_s * tr_s / nu);
    const double tau = static_cast<double>(N) / (static_cast<double>(n) * m);

    BaselineResult res;
    res.method = BaselineMethod::BS;
    res.alpha = alpha;
    res.raw_statistic = (xbar - ybar).squaredNorm() - tau * tr_s;
    res.variance = 2.0 * tau * tau * (nu + 1.0) / nu * b2;
    if (!(res.variance > 0.0))
        throw computation_error("bs_test: variance estimate is not positive");
    res.statistic = res.raw_statistic / std::sqrt(res.variance);
    res.p_value = std_normal_cdf(-res.statistic);
    res.reject = res.p_value < alpha;
    return res;
}

// U-statistic test: no trace plug-in in the numerator, variance from
// leave-out trace estimators. Needs at least 4 observations per group.
inline BaselineResult cq_test(const SampleMatrix& X, const SampleMatrix& Y,
                              double alpha = 0.05) {
    detail::check_baseline_pair(X, Y);
    const std::size_t n = X.n, m = Y.n;
    if (n < 4 || m < 4)
        throw validation_error("cq_test: each group needs >= 4 observations");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw validation_error("cq_test: alpha must lie in (0,1)");

    auto MX = detail::map_of(X);
    auto MY = detail::map_of(Y);
    const detail::EMat Gx = MX * MX.transpose();
    const detail::EMat Gy = MY * MY.transpose();
    const detail::EMat Gxy = MX * MY.transpose();

    const double nd = static_cast<double>(n), md = static_cast<double>(m);
    const double t1 = (Gx.sum() - Gx.trace()) / (nd * (nd - 1.0));
    const double t2 = (Gy.sum() - Gy.trace()) / (md * (md - 1.0));
    const double t3 = 2.0 * Gxy.sum() / (nd * md);

    const double tr1 = detail::cq_trace_same(Gx, n);
    const double tr2 = detail::cq_trace_same(Gy, m);
    const double tr12 = detail::cq_trace_cross(Gxy, n, m);

    BaselineResult res;
    res.method = BaselineMethod::CQ;
    res.alpha = alpha;
    res.raw_statistic = t1 + t2 - t3;
    res.variance = 2.0 * tr1 / (nd * (nd - 1.0)) + 2.0 * tr2 / (md * (md - 1.0)) +
                   4.0 * tr12 / (nd * md);
    if (!(res.variance > 0.0))
        throw computation_error("cq_test: variance estimate is not positive");
    res.statistic = res.raw_statistic / std::sqrt(res.variance);
    res.p_value = std_normal_cdf(-res.statistic);
    res.reject = res.p_value < alpha;
    return res;
}

// Diagonally studentized sum of squared mean differences, centered and
// scaled with a correlation-trace correction. Scale-invariant per variable.
inline BaselineResult sd_test(const SampleMatrix& X, const SampleMatrix& Y,
                              double alpha = 0.05,
                              DegeneratePolicy policy = DegeneratePolicy::Strict) {
    detail::check_baseline_pair(X, Y);
    const std::size_t n = X.n, m = Y.n, N = n + m;
    if (N < 5)
        throw validation_error("sd_test: needs n + m >= 5, got " + std::to_string(N));
    if (!(alpha > 0.0 && alpha < 1.0))
        throw validation_error("sd_test: alpha must lie in (0,1)");

    auto MX = detail::map_of(X);
    auto MY = detail::map_of(Y);
    const Eigen::RowVectorXd xbar = MX.colwise().mean();
    const Eigen::RowVectorXd ybar = MY.colwise().mean();

    detail::EMat C(N, X.p);
    C.topRows(n) = MX.rowwise() - xbar;
    C.bottomRows(m) = MY.rowwise() - ybar;

    const double nu = static_cast<double>(N - 2);
    Eigen::RowVectorXd diag = C.colwise().squaredNorm() / nu;

    std::vector<Eigen::Index> kept;
    kept.reserve(X.p);
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(X.p); ++a) {
        if (diag(a) > 0.0) {
            kept.push_back(a);
        } else if (policy == DegeneratePolicy::Strict) {
            throw computation_error(
                "sd_test: variable " + std::to_string(a) +
                " has zero pooled variance; rerun with DegeneratePolicy::Drop");
        }
    }
    const std::size_t p_eff = kept.size();
    if (p_eff < 1)
        throw computation_error("sd_test: no usable variables left");

    detail::EMat R(N, static_cast<Eigen::Index>(p_eff));
    double qform = 0.0;
    const double nm_over_N = static_cast<double>(n) * m / static_cast<double>(N);
    for (std::size_t idx = 0; idx < p_eff; ++idx) {
        const Eigen::Index a = kept[idx];
        R.col(static_cast<Eigen::Index>(idx)) = C.col(a) / std::sqrt(diag(a));
        const double d = xbar(a) - ybar(a);
        qform += d * d / diag(a);
    }
    qform *= nm_over_N;

    const double tr_r2 = (R * R.transpose()).squaredNorm() / (nu * nu);
    const double pd = static_cast<double>(p_eff);
    const double cpn = 1.0 + tr_r2 / std::pow(pd, 1.5);
    const double scale2 = 2.0 * (tr_r2 - pd * pd / nu) * cpn;
    if (!(scale2 > 0.0))
        throw computation_error("sd_test: correlation-trace scale is not positive");

    BaselineResult res;
    res.method = BaselineMethod::SD;
    res.alpha = alpha;
    res.raw_statistic = qform;
    res.variance = scale2;
    res.statistic = (qform - nu * pd / (nu - 2.0)) / std::sqrt(scale2);
    res.p_value = std_normal_cdf(-res.statistic);
    res.reject = res.p_value < alpha;
    return res;
}

}  // namespace prepr
