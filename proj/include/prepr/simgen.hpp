#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prepr/rng.hpp"
#include "prepr/sample_matrix.hpp"

// Structured-covariance population generators for the simulation study.
//
// Five covariance families: a 10-lag moving average (band covariance),
// long-range dependence (fractional Gaussian noise autocovariance), compound
// symmetry, and polynomially decaying correlation with random per-variable
// scales, plus a scaled variant of the long-range family. Innovations are
// either standard normal or centered standardized Gamma(2,1) (skewness
// sqrt(2), a deliberately non-normal stress case).

namespace prepr {

enum class CovKind { MA10, LongRange, CompoundSymmetry, PolyDecayScaled, LongRangeScaled };

enum class Scenario { Normal = 1, CenteredGamma = 2 };

struct CovarianceModel {
    CovKind kind = CovKind::MA10;
    double rho = 0.4;             // CompoundSymmetry off-diagonal
    double hurst = 0.625;         // LongRange self-similarity index
    double decay_exponent = 2.5;  // PolyDecayScaled |i-j|^-decay
    // Seed for the frozen structural draws (filter coefficients, scale
    // diagonal). These are drawn once per experiment, not per replicate.
    std::uint64_t scale_seed = 0;
};

// Sparse mean shift: ceil-free round(p*r) leading coordinates carry an
// increasing ramp delta*(1/k, 2/k, ..., 1), the rest are zero.
struct SignalSpec {
    std::size_t p = 0;
    double r = 0.0;
    double delta = 0.0;
};

struct CovarianceFactor {
    std::size_t p = 0;
    CovKind kind = CovKind::MA10;
    Eigen::MatrixXd sigma;        // implied covariance (band matrix for MA10)
    Eigen::MatrixXd L;            // lower Cholesky factor; empty for MA10
    std::array<double, 10> ma{};  // MA10 filter coefficients
    bool regularized = false;     // printed matrix was indefinite, shifted
    double reg_delta = 0.0;
};

// Autocovariance of fractional Gaussian noise at lag d, unit variance.
// The textbook second difference ((d+1)^2H - 2 d^2H + (d-1)^2H)/2 cancels
// catastrophically once d is large (the result shrinks like d^(2H-2) while
// the operands grow like d^2H), so for d >= 2 expand it as the even binomial
// series d^2H * sum_k C(2H, 2k) d^-2k, whose terms all share one sign.
inline double fgn_autocov(std::size_t d, double hurst) {
    const double a = 2.0 * hurst;
    const double dd = static_cast<double>(d);
    if (d == 0) return 1.0;
    if (d == 1) return 0.5 * (std::pow(2.0, a) - 2.0);
    const double x2 = 1.0 / (dd * dd);
    double coeff = 0.5 * a * (a - 1.0);
    double power = x2;
    double sum = coeff * power;
    for (int k = 1; k < 80; ++k) {
        const double two_k = 2.0 * k;
        coeff *= (a - two_k) * (a - two_k - 1.0) / ((two_k + 1.0) * (two_k + 2.0));
        power *= x2;
        const double term = coeff * power;
        sum += term;
        if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
    }
    return std::pow(dd, a) * sum;
}

// Ten filter weights drawn uniformly from (2,3), then normalized to unit
// Euclidean norm so the implied covariance has unit diagonal.
inline std::array<double, 10> ma10_coefficients(std::uint64_t seed) {
    Stream st(seed);
    std::array<double, 10> c{};
    double norm2 = 0.0;
    for (double& v : c) {
        v = 2.0 + st.uniform();
        norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : c) v *= inv;
    return c;
}

inline void validate(const CovarianceModel& model) {
    switch (model.kind) {
        case CovKind::CompoundSymmetry:
            if (!(model.rho >= 0.0 && model.rho < 1.0))
                throw validation_error("CovarianceModel: rho must lie in [0,1)");
            break;
        case CovKind::LongRange:
        case CovKind::LongRangeScaled:
            if (!(model.hurst > 0.5 && model.hurst < 1.0))
                throw validation_error("CovarianceModel: hurst must lie in (0.5,1)");
            break;
        case CovKind::PolyDecayScaled:
            if (!(model.decay_exponent > 1.0))
                throw validation_error("CovarianceModel: decay_exponent must be > 1");
            break;
        case CovKind::MA10:
            break;
    }
}

namespace detail {

inline Eigen::MatrixXd fgn_covariance(std::size_t p, double hurst) {
    Eigen::MatrixXd S(p, p);
    std::vector<double> rho(p);
    for (std::size_t d = 0; d < p; ++d) rho[d] = fgn_autocov(d, hurst);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rho[i >= j ? i - j : j - i];
    return S;
}

inline Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& S,
                                         const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw computation_error(std::string(what) +
                                ": covariance is not positive definite");
    return llt.matrixL();
}

// Multiplies in random per-variable scales d_a ~ Uniform(1,5), drawn once
// from the model's structural seed.
inline void apply_scales(Eigen::MatrixXd& S, Stream& st) {
    const Eigen::Index p = S.rows();
    Eigen::VectorXd root_d(p);
    for (Eigen::Index a = 0; a < p; ++a) root_d(a) = std::sqrt(1.0 + 4.0 * st.uniform());
    S = root_d.asDiagonal() * S * root_d.asDiagonal();
}

}  // namespace detail

inline CovarianceFactor build_covariance(const CovarianceModel& model,
                                         std::size_t p) {
    validate(model);
    if (p < 1) throw validation_error("build_covariance: p must be >= 1");

    CovarianceFactor f;
    f.p = p;
    f.kind = model.kind;

    switch (model.kind) {
        case CovKind::MA10: {
            f.ma = ma10_coefficients(model.scale_seed);
            f.sigma = Eigen::MatrixXd::Zero(p, p);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = i < 9 ? 0 : i - 9; j <= i + 9 && j < p; ++j) {
                    const std::size_t d = i >= j ? i - j : j - i;
                    double s = 0.0;
                    for (std::size_t k = 0; k + d < 10; ++k) s += f.ma[k] * f.ma[k + d];
                    f.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
                }
            break;
        }
        case CovKind::LongRange: {
            f.sigma = detail::fgn_covariance(p, model.hurst);
            f.L = detail::cholesky_or_throw(f.sigma, "build_covariance(LongRange)");
            break;
        }
        case CovKind::CompoundSymmetry: {
            f.sigma = Eigen::MatrixXd::Constant(p, p, model.rho);
            f.sigma.diagonal().setOnes();
            f.L = detail::cholesky_or_throw(f.sigma, "build_covariance(CompoundSymmetry)");
            break;
        }
        case CovKind::PolyDecayScaled: {
            Eigen::MatrixXd S(p, p);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const std::size_t d = i >= j ? i - j : j - i;
                    S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        d == 0 ? 1.0
                               : std::pow(static_cast<double>(d), -model.decay_exponent);
                }
            // As printed this matrix is indefinite for p >= 3 (the lag-1
            // entry equals the diagonal). Shift it into the definite cone
            // and renormalize so the diagonal stays 1.
            if (p >= 2) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
                const double lmin = es.eigenvalues().minCoeff();
                if (lmin < 1e-10) {
                    const double delta = std::fabs(lmin) + 0.05;
                    S = (S + delta * Eigen::MatrixXd::Identity(p, p)) / (1.0 + delta);
                    f.regularized = true;
                    f.reg_delta = delta;
                }
            }
            Stream st(model.scale_seed);
            detail::apply_scales(S, st);
            f.sigma = S;
            f.L = detail::cholesky_or_throw(f.sigma, "build_covariance(PolyDecayScaled)");
            break;
        }
        case CovKind::LongRangeScaled: {
            Eigen::MatrixXd S = detail::fgn_covariance(p, model.hurst);
            Stream st(model.scale_seed);
            detail::apply_scales(S, st);
            f.sigma = S;
            f.L = detail::cholesky_or_throw(f.sigma, "build_covariance(LongRangeScaled)");
            break;
        }
    }
    return f;
}

inline std::vector<double> signal_vector(const SignalSpec& spec) {
    if (spec.p < 1) throw validation_error("signal_vector: p must be >= 1");
    if (!(spec.r >= 0.0 && spec.r <= 1.0))
        throw validation_error("signal_vector: r must lie in [0,1]");
    if (!(spec.delta >= 0.0))
        throw validation_error("signal_vector: delta must be >= 0");

    std::vector<double> mu(spec.p, 0.0);
    if (spec.delta == 0.0) return mu;

    const auto k = static_cast<std::size_t>(
        std::llround(spec.r * static_cast<double>(spec.p)));
    if (k == 0)
        throw validation_error(
            "signal_vector: r*p rounds to zero signal coordinates but delta > 0");
    for (std::size_t j = 0; j < k && j < spec.p; ++j)
        mu[j] = spec.delta * static_cast<double>(j + 1) / static_cast<double>(k);
    return mu;
}

namespace detail {

inline double draw_innovation(Stream& st, Scenario s) {
    return s == Scenario::Normal ? st.normal() : st.gamma_centered();
}

}  // namespace detail

// Draws n rows from the population defined by a prebuilt covariance factor.
// All randomness comes from `seed`; the factor's structural draws are frozen
// inside it. Pass an empty mu for a centered population.
inline SampleMatrix sample_population(std::size_t n, const CovarianceFactor& f,
                                      Scenario scenario,
                                      const std::vector<double>& mu,
                                      std::uint64_t seed) {
    if (n < 2) throw validation_error("sample_population: need n >= 2");
    const std::size_t p = f.p;
    if (!mu.empty() && mu.size() != p)
        throw validation_error("sample_population: mu has " +
                               std::to_string(mu.size()) + " entries, expected " +
                               std::to_string(p));

    Stream st(seed);
    SampleMatrix out = make_matrix(n, p);
    Eigen::Map<Eigen::MatrixXd> X(out.values.data(), static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(p));

    if (f.kind == CovKind::MA10) {
        // Filter a wider innovation panel instead of factorizing the band
        // covariance: X_j = sum_k ma_k Z_{j+k}.
        Eigen::MatrixXd Z(static_cast<Eigen::Index>(n),
                          static_cast<Eigen::Index>(p + 10));
        double* z = Z.data();
        const std::size_t total = n * (p + 10);
        for (std::size_t t = 0; t < total; ++t)
            z[t] = detail::draw_innovation(st, scenario);
        for (std::size_t j = 0; j < p; ++j) {
            auto xc = X.col(static_cast<Eigen::Index>(j));
            xc.setZero();
            for (std::size_t k = 0; k < 10; ++k)
                xc.noalias() += f.ma[k] * Z.col(static_cast<Eigen::Index>(j + k));
        }
    } else {
        Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        double* z = Z.data();
        const std::size_t total = n * p;
        for (std::size_t t = 0; t < total; ++t)
            z[t] = detail::draw_innovation(st, scenario);
        X.noalias() = Z * f.L.transpose();
    }

    if (!mu.empty())
        for (std::size_t j = 0; j < p; ++j)
            X.col(static_cast<Eigen::Index>(j)).array() += mu[j];
    return out;
}

// Convenience overload that builds the factor on the spot.
inline SampleMatrix sample_population(std::size_t n, std::size_t p,
                                      const CovarianceModel& model,
                                      Scenario scenario,
                                      const std::vector<double>& mu,
                                      std::uint64_t seed) {
    return sample_population(n, build_covariance(model, p), scenario, mu, seed);
}

}  // namespace prepr
