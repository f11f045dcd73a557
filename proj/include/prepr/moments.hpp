#pragma once

#include <cstddef>
#include <vector>

#include "prepr/sample_matrix.hpp"

namespace prepr {

// Per-variable central moments with divisor n (plug-in convention, not
// unbiased). excess_fourth is the fourth central moment minus 3 variance^2;
// it vanishes for normal data in expectation.
struct MarginalMoments {
    std::size_t p = 0;
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> third_central;
    std::vector<double> excess_fourth;
};

inline MarginalMoments central_moments(const SampleMatrix& X) {
    validate(X);
    MarginalMoments mom;
    mom.p = X.p;
    mom.mean.resize(X.p);
    mom.variance.resize(X.p);
    mom.third_central.resize(X.p);
    mom.excess_fourth.resize(X.p);

    const double inv_n = 1.0 / static_cast<double>(X.n);
    for (std::size_t j = 0; j < X.p; ++j) {
        const double* c = X.col(j);
        double s = 0.0;
        for (std::size_t i = 0; i < X.n; ++i) s += c[i];
        const double mu = s * inv_n;

        double s2 = 0.0, s3 = 0.0, s4 = 0.0;
        for (std::size_t i = 0; i < X.n; ++i) {
            const double d = c[i] - mu;
            const double d2 = d * d;
            s2 += d2;
            s3 += d2 * d;
            s4 += d2 * d2;
        }
        const double m2 = s2 * inv_n;
        mom.mean[j] = mu;
        mom.variance[j] = m2;
        mom.third_central[j] = s3 * inv_n;
        mom.excess_fourth[j] = s4 * inv_n - 3.0 * m2 * m2;
    }
    return mom;
}

}  // namespace prepr
