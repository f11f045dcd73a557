#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace prepr {

// Unusable input: bad dimensions, malformed files, out-of-range parameters.
class validation_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure while processing input that looked fine up front
// (degenerate variables, factorization breakdown, non-positive variance
// estimates).
class computation_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// What to do when a variable carries no information (zero variance in both
// samples): Strict refuses, Drop removes it and tests the rest.
enum class DegeneratePolicy { Strict, Drop };

// One sample: n observations (rows) of p variables (columns), stored
// column-major so per-variable passes walk contiguous memory. Matches
// Eigen's default layout, so Eigen::Map works without copies.
struct SampleMatrix {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> values;  // values[j*n + i] is row i, column j

    double& at(std::size_t i, std::size_t j) { return values[j * n + i]; }
    double at(std::size_t i, std::size_t j) const { return values[j * n + i]; }
    double* col(std::size_t j) { return values.data() + j * n; }
    const double* col(std::size_t j) const { return values.data() + j * n; }
};

inline SampleMatrix make_matrix(std::size_t n, std::size_t p) {
    SampleMatrix M;
    M.n = n;
    M.p = p;
    M.values.assign(n * p, 0.0);
    return M;
}

// Row-wise literal, for fixtures and small examples.
inline SampleMatrix matrix_from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
    SampleMatrix M;
    M.n = rows.size();
    M.p = M.n == 0 ? 0 : rows.begin()->size();
    M.values.assign(M.n * M.p, 0.0);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != M.p)
            throw validation_error("matrix_from_rows: ragged row " +
                                   std::to_string(i));
        std::size_t j = 0;
        for (double v : row) M.at(i, j++) = v;
        ++i;
    }
    return M;
}

inline void validate(const SampleMatrix& M) {
    if (M.n < 2)
        throw validation_error("SampleMatrix: need at least 2 observations, got " +
                               std::to_string(M.n));
    if (M.p < 1) throw validation_error("SampleMatrix: need at least 1 variable");
    if (M.values.size() != M.n * M.p)
        throw validation_error("SampleMatrix: storage holds " +
                               std::to_string(M.values.size()) +
                               " values, expected " + std::to_string(M.n * M.p));
    for (std::size_t j = 0; j < M.p; ++j) {
        const double* c = M.col(j);
        for (std::size_t i = 0; i < M.n; ++i)
            if (!std::isfinite(c[i]))
                throw validation_error("SampleMatrix: non-finite entry at row " +
                                       std::to_string(i) + ", column " +
                                       std::to_string(j));
    }
}

}  // namespace prepr
