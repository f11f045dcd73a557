#pragma once

#include "prepr/sample_matrix.hpp"

// The small two-sample pair every oracle in oracle_constants.hpp was
// computed from.

inline prepr::SampleMatrix fixture_x() {
    return prepr::matrix_from_rows(
        {{1, 4, 2}, {3, 0, 2}, {5, 2, 7}, {2, 2, 1}, {4, 2, 3}});
}

inline prepr::SampleMatrix fixture_y() {
    return prepr::matrix_from_rows(
        {{2, 1, 0}, {0, 3, 4}, {1, 1, 1}, {5, 2, 3}, {2, 0, 2}, {3, 1, 2}});
}
