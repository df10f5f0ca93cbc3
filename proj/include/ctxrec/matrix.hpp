#pragma once

#include <cstddef>
#include <vector>

namespace ctxrec {

// Dense row-major matrix of doubles.  Kept deliberately minimal; training
// code that wants column scans builds its own transposed copy.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    double* row(size_t r) { return data.data() + r * cols; }
};

}  // namespace ctxrec
