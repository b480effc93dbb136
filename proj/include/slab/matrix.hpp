#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slab/rng.hpp"

namespace slab {

/// Dense row-major matrix of 64-bit floats. The universal carrier for
/// weight matrices, sample batches and activations.
///
/// Kernel contract (relied on by the bit-for-bit training tests): every
/// reduction accumulates in ascending index order into one accumulator,
/// and broadcast biases are added after the reduction, never folded into
/// it. The project is compiled with -ffp-contract=off, so a scalar
/// re-implementation that follows the same order reproduces results
/// exactly.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return rows * cols; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Matrix& o) const = default;
};

// Number of worker threads used by the large-matrix kernels. Work is
// partitioned by output row, each row computed exactly as in the
// sequential path, so results are bit-identical for any thread count.
void set_threads(unsigned n);
unsigned threads();

/// a * b. Requires a.cols == b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// aT * b without materializing the transpose. Requires a.rows == b.rows.
Matrix matmul_at(const Matrix& a, const Matrix& b);

/// a * bT without materializing the transpose. Requires a.cols == b.cols.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Elementwise logistic 1/(1+exp(-t)). Inputs are clamped to [-500,500]
/// before exponentiation and the result to at most 1-2^-53, so outputs
/// stay strictly inside (0,1).
Matrix sigmoid(const Matrix& m);
double sigmoid(double t);

/// rows x cols matrix of i.i.d. N(mean, stddev^2) draws, filled row-major.
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double mean = 0.0, double stddev = 0.01);

/// One Bernoulli draw per entry (row-major order): 1 with the entry's
/// probability, else 0. Entries must lie in [0,1].
Matrix bernoulli_sample(Rng& rng, const Matrix& probs);

/// 1 x cols mean over rows. Requires rows >= 1.
Matrix row_mean(const Matrix& m);

/// 1 x cols sum over rows.
Matrix col_sum(const Matrix& m);

/// m + broadcast of the length-cols vector v onto every row.
Matrix add_row_vector(const Matrix& m, std::span<const double> v);

double frobenius_norm(const Matrix& m);

bool all_finite(const Matrix& m);

/// Throws NumericError mentioning `context` if any entry is NaN/Inf.
void check_finite(const Matrix& m, const char* context);

} // namespace slab
