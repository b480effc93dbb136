#include "slab/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "slab/error.hpp"

namespace slab {

namespace {

std::atomic<unsigned> g_threads{1};

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                     " and " + shape_str(b));
}

// Runs fn(row_begin, row_end) over [0, rows), split across threads when
// the work is worth it. Each output row is owned by exactly one thread.
template <class Fn>
void for_row_blocks(std::size_t rows, std::size_t flops_per_row, const Fn& fn) {
    const unsigned want = g_threads.load();
    if (want <= 1 || rows < 2 * want || flops_per_row * rows < (1u << 20)) {
        fn(std::size_t{0}, rows);
        return;
    }
    const std::size_t chunk = (rows + want - 1) / want;
    std::vector<std::thread> pool;
    for (std::size_t begin = 0; begin < rows; begin += chunk) {
        const std::size_t end = std::min(rows, begin + chunk);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

const double kOneBelowOne = std::nextafter(1.0, 0.0);

} // namespace

void set_threads(unsigned n) { g_threads.store(n == 0 ? 1 : n); }
unsigned threads() { return g_threads.load(); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) shape_fail("matmul", a, b);
    Matrix c(a.rows, b.cols);
    // ikj order: each c(i,j) still accumulates k-ascending, identical to a
    // naive dot product, while the inner j loop vectorizes.
    for_row_blocks(a.rows, 2 * a.cols * b.cols, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            double* ci = c.data.data() + i * c.cols;
            const double* ai = a.data.data() + i * a.cols;
            for (std::size_t k = 0; k < a.cols; ++k) {
                const double aik = ai[k];
                const double* bk = b.data.data() + k * b.cols;
                for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
            }
        }
    });
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) shape_fail("matmul_at", a, b);
    Matrix c(a.cols, b.cols);
    // c(j,i) = sum_s a(s,j) b(s,i), s ascending.
    for (std::size_t s = 0; s < a.rows; ++s) {
        const double* as = a.data.data() + s * a.cols;
        const double* bs = b.data.data() + s * b.cols;
        for (std::size_t j = 0; j < a.cols; ++j) {
            double* cj = c.data.data() + j * c.cols;
            const double asj = as[j];
            for (std::size_t i = 0; i < b.cols; ++i) cj[i] += asj * bs[i];
        }
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) shape_fail("matmul_bt", a, b);
    Matrix c(a.rows, b.rows);
    for_row_blocks(a.rows, 2 * a.cols * b.rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            const double* ai = a.data.data() + i * a.cols;
            double* ci = c.data.data() + i * c.cols;
            for (std::size_t j = 0; j < b.rows; ++j) {
                const double* bj = b.data.data() + j * b.cols;
                double acc = 0.0;
                for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
                ci[j] = acc;
            }
        }
    });
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

double sigmoid(double t) {
    t = std::clamp(t, -500.0, 500.0);
    const double v = 1.0 / (1.0 + std::exp(-t));
    return v < 1.0 ? v : kOneBelowOne;
}

Matrix sigmoid(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = sigmoid(m.data[i]);
    return out;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double mean, double stddev) {
    Matrix out(rows, cols);
    for (auto& v : out.data) v = rng.normal(mean, stddev);
    return out;
}

Matrix bernoulli_sample(Rng& rng, const Matrix& probs) {
    Matrix out(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs.data[i];
        if (!(p >= 0.0 && p <= 1.0))
            throw DomainError("bernoulli_sample: probability " + std::to_string(p) +
                              " outside [0,1]");
        out.data[i] = rng.uniform() < p ? 1.0 : 0.0;
    }
    return out;
}

Matrix row_mean(const Matrix& m) {
    if (m.rows == 0) throw DomainError("row_mean: empty matrix");
    Matrix out = col_sum(m);
    const double inv = 1.0 / static_cast<double>(m.rows);
    for (auto& v : out.data) v *= inv;
    return out;
}

Matrix col_sum(const Matrix& m) {
    Matrix out(1, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* ri = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) out.data[j] += ri[j];
    }
    return out;
}

Matrix add_row_vector(const Matrix& m, std::span<const double> v) {
    if (v.size() != m.cols)
        throw ShapeError("add_row_vector: vector length " + std::to_string(v.size()) +
                         " does not match " + shape_str(m));
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(i, j) + v[j];
    return out;
}

double frobenius_norm(const Matrix& m) {
    double acc = 0.0;
    for (double v : m.data) acc += v * v;
    return std::sqrt(acc);
}

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_finite(const Matrix& m, const char* context) {
    if (!all_finite(m))
        throw NumericError(std::string("non-finite values in ") + context);
}

} // namespace slab
