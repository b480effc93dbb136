#include "slab/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "slab/error.hpp"

namespace slab {

namespace {

void check_visible_batch(const RbmParams& p, const Matrix& x, const char* op) {
    if (x.cols != p.visible_units())
        throw ShapeError(std::string(op) + ": batch has " + std::to_string(x.cols) +
                         " columns, model has " + std::to_string(p.visible_units()) +
                         " visible units");
}

// log(sum(exp(v))) over a callback-enumerated sequence, two passes.
template <class Enumerate>
double log_sum_exp(std::size_t count, const Enumerate& value_at) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) m = std::max(m, value_at(i));
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += std::exp(value_at(i) - m);
    return m + std::log(acc);
}

void unpack_bits(std::size_t mask, std::vector<double>& out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (mask >> i) & 1u ? 1.0 : 0.0;
}

} // namespace

double momentum_at(std::size_t epoch, std::size_t total, double m0, double m1) {
    if (total <= 1) return m0;
    const std::size_t half = total / 2;
    if (epoch >= half) return m1;
    return m0 + (m1 - m0) * static_cast<double>(epoch) / static_cast<double>(half);
}

double energy(const RbmParams& p, std::span<const double> x,
              std::span<const double> h) {
    const std::size_t dh = p.hidden_units();
    const std::size_t dx = p.visible_units();
    if (x.size() != dx || h.size() != dh)
        throw ShapeError("energy: got |x|=" + std::to_string(x.size()) + ", |h|=" +
                         std::to_string(h.size()) + " for a " + std::to_string(dh) +
                         "x" + std::to_string(dx) + " model");
    double hWx = 0.0;
    for (std::size_t j = 0; j < dh; ++j) {
        double wx = 0.0;
        for (std::size_t i = 0; i < dx; ++i) wx += p.W(j, i) * x[i];
        hWx += h[j] * wx;
    }
    double cx = 0.0;
    for (std::size_t i = 0; i < dx; ++i) cx += p.c[i] * x[i];
    double bh = 0.0;
    for (std::size_t j = 0; j < dh; ++j) bh += p.b[j] * h[j];
    return -hWx - cx - bh;
}

Matrix prop_up(const RbmParams& p, const Matrix& x_batch) {
    check_visible_batch(p, x_batch, "prop_up");
    return sigmoid(add_row_vector(matmul_bt(x_batch, p.W), p.b));
}

Matrix prop_down(const RbmParams& p, const Matrix& h_batch) {
    if (h_batch.cols != p.hidden_units())
        throw ShapeError("prop_down: batch has " + std::to_string(h_batch.cols) +
                         " columns, model has " + std::to_string(p.hidden_units()) +
                         " hidden units");
    return sigmoid(add_row_vector(matmul(h_batch, p.W), p.c));
}

Cd1Stats cd1_update(RbmParams& p, const Matrix& x_batch,
                    const RbmTrainConfig& cfg, double momentum, Rng& rng,
                    Cd1Buffers& buf) {
    check_visible_batch(p, x_batch, "cd1_update");
    if (x_batch.rows == 0) throw DomainError("cd1_update: empty batch");
    for (double v : x_batch.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("cd1_update: batch entry " + std::to_string(v) +
                              " outside [0,1]");

    const double n = static_cast<double>(x_batch.rows);
    const double lr = cfg.learning_rate;

    const Matrix h0p = prop_up(p, x_batch);
    const Matrix h0 = bernoulli_sample(rng, h0p);
    const Matrix v1 = prop_down(p, h0);
    const Matrix h1p = prop_up(p, v1);

    const Matrix pos = matmul_at(h0p, x_batch); // d_h x d_x
    const Matrix neg = matmul_at(h1p, v1);
    for (std::size_t i = 0; i < p.W.size(); ++i) {
        buf.dW.data[i] = lr * ((pos.data[i] - neg.data[i]) / n - cfg.l2 * p.W.data[i]) +
                         momentum * buf.dW.data[i];
        p.W.data[i] += buf.dW.data[i];
    }

    const Matrix pos_b = col_sum(h0p);
    const Matrix neg_b = col_sum(h1p);
    for (std::size_t j = 0; j < p.b.size(); ++j) {
        buf.db[j] = lr * ((pos_b.data[j] - neg_b.data[j]) / n) + momentum * buf.db[j];
        p.b[j] += buf.db[j];
    }

    const Matrix pos_c = col_sum(x_batch);
    const Matrix neg_c = col_sum(v1);
    for (std::size_t i = 0; i < p.c.size(); ++i) {
        buf.dc[i] = lr * ((pos_c.data[i] - neg_c.data[i]) / n) + momentum * buf.dc[i];
        p.c[i] += buf.dc[i];
    }

    Cd1Stats stats;
    double err = 0.0;
    for (std::size_t s = 0; s < x_batch.rows; ++s) {
        double row_err = 0.0;
        for (std::size_t i = 0; i < x_batch.cols; ++i) {
            const double d = x_batch(s, i) - v1(s, i);
            row_err += d * d;
        }
        err += row_err;
    }
    stats.recon_error = err / n;
    stats.update_norm = frobenius_norm(buf.dW);

    check_finite(p.W, "cd1_update weights");
    return stats;
}

double exact_log_likelihood(const RbmParams& p, const Matrix& dataset) {
    const std::size_t dh = p.hidden_units();
    const std::size_t dx = p.visible_units();
    if (dh + dx > 24)
        throw DomainError("exact_log_likelihood: d_x + d_h = " +
                          std::to_string(dx + dh) + " exceeds the enumeration guard of 24");
    if (dataset.rows == 0) throw DomainError("exact_log_likelihood: empty dataset");
    check_visible_batch(p, dataset, "exact_log_likelihood");

    std::vector<double> h(dh);
    const std::size_t h_states = std::size_t{1} << dh;

    auto unnormalized = [&](std::span<const double> x) {
        return log_sum_exp(h_states, [&](std::size_t mask) {
            unpack_bits(mask, h);
            return -energy(p, x, h);
        });
    };

    std::vector<double> x(dx);
    const std::size_t x_states = std::size_t{1} << dx;
    const double log_z = log_sum_exp(x_states, [&](std::size_t mask) {
        unpack_bits(mask, x);
        return unnormalized(x);
    });

    double total = 0.0;
    for (std::size_t r = 0; r < dataset.rows; ++r)
        total += unnormalized(dataset.row(r)) - log_z;
    return total / static_cast<double>(dataset.rows);
}

RbmTrainResult train_rbm(const Matrix& data, std::size_t hidden_units,
                         const RbmTrainConfig& cfg, const EpochObserver& on_epoch) {
    if (hidden_units == 0) throw DomainError("train_rbm: hidden_units must be >= 1");
    if (cfg.batch_size == 0) throw DomainError("train_rbm: batch_size must be >= 1");
    if (cfg.epochs > 0 && data.rows < cfg.batch_size)
        throw DomainError("train_rbm: " + std::to_string(data.rows) +
                          " rows is fewer than batch size " +
                          std::to_string(cfg.batch_size));

    Rng init_rng(cfg.seed);
    RbmTrainResult result;
    result.params.W = gaussian_matrix(init_rng, hidden_units, data.cols, 0.0, 0.01);
    result.params.b.assign(hidden_units, 0.0);
    result.params.c.assign(data.cols, 0.0);

    Cd1Buffers buf(result.params);
    Rng sample_rng(derive_seed(cfg.seed, 0x5A11));

    Matrix batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double momentum = momentum_at(epoch, cfg.epochs, cfg.momentum_initial,
                                            cfg.momentum_final);
        Rng shuffle_rng(derive_seed(cfg.seed, epoch));
        const std::vector<std::size_t> order = permutation(shuffle_rng, data.rows);

        double err_sum = 0.0;
        double norm_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < data.rows; begin += cfg.batch_size) {
            const std::size_t end = std::min(data.rows, begin + cfg.batch_size);
            batch = Matrix(end - begin, data.cols);
            for (std::size_t r = begin; r < end; ++r) {
                const auto src = data.row(order[r]);
                std::copy(src.begin(), src.end(), batch.row(r - begin).begin());
            }
            try {
                const Cd1Stats s =
                    cd1_update(result.params, batch, cfg, momentum, sample_rng, buf);
                err_sum += s.recon_error * static_cast<double>(batch.rows);
                norm_sum += s.update_norm;
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batches) + ")");
            }
            ++batches;
        }
        result.epochs.push_back(
            {epoch, err_sum / static_cast<double>(data.rows),
             norm_sum / static_cast<double>(batches)});
        if (on_epoch) on_epoch(epoch, result.params);
    }
    return result;
}

std::vector<RbmParams> pretrain_stack(const Matrix& data,
                                      const std::vector<std::size_t>& layer_sizes,
                                      const RbmTrainConfig& cfg) {
    if (layer_sizes.empty()) throw DomainError("pretrain_stack: no layer sizes");
    std::vector<RbmParams> stack;
    stack.reserve(layer_sizes.size());
    Matrix input = data;
    for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
        RbmTrainConfig layer_cfg = cfg;
        if (l > 0) layer_cfg.seed = derive_seed(cfg.seed, l);
        RbmTrainResult r = train_rbm(input, layer_sizes[l], layer_cfg);
        input = prop_up(r.params, input);
        stack.push_back(std::move(r.params));
    }
    return stack;
}

} // namespace slab
