#include "slab/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slab/error.hpp"

namespace slab {

namespace {

void check_labels(const std::vector<int>& labels, std::size_t n_rows,
                  std::size_t n_classes, const char* op) {
    if (labels.size() != n_rows)
        throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n_rows) + " rows");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw DomainError(std::string(op) + ": label " + std::to_string(y) +
                              " outside [0," + std::to_string(n_classes) + ")");
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto zi = logits.row(i);
        double m = zi[0];
        for (double z : zi) m = std::max(m, z);
        double sum = 0.0;
        auto oi = out.row(i);
        for (std::size_t j = 0; j < logits.cols; ++j) {
            oi[j] = std::exp(zi[j] - m);
            sum += oi[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) oi[j] /= sum;
    }
    return out;
}

// d(mean loss)/d(logits); the 1/n factor is folded in here so layer
// gradients come out as batch means directly.
Matrix head_delta(const Matrix& probs, const std::vector<int>& labels, Loss loss) {
    const double inv_n = 1.0 / static_cast<double>(probs.rows);
    Matrix dz(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto pi = probs.row(i);
        auto di = dz.row(i);
        const auto y = static_cast<std::size_t>(labels[i]);
        if (loss == Loss::nll) {
            for (std::size_t j = 0; j < probs.cols; ++j)
                di[j] = (pi[j] - (j == y ? 1.0 : 0.0)) * inv_n;
        } else {
            // squared loss through the softmax Jacobian:
            // dz_j = p_j * (g_j - sum_k g_k p_k), g = 2(p - y)/n
            double gp = 0.0;
            for (std::size_t j = 0; j < probs.cols; ++j) {
                const double g = 2.0 * (pi[j] - (j == y ? 1.0 : 0.0)) * inv_n;
                di[j] = g;
                gp += g * pi[j];
            }
            for (std::size_t j = 0; j < probs.cols; ++j)
                di[j] = pi[j] * (di[j] - gp);
        }
    }
    return dz;
}

NetGrads grads_from_forward(const Network& net, const Matrix& x_batch,
                            const std::vector<int>& labels, Loss loss,
                            const ForwardPass& fp) {
    NetGrads g;
    g.hidden.resize(net.hidden.size());

    const Matrix dz_head = head_delta(fp.probs, labels, loss);
    const Matrix& last = net.hidden.empty() ? x_batch : fp.activations.back();
    g.head.W = matmul_at(dz_head, last);
    Matrix bsum = col_sum(dz_head);
    g.head.b.assign(bsum.data.begin(), bsum.data.end());

    Matrix da = matmul(dz_head, net.head.W);
    for (std::size_t l = net.hidden.size(); l-- > 0;) {
        const Matrix& a = fp.activations[l];
        Matrix s(a.rows, a.cols);
        for (std::size_t i = 0; i < a.size(); ++i)
            s.data[i] = da.data[i] * a.data[i] * (1.0 - a.data[i]);
        const Matrix& prev = l == 0 ? x_batch : fp.activations[l - 1];
        g.hidden[l].W = matmul_at(s, prev);
        bsum = col_sum(s);
        g.hidden[l].b.assign(bsum.data.begin(), bsum.data.end());
        if (l > 0) da = matmul(s, net.hidden[l].W);
    }
    return g;
}

} // namespace

Network init_random(const std::vector<std::size_t>& layer_sizes,
                    std::size_t input_size, std::size_t n_classes,
                    std::uint64_t seed) {
    if (input_size == 0 || n_classes == 0)
        throw DomainError("init_random: zero input size or class count");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw DomainError("init_random: zero-width hidden layer");

    Rng rng(seed);
    Network net;
    std::size_t in = input_size;
    for (std::size_t out : layer_sizes) {
        net.hidden.push_back({gaussian_matrix(rng, out, in), std::vector<double>(out, 0.0)});
        net.decoder_c.emplace_back(in, 0.0);
        in = out;
    }
    net.head = {gaussian_matrix(rng, n_classes, in), std::vector<double>(n_classes, 0.0)};
    net.provenance = Provenance::random;
    return net;
}

Network init_from_stack(const std::vector<RbmParams>& stack,
                        std::size_t n_classes, std::uint64_t seed) {
    if (stack.empty()) throw DomainError("init_from_stack: empty stack");
    for (std::size_t l = 1; l < stack.size(); ++l)
        if (stack[l].visible_units() != stack[l - 1].hidden_units())
            throw ShapeError("init_from_stack: layer " + std::to_string(l) + " expects " +
                             std::to_string(stack[l].visible_units()) +
                             " inputs but layer " + std::to_string(l - 1) + " emits " +
                             std::to_string(stack[l - 1].hidden_units()));

    Network net;
    for (const RbmParams& p : stack) {
        net.hidden.push_back({p.W, p.b});
        net.decoder_c.push_back(p.c);
    }
    Rng rng(seed);
    net.head = {gaussian_matrix(rng, n_classes, stack.back().hidden_units()),
                std::vector<double>(n_classes, 0.0)};
    net.provenance = Provenance::pretrained;
    return net;
}

ForwardPass forward(const Network& net, const Matrix& x_batch) {
    if (x_batch.cols != net.input_size())
        throw ShapeError("forward: batch has " + std::to_string(x_batch.cols) +
                         " columns, network expects " + std::to_string(net.input_size()));
    ForwardPass fp;
    fp.activations.reserve(net.hidden.size());
    const Matrix* a = &x_batch;
    for (const Layer& layer : net.hidden) {
        fp.activations.push_back(
            sigmoid(add_row_vector(matmul_bt(*a, layer.W), layer.b)));
        a = &fp.activations.back();
    }
    fp.probs = softmax_rows(add_row_vector(matmul_bt(*a, net.head.W), net.head.b));
    return fp;
}

double batch_loss(const Matrix& probs, const std::vector<int>& labels, Loss loss) {
    check_labels(labels, probs.rows, probs.cols, "batch_loss");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (loss == Loss::nll) {
            total += -std::log(std::max(probs(i, y), 1e-300));
        } else {
            double row = 0.0;
            for (std::size_t j = 0; j < probs.cols; ++j) {
                const double d = probs(i, j) - (j == y ? 1.0 : 0.0);
                row += d * d;
            }
            total += row;
        }
    }
    return total / static_cast<double>(probs.rows);
}

NetGrads backprop_grads(const Network& net, const Matrix& x_batch,
                        const std::vector<int>& labels, Loss loss) {
    check_labels(labels, x_batch.rows, net.n_classes(), "backprop_grads");
    const ForwardPass fp = forward(net, x_batch);
    return grads_from_forward(net, x_batch, labels, loss, fp);
}

std::vector<EpochReport> fine_tune(Network& net, const Matrix& train_x,
                                   const std::vector<int>& train_labels,
                                   const Matrix& test_x,
                                   const std::vector<int>& test_labels,
                                   const FineTuneConfig& cfg) {
    check_labels(train_labels, train_x.rows, net.n_classes(), "fine_tune");
    if (cfg.batch_size == 0) throw DomainError("fine_tune: batch_size must be >= 1");
    if (cfg.epochs > 0 && train_x.rows < cfg.batch_size)
        throw DomainError("fine_tune: " + std::to_string(train_x.rows) +
                          " rows is fewer than batch size " +
                          std::to_string(cfg.batch_size));

    std::vector<Layer> vel_hidden;
    for (const Layer& l : net.hidden)
        vel_hidden.push_back({Matrix(l.W.rows, l.W.cols), std::vector<double>(l.b.size(), 0.0)});
    Layer vel_head{Matrix(net.head.W.rows, net.head.W.cols),
                   std::vector<double>(net.head.b.size(), 0.0)};

    auto apply = [&](Layer& layer, Layer& vel, const Layer& grad, double lr,
                     double momentum, double l2) {
        for (std::size_t i = 0; i < layer.W.size(); ++i) {
            vel.W.data[i] = momentum * vel.W.data[i] -
                            lr * (grad.W.data[i] + l2 * layer.W.data[i]);
            layer.W.data[i] += vel.W.data[i];
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i) {
            vel.b[i] = momentum * vel.b[i] - lr * grad.b[i];
            layer.b[i] += vel.b[i];
        }
    };

    std::vector<EpochReport> reports;
    Matrix batch;
    std::vector<int> batch_labels;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double momentum = momentum_at(epoch, cfg.epochs, cfg.momentum_initial,
                                            cfg.momentum_final);
        Rng shuffle_rng(derive_seed(cfg.seed, epoch));
        const std::vector<std::size_t> order = permutation(shuffle_rng, train_x.rows);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < train_x.rows; begin += cfg.batch_size) {
            const std::size_t end = std::min(train_x.rows, begin + cfg.batch_size);
            batch = Matrix(end - begin, train_x.cols);
            batch_labels.resize(end - begin);
            for (std::size_t r = begin; r < end; ++r) {
                const auto src = train_x.row(order[r]);
                std::copy(src.begin(), src.end(), batch.row(r - begin).begin());
                batch_labels[r - begin] = train_labels[order[r]];
            }

            const ForwardPass fp = forward(net, batch);
            const double loss = batch_loss(fp.probs, batch_labels, cfg.loss);
            if (!std::isfinite(loss))
                throw NumericError("fine_tune: non-finite loss (epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ")");
            loss_sum += loss * static_cast<double>(batch.rows);

            const NetGrads g = grads_from_forward(net, batch, batch_labels, cfg.loss, fp);
            for (std::size_t l = 0; l < net.hidden.size(); ++l)
                apply(net.hidden[l], vel_hidden[l], g.hidden[l], cfg.learning_rate,
                      momentum, cfg.l2);
            apply(net.head, vel_head, g.head, cfg.learning_rate, momentum, cfg.l2);
            ++batch_index;
        }

        EpochReport rep;
        rep.epoch = epoch;
        rep.train_loss = loss_sum / static_cast<double>(train_x.rows);
        rep.test_error = evaluate(net, test_x, test_labels);
        reports.push_back(rep);
    }
    return reports;
}

double evaluate(const Network& net, const Matrix& x, const std::vector<int>& labels) {
    if (x.rows == 0) throw DomainError("evaluate: empty test set");
    check_labels(labels, x.rows, net.n_classes(), "evaluate");
    const ForwardPass fp = forward(net, x);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto pi = fp.probs.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < fp.probs.cols; ++j)
            if (pi[j] > pi[best]) best = j; // ties keep the lowest index
        if (best != static_cast<std::size_t>(labels[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(x.rows);
}

} // namespace slab
