#pragma once

#include <cstdint>
#include <vector>

#include "slab/matrix.hpp"
#include "slab/rbm.hpp"
#include "slab/rng.hpp"

namespace slab {

enum class Provenance { random, pretrained };

enum class Loss { nll, squared };

/// One dense layer: W is (out x in), b has `out` entries.
struct Layer {
    Matrix W;
    std::vector<double> b;
};

/// Sigmoid feedforward classifier with a softmax head. Each hidden layer
/// keeps a visible-side bias (`decoder_c`): copied from the source RBM
/// for pretrained networks, zeros otherwise. It never enters the forward
/// pass; the sparsity metrics use it to calibrate activation thresholds.
struct Network {
    std::vector<Layer> hidden;
    Layer head;
    std::vector<std::vector<double>> decoder_c; // one per hidden layer
    Provenance provenance = Provenance::random;

    std::size_t input_size() const { return hidden.empty() ? head.W.cols : hidden.front().W.cols; }
    std::size_t n_classes() const { return head.W.rows; }
};

struct FineTuneConfig {
    double learning_rate = 0.1;
    double momentum_initial = 0.5;
    double momentum_final = 0.9;
    double l2 = 1e-4;
    std::size_t batch_size = 100;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    Loss loss = Loss::nll;
};

struct EpochReport {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double test_error = 0.0; // fraction in [0,1]
};

struct ForwardPass {
    std::vector<Matrix> activations; // one per hidden layer, batch x units
    Matrix probs;                    // batch x classes, rows sum to 1
};

/// Gradients of the mean batch loss, mirroring Network's parameters.
/// The L2 penalty is not included here; the optimizer adds it.
struct NetGrads {
    std::vector<Layer> hidden;
    Layer head;
};

/// All weights ~ N(0, 0.01^2), all biases zero.
Network init_random(const std::vector<std::size_t>& layer_sizes,
                    std::size_t input_size, std::size_t n_classes,
                    std::uint64_t seed);

/// Hidden layers adopt each RBM's (W, b); the visible biases are kept as
/// decoder context. The softmax head is randomly initialized like
/// init_random's layers.
Network init_from_stack(const std::vector<RbmParams>& stack,
                        std::size_t n_classes, std::uint64_t seed);

ForwardPass forward(const Network& net, const Matrix& x_batch);

double batch_loss(const Matrix& probs, const std::vector<int>& labels, Loss loss);

NetGrads backprop_grads(const Network& net, const Matrix& x_batch,
                        const std::vector<int>& labels, Loss loss);

/// Minibatch SGD with the shared momentum ramp and L2 on weights only.
/// Trains in place; one EpochReport per epoch with the mean training
/// loss and the test error after that epoch.
std::vector<EpochReport> fine_tune(Network& net, const Matrix& train_x,
                                   const std::vector<int>& train_labels,
                                   const Matrix& test_x,
                                   const std::vector<int>& test_labels,
                                   const FineTuneConfig& cfg);

/// Fraction of argmax mispredictions; argmax ties break toward the
/// lowest class index.
double evaluate(const Network& net, const Matrix& x,
                const std::vector<int>& labels);

} // namespace slab
