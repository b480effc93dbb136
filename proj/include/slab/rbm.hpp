#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "slab/matrix.hpp"
#include "slab/rng.hpp"

namespace slab {

/// Restricted Boltzmann machine parameters. W is d_h x d_x; b biases the
/// hidden units, c the visible units.
struct RbmParams {
    Matrix W;
    std::vector<double> b; // hidden bias, length d_h
    std::vector<double> c; // visible bias, length d_x

    std::size_t hidden_units() const { return W.rows; }
    std::size_t visible_units() const { return W.cols; }
};

struct RbmTrainConfig {
    double learning_rate = 0.1; // usual grid: 1, 0.1, 0.05, 0.01
    double momentum_initial = 0.5;
    double momentum_final = 0.9;
    double l2 = 1e-4; // weights only, never biases
    std::size_t batch_size = 100;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
};

/// Per-epoch training telemetry.
struct Cd1Stats {
    std::size_t epoch = 0;
    double recon_error = 0.0;     // mean ||x - v1||^2 per sample
    double update_norm = 0.0;     // Frobenius norm of the weight update
};

/// Momentum state carried across CD-1 steps.
struct Cd1Buffers {
    Matrix dW;
    std::vector<double> db;
    std::vector<double> dc;

    explicit Cd1Buffers(const RbmParams& p)
        : dW(p.W.rows, p.W.cols), db(p.b.size(), 0.0), dc(p.c.size(), 0.0) {}
};

/// Momentum coefficient for 0-based `epoch` out of `total`: linear ramp
/// from m0 to m1 over the first half of the run, constant m1 after.
double momentum_at(std::size_t epoch, std::size_t total, double m0 = 0.5,
                   double m1 = 0.9);

/// Energy -hT W x - cT x - bT h of one joint configuration.
double energy(const RbmParams& p, std::span<const double> x,
              std::span<const double> h);

/// p(h_j=1|x) per sample row: sigmoid(x WT + b).
Matrix prop_up(const RbmParams& p, const Matrix& x_batch);

/// p(x_i=1|h) per sample row: sigmoid(h W + c).
Matrix prop_down(const RbmParams& p, const Matrix& h_batch);

/// One CD-1 step over a minibatch, in place.
///
///   h0p = prop_up(x)           positive mean-field statistics
///   h0  = bernoulli(h0p)       the only sampling step
///   v1  = prop_down(h0)        mean-field reconstruction
///   h1p = prop_up(v1)          negative statistics
///   dW  = lr*((h0pT x - h1pT v1)/n - l2*W) + momentum*dW_prev
///
/// Bias updates are analogous with no L2 term. Returns the batch
/// reconstruction error and weight-update norm (epoch field left 0).
Cd1Stats cd1_update(RbmParams& p, const Matrix& x_batch,
                    const RbmTrainConfig& cfg, double momentum, Rng& rng,
                    Cd1Buffers& buffers);

/// Mean log p(x) over the dataset rows by exhaustive enumeration of all
/// binary states. Guarded to d_x + d_h <= 24. Test oracle; not a
/// training-path dependency.
double exact_log_likelihood(const RbmParams& p, const Matrix& dataset);

struct RbmTrainResult {
    RbmParams params;
    std::vector<Cd1Stats> epochs;
};

/// Full CD-1 training run: W ~ N(0, 0.01^2), zero biases, seeded
/// shuffled minibatches, the momentum ramp above. epochs == 0 returns
/// the initial parameters untouched. `on_epoch`, when set, observes the
/// parameters after each completed epoch (sweep checkpointing).
using EpochObserver = std::function<void(std::size_t, const RbmParams&)>;
RbmTrainResult train_rbm(const Matrix& data, std::size_t hidden_units,
                         const RbmTrainConfig& cfg,
                         const EpochObserver& on_epoch = {});

/// Greedy layer-wise pretraining. Layer l trains on the mean-field
/// activations (probabilities, never samples) of layer l-1; layer 0
/// trains on `data` with cfg.seed unchanged, deeper layers reseed with
/// derive_seed(cfg.seed, l).
std::vector<RbmParams> pretrain_stack(const Matrix& data,
                                      const std::vector<std::size_t>& layer_sizes,
                                      const RbmTrainConfig& cfg);

} // namespace slab
