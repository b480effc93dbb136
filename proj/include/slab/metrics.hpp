#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slab/matrix.hpp"

namespace slab {

/// Activation snapshot of one layer for sparsity analysis. The decoder
/// context (the layer's own weight matrix plus a visible-side bias, or
/// zeros when the layer was never part of a generative model) is what
/// threshold calibration reconstructs through.
struct LayerActivations {
    int layer_index = 0;
    Matrix activations;            // samples x units, entries in [0,1]
    std::vector<int> labels;       // per-sample class indices
    Matrix decoder_w;              // units x inputs; empty if no decoder
    std::vector<double> decoder_c; // length inputs; empty means zeros

    bool has_decoder() const { return decoder_w.size() > 0; }
};

/// Unit-activity indicator bits of one representation at threshold tau.
struct BinaryActivationVector {
    std::vector<std::uint8_t> bits;
    double tau = 0.0;
};

struct ThresholdResult {
    double tau = 0.0;
    bool satisfied = false; // false: no grid candidate met the budget
    double deviation = 0.0; // mean reconstruction deviation at tau
};

/// Average activation-overlap per combination size k.
struct AodCurve {
    std::vector<std::size_t> k;
    std::vector<double> value;
    double tau = 0.0;
};

/// Hoyer sparseness (sqrt(n) - L1/L2) / (sqrt(n) - 1), clamped to [0,1].
/// 1 means one-hot support, 0 means all entries equal in magnitude.
/// Requires n >= 2; an all-zero vector returns 1.0 by convention
/// (maximal sparseness).
double hspm(std::span<const double> h);

/// Mean of per-row hspm over the activation matrix.
double mean_hspm(const Matrix& activations);

/// Bit i is 1 iff |h_i| >= tau.
BinaryActivationVector binarize(std::span<const double> h, double tau);

/// Largest tau from a 1000-point quantile grid of pooled |activation|
/// values (descending scan) such that zeroing all entries below tau
/// changes the decoder's mean-field reconstruction by less than `budget`
/// in mean squared norm:
///
///   mean over samples of || f(WT s + c) - f(WT h + c) ||^2 < budget,
///   s_i = h_i if |h_i| >= tau else 0.
///
/// Calibration uses the first min(1000, samples) rows. If no candidate
/// meets the budget the result is tau = 0 with satisfied = false.
ThresholdResult calibrate_threshold(const LayerActivations& acts,
                                    double budget = 0.05);

/// Activation binary-vector of one class: threshold the mean of the
/// class's representations. The mean is taken in representation space,
/// which keeps the definition layer-wise applicable.
BinaryActivationVector class_vector(const LayerActivations& acts, int cls,
                                    double tau);

/// Fraction of positions where every vector is active (logical
/// conjunction across the set).
double aod(const std::vector<BinaryActivationVector>& vectors);

/// Mean aod over all C(m, k) combinations of the m class vectors at the
/// given threshold. Requires 2 <= k <= m.
double average_aod(const LayerActivations& acts, std::size_t k, double tau);

/// average_aod for every k in [k_min, k_max] at the layer's calibrated
/// threshold.
AodCurve aod_curve(const LayerActivations& acts, std::size_t k_min,
                   std::size_t k_max, double tau);

} // namespace slab
