#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slab/matrix.hpp"

namespace slab {

/// Labeled dataset with features normalized to [0,1].
struct Dataset {
    Matrix features;         // samples x dims
    std::vector<int> labels; // class indices in [0, n_classes)
    std::size_t n_classes = 0;

    std::size_t size() const { return features.rows; }
};

/// Validates the Dataset invariants (feature range, label range,
/// label/row agreement) and throws DomainError on violation.
Dataset make_dataset(Matrix features, std::vector<int> labels,
                     std::size_t n_classes);

/// Seeded epoch shuffle: batch_size >= 1, permutation is a bijection of
/// the sample indices, and the final short batch is kept.
struct BatchPlan {
    std::uint64_t seed = 0;
    std::size_t batch_size = 0;
    std::vector<std::size_t> order;
};

BatchPlan make_batch_plan(std::size_t n_samples, std::size_t batch_size,
                          std::uint64_t seed, std::uint64_t epoch);

struct Batch {
    Matrix features;
    std::vector<int> labels;
};

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size,
                                std::uint64_t seed, std::uint64_t epoch);

/// Big-endian IDX image file (magic 0x00000803): n x rows x cols bytes,
/// flattened to n x (rows*cols) and scaled into [0,1] by 1/255.
Matrix load_idx_images(const std::filesystem::path& path);

/// Big-endian IDX label file (magic 0x00000801). Values are returned as
/// read; range validation happens when a Dataset is assembled.
std::vector<int> load_idx_labels(const std::filesystem::path& path);

/// Inverse of load_idx_images (entries re-scaled by 255 and rounded),
/// used for fixtures and the byte-exact round-trip check.
void write_idx_images(const std::filesystem::path& path, const Matrix& images,
                      std::uint32_t img_rows, std::uint32_t img_cols);
void write_idx_labels(const std::filesystem::path& path,
                      const std::vector<int>& labels);

/// Per-column min-max normalization into [0,1]; constant columns map to
/// 0. Exactly idempotent.
void normalize_columns(Matrix& m);

/// CSV with n_features numeric columns plus a trailing non-negative
/// integer label column. An optional header row is auto-detected (first
/// row with a non-numeric cell). Features are min-max normalized.
Dataset load_csv_features(const std::filesystem::path& path,
                          std::size_t n_features = 16);

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Deterministic seeded split; the first round(n*train_fraction) of a
/// seeded permutation become the train set.
SplitResult split_dataset(const Dataset& ds, double train_fraction,
                          std::uint64_t seed);

/// CSV manifest of a split: columns index,split with one row per sample.
void write_split_manifest(const std::filesystem::path& path,
                          const SplitResult& split);

/// Synthetic bars-on-a-grid dataset on an 8x8 grid (64 features, 16
/// bars: 8 rows + 8 columns). Class c lights bars {c, c+1, c+2} mod 16,
/// so neighboring classes share bars; `noise` flips each pixel
/// independently. Classes are exactly balanced. classes must lie in
/// [2, 16] to keep the bar subsets distinct.
Dataset synth_bars(std::size_t n_per_class, std::size_t classes, double noise,
                   std::uint64_t seed);

} // namespace slab
