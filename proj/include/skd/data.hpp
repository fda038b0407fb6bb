#pragma once

#include <span>
#include <string>
#include <vector>

#include "skd/tensor.hpp"

namespace skd {

/// Immutable sample store. Inputs are row-major with a common per-sample
/// shape; labels are class ids in [0, num_classes).
struct Dataset {
    std::string name;
    Shape sample_shape;
    std::vector<double> inputs;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_dim() const { return shape_numel(sample_shape); }
    void validate() const;
};

enum class SyntheticKind { gaussian_mixture, two_spirals };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::gaussian_mixture;
    std::size_t n = 2000;
    std::size_t classes = 10;
    std::size_t dim = 32;
    std::uint64_t seed = 1;
    double mean_radius = 3.0;  // class-mean magnitude (gaussian mixture)
    double noise_sigma = 1.0;  // within-class standard deviation
};

/// Balanced synthetic classification set, deterministic from the seed.
/// Class sizes differ by at most one.
Dataset gen_synthetic(const SyntheticSpec& spec);

// IDX (ubyte) ingestion: 0x00000803 image files, 0x00000801 label files,
// big-endian dimensions. Pixels scale to [0,1]. Distinct error classes:
// MagicMismatchError, TruncatedFileError, CountMismatchError.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// CSV alternative, header `label,f0,f1,...`.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stdev;
};

/// Per-feature standardization; fit on the training split only.
NormStats standardize_fit(const Dataset& train);
void standardize_apply(Dataset& ds, const NormStats& stats);

struct StreamConfig {
    std::uint64_t run_seed = 1;
    std::size_t batch_size = 128;
};

std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size);

/// Shuffled index slices for one epoch. The permutation is seeded by
/// run_seed + epoch, so any two streams with equal config see the same data
/// flow. The last slice may be partial; concatenated slices form a
/// permutation of 0..N-1.
std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, const StreamConfig& cfg,
                                              std::size_t epoch);

Tensor make_batch_inputs(const Dataset& ds, std::span<const std::size_t> idx);
std::vector<int> make_batch_labels(const Dataset& ds, std::span<const std::size_t> idx);

}  // namespace skd
