#pragma once

#include <string>
#include <vector>

#include "skd/ops.hpp"
#include "skd/param_vector.hpp"
#include "skd/tensor.hpp"

namespace skd {

enum class ModelKind { mlp, small_cnn };
enum class Activation { relu, tanh };

struct ModelSpec {
    ModelKind kind = ModelKind::mlp;
    // per-block layer widths (mlp) or channel counts (small_cnn)
    std::vector<std::size_t> widths = {64, 64, 64};
    Shape input_shape = {32};  // per-sample; (d,) for mlp, (C,H,W) for small_cnn
    std::size_t classes = 10;
    std::uint64_t init_seed = 1;
    Activation act = Activation::relu;
    bool aux_heads = false;  // alignment + classifier pairs after blocks 1..m-1

    std::size_t block_count() const { return widths.size(); }
    void validate() const;
};

/// Block-wise network: m blocks, a classifier head, and optional auxiliary
/// (alignment, classifier) pairs attached after blocks 1..m-1. forward_to(k)
/// composes exactly blocks 1..k; trunk params, head params and aux params
/// partition the full ParamVector.
class BlockNet {
public:
    static BlockNet build(const ModelSpec& spec);

    const ModelSpec& spec() const { return spec_; }
    ParamVector& params() { return params_; }
    const ParamVector& params() const { return params_; }
    std::size_t block_count() const { return spec_.block_count(); }
    bool has_aux_heads() const { return spec_.aux_heads; }
    /// trunk feature dimension: width (mlp) or channel count (cnn) of block m
    std::size_t feature_dim() const { return spec_.widths.back(); }

    /// raw output of blocks 1..k (k in [1, m]); 4-D map for the cnn
    Tensor forward_to(const Tensor& x, std::size_t k) const;

    struct FullOut {
        Tensor features;  // trunk features (B, feature_dim), pooled for the cnn
        Tensor logits;    // (B, classes)
    };
    FullOut forward_full(const Tensor& x) const;
    Tensor forward(const Tensor& x) const { return forward_full(x).logits; }

    struct StudentOut {
        Tensor features;  // aligned to feature_dim
        Tensor logits;    // aux classifier output (B, classes)
    };
    /// shallow-student view after block k (1 <= k < m); requires aux heads
    StudentOut forward_student(const Tensor& x, std::size_t k) const;

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

private:
    ModelSpec spec_;
    ParamVector params_;
    // segment indices into params_ for structured access
    struct BlockRef {
        std::size_t weight, bias;
    };
    struct AuxRef {
        std::size_t align_w, align_b, cls_w, cls_b;
    };
    std::vector<BlockRef> blocks_;
    BlockRef head_{};
    std::vector<AuxRef> aux_;

    Tensor apply_block(const Tensor& x, std::size_t k) const;
    Tensor pool_features(const Tensor& block_out) const;
    Tensor activation(const Tensor& x) const;
};

// Flat binary parameter checkpoints:
//   "SKDV1" | u64le total_dim | total_dim f64le values (segment order)
//   footer, one entry per segment: u64le name_len | name utf-8 | u64le offset
//   | u64le length (both counted in elements)
void save_params(const ParamVector& params, const std::string& path);
void load_params(ParamVector& params, const std::string& path);

}  // namespace skd
