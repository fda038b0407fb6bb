#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skd/tensor.hpp"

namespace skd {

/// Ordered, named collection of parameter tensors with a flat-vector view.
/// Flatten/load_flat round-trips exactly; segment order is append order.
class ParamVector {
public:
    ParamVector() = default;

    void append(std::string name, Tensor t);

    std::size_t total_dim() const { return total_; }
    std::size_t segment_count() const { return segments_.size(); }
    const std::string& name(std::size_t i) const { return segments_.at(i).first; }
    const Tensor& tensor(std::size_t i) const { return segments_.at(i).second; }
    Tensor& tensor(std::size_t i) { return segments_.at(i).second; }

    std::vector<Tensor> tensors() const;

    std::vector<double> flatten() const;
    void load_flat(std::span<const double> values);  // in-place write into tensors

    /// Concatenation of per-segment grads written by backward(); zeros for
    /// segments the loss never touched.
    std::vector<double> flatten_grad() const;

    /// Deep copy with fresh leaf tensors.
    ParamVector clone(bool requires_grad) const;

    std::uint64_t value_hash() const;

private:
    std::vector<std::pair<std::string, Tensor>> segments_;
    std::size_t total_ = 0;
};

}  // namespace skd
