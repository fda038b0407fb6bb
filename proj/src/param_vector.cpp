#include "skd/param_vector.hpp"

namespace skd {

void ParamVector::append(std::string name, Tensor t) {
    if (!t.defined()) throw ConfigError("ParamVector: cannot append undefined tensor '" + name + "'");
    total_ += t.numel();
    segments_.emplace_back(std::move(name), std::move(t));
}

std::vector<Tensor> ParamVector::tensors() const {
    std::vector<Tensor> out;
    out.reserve(segments_.size());
    for (const auto& [_, t] : segments_) out.push_back(t);
    return out;
}

std::vector<double> ParamVector::flatten() const {
    std::vector<double> out;
    out.reserve(total_);
    for (const auto& [_, t] : segments_) out.insert(out.end(), t.data().begin(), t.data().end());
    return out;
}

void ParamVector::load_flat(std::span<const double> values) {
    if (values.size() != total_)
        throw ShapeError("ParamVector: flat length " + std::to_string(values.size()) +
                         " does not match total dim " + std::to_string(total_));
    std::size_t off = 0;
    for (auto& [_, t] : segments_) {
        auto& d = t.mutable_data();
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(off),
                  values.begin() + static_cast<std::ptrdiff_t>(off + d.size()), d.begin());
        off += d.size();
    }
}

std::vector<double> ParamVector::flatten_grad() const {
    std::vector<double> out;
    out.reserve(total_);
    for (const auto& [_, t] : segments_) {
        const auto& g = t.stored_grad();
        if (g.empty())
            out.insert(out.end(), t.numel(), 0.0);
        else
            out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

ParamVector ParamVector::clone(bool requires_grad) const {
    ParamVector copy;
    for (const auto& [name, t] : segments_)
        copy.append(name, Tensor::leaf(t.shape(), t.data(), requires_grad));
    return copy;
}

std::uint64_t ParamVector::value_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : segments_) {
        h = fnv1a(name.data(), name.size(), h);
        h = hash_doubles(t.data(), h);
    }
    return h;
}

}  // namespace skd
