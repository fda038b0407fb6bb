#include "skd/optimizer.hpp"

#include <cmath>
#include <string>

namespace skd {

SgdState::SgdState(double lr, double momentum, std::size_t dim)
    : lr_(lr), momentum_(momentum), velocity_(dim, 0.0) {
    if (lr <= 0.0) throw ConfigError("sgd: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd: momentum must be in [0,1)");
}

void SgdState::set_lr(double lr) {
    if (lr <= 0.0) throw ConfigError("sgd: learning rate must be positive");
    lr_ = lr;
}

void SgdState::step(ParamVector& params, std::span<const double> grads) {
    if (grads.size() != velocity_.size() || params.total_dim() != velocity_.size())
        throw ShapeError("sgd: gradient length " + std::to_string(grads.size()) +
                         " vs velocity dim " + std::to_string(velocity_.size()) +
                         " vs parameter dim " + std::to_string(params.total_dim()));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw NumericError("sgd: non-finite gradient at flat index " + std::to_string(i));
    }
    std::vector<double> theta = params.flatten();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] + grads[i];
        theta[i] -= lr_ * velocity_[i];
    }
    params.load_flat(theta);
}

}  // namespace skd
