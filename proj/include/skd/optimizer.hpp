#pragma once

#include <span>
#include <vector>

#include "skd/param_vector.hpp"

namespace skd {

/// SGD with classical momentum: v <- momentum*v + g; theta <- theta - lr*v.
/// Gradients arrive batch-averaged, so lr keeps its meaning across batch
/// sizes. Velocity persists for the lifetime of the state; freezing a model
/// simply means not calling step().
class SgdState {
public:
    SgdState(double lr, double momentum, std::size_t dim);

    void step(ParamVector& params, std::span<const double> grads);

    double lr() const { return lr_; }
    void set_lr(double lr);
    double momentum() const { return momentum_; }
    const std::vector<double>& velocity() const { return velocity_; }

private:
    double lr_;
    double momentum_;
    std::vector<double> velocity_;
};

}  // namespace skd
