#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "skd/common.hpp"

namespace skd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;
struct TensorImpl;

/// Dense 64-bit tensor participating in a reverse-mode graph.
///
/// A Tensor is a shared handle: copying it copies the handle, not the data.
/// Graph edges run child -> parents, so a forward pass owns its whole tape
/// and the tape is freed when the last handle to the result goes away.
/// Backward rules are expressed in terms of other tensor ops, which is what
/// makes gradients themselves differentiable (double backward for H*v).
class Tensor {
public:
    Tensor() = default;

    // factories
    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor leaf(Shape shape, std::vector<double> data, bool requires_grad);
    static Tensor from_vector(std::vector<double> data);  // shape (n,)

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();  // leaves only (optimizer updates)
    double value() const;                 // numel()==1
    double at(std::size_t flat_index) const;
    bool requires_grad() const;
    std::uint64_t id() const;
    const char* op() const;

    // grad written by backward(); empty until then
    const std::vector<double>& stored_grad() const;

    TensorImpl* impl() const { return impl_.get(); }

    static Tensor wrap(std::shared_ptr<TensorImpl> impl);

private:
    std::shared_ptr<TensorImpl> impl_;
};

/// One node of the tape: value plus the recipe for its parents' gradients.
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // populated by backward() on leaves
    bool requires_grad = false;
    bool backward_done = false;  // guards double backward() on a loss root
    std::uint64_t id = 0;
    const char* op_name = "leaf";
    std::vector<Tensor> parents;
    // maps d(out) to a gradient tensor per parent; an undefined Tensor in the
    // result means "parent does not need a gradient"
    std::function<std::vector<Tensor>(const Tensor&)> vjp;
};

/// While alive, newly created tensors record no graph (constants only).
/// Used for teacher forward passes in distillation and for evaluation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

namespace detail {
/// Shared op constructor: checks finiteness, wires parents/vjp when grads are
/// enabled and at least one parent requires them.
Tensor make_node(const char* op_name, Shape shape, std::vector<double> data,
                 std::vector<Tensor> parents,
                 std::function<std::vector<Tensor>(const Tensor&)> vjp);
void check_finite(const char* op_name, const std::vector<double>& data);
}  // namespace detail

}  // namespace skd
