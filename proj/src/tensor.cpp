#include "skd/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace skd {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

namespace {
std::atomic<std::uint64_t> g_next_id{1};
thread_local int g_no_grad_depth = 0;

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return impl;
}
}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::wrap(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    return wrap(new_impl(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double v) { return constant({}, {v}); }

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = shape_numel(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
    const std::size_t n = shape_numel(shape);
    return constant(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    auto impl = new_impl(std::move(shape), std::move(data));
    impl->requires_grad = requires_grad;
    return wrap(std::move(impl));
}

Tensor Tensor::from_vector(std::vector<double> data) {
    const std::size_t n = data.size();
    return constant({n}, std::move(data));
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->data.size(); }
const std::vector<double>& Tensor::data() const { return impl_->data; }
std::vector<double>& Tensor::mutable_data() { return impl_->data; }

double Tensor::value() const {
    if (numel() != 1)
        throw ShapeError("value(): tensor " + shape_str(shape()) + " is not a scalar");
    return impl_->data[0];
}

double Tensor::at(std::size_t flat_index) const { return impl_->data.at(flat_index); }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
std::uint64_t Tensor::id() const { return impl_->id; }
const char* Tensor::op() const { return impl_->op_name; }
const std::vector<double>& Tensor::stored_grad() const { return impl_->grad; }

namespace detail {

void check_finite(const char* op_name, const std::vector<double>& data) {
    for (double v : data) {
        if (!std::isfinite(v))
            throw NumericError(std::string("non-finite value produced by op '") + op_name + "'");
    }
}

Tensor make_node(const char* op_name, Shape shape, std::vector<double> data,
                 std::vector<Tensor> parents,
                 std::function<std::vector<Tensor>(const Tensor&)> vjp) {
    check_finite(op_name, data);
    auto impl = new_impl(std::move(shape), std::move(data));
    impl->op_name = op_name;
    if (grad_enabled()) {
        bool any = false;
        for (const Tensor& p : parents)
            if (p.requires_grad()) any = true;
        if (any) {
            impl->requires_grad = true;
            impl->parents = std::move(parents);
            impl->vjp = std::move(vjp);
        }
    }
    return Tensor::wrap(std::move(impl));
}

}  // namespace detail

}  // namespace skd
