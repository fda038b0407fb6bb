#include "skd/autodiff.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace skd {

namespace {

// Post-order over the requires-grad subgraph, iterative to keep deep chains
// off the call stack. Parent order is fixed by op construction, so the
// resulting order (and therefore every accumulation) is deterministic.
std::vector<TensorImpl*> topo_order(TensorImpl* root) {
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next].impl();
            ++next;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

std::vector<Tensor> gradients(const Tensor& output, std::span<const Tensor> wrt) {
    if (!output.defined()) throw ConfigError("gradients: undefined output");
    if (output.numel() != 1)
        throw ShapeError("gradients: output must be scalar, got " + shape_str(output.shape()));

    std::vector<Tensor> result;
    result.reserve(wrt.size());

    if (!output.requires_grad()) {
        for (const Tensor& t : wrt) result.push_back(Tensor::zeros(t.shape()));
        return result;
    }

    std::vector<TensorImpl*> order = topo_order(output.impl());
    std::unordered_map<TensorImpl*, Tensor> adjoint;
    adjoint.emplace(output.impl(), Tensor::full(output.shape(), 1.0));

    // reverse topological sweep; each node is expanded exactly once
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        auto found = adjoint.find(node);
        if (found == adjoint.end()) continue;  // unreachable through live vjps
        if (!node->vjp) continue;              // leaf
        const Tensor g = found->second;
        std::vector<Tensor> parent_grads = node->vjp(g);
        if (parent_grads.size() != node->parents.size())
            throw Error(std::string("internal: vjp arity mismatch in op '") + node->op_name + "'");
        for (std::size_t i = 0; i < parent_grads.size(); ++i) {
            const Tensor& pg = parent_grads[i];
            if (!pg.defined()) continue;
            TensorImpl* parent = node->parents[i].impl();
            if (!parent->requires_grad) continue;
            if (pg.shape() != parent->shape)
                throw Error(std::string("internal: vjp shape mismatch in op '") + node->op_name +
                            "': " + shape_str(pg.shape()) + " vs " + shape_str(parent->shape));
            auto slot = adjoint.find(parent);
            if (slot == adjoint.end())
                adjoint.emplace(parent, pg);
            else
                slot->second = add(slot->second, pg);
        }
    }

    for (const Tensor& t : wrt) {
        auto found = adjoint.find(t.impl());
        if (found == adjoint.end())
            result.push_back(Tensor::zeros(t.shape()));
        else
            result.push_back(found->second);
    }
    return result;
}

void backward(const Tensor& loss, ParamVector& params) {
    if (!loss.defined()) throw ConfigError("backward: undefined loss");
    if (loss.impl()->backward_done)
        throw Error("backward: loss already consumed; re-run the forward pass first");
    const std::vector<Tensor> wrt = params.tensors();
    std::vector<Tensor> grads = gradients(loss, wrt);
    for (std::size_t i = 0; i < wrt.size(); ++i) wrt[i].impl()->grad = grads[i].data();
    loss.impl()->backward_done = true;
}

std::vector<double> flat_gradients(const Tensor& loss, const ParamVector& params) {
    const std::vector<Tensor> wrt = params.tensors();
    std::vector<Tensor> grads = gradients(loss, wrt);
    std::vector<double> out;
    out.reserve(params.total_dim());
    for (const Tensor& g : grads) out.insert(out.end(), g.data().begin(), g.data().end());
    return out;
}

std::vector<double> hvp(const std::function<Tensor()>& loss_builder, ParamVector& params,
                        std::span<const double> v, HvpMode mode, bool check_determinism) {
    if (v.size() != params.total_dim())
        throw ShapeError("hvp: direction length " + std::to_string(v.size()) +
                         " does not match parameter dim " + std::to_string(params.total_dim()));

    if (check_determinism) {
        const double l1 = loss_builder().value();
        const double l2 = loss_builder().value();
        if (std::bit_cast<std::uint64_t>(l1) != std::bit_cast<std::uint64_t>(l2))
            throw NumericError("hvp: loss builder is not deterministic (repeat evaluation mismatch)");
    }

    if (mode == HvpMode::double_backward) {
        Tensor loss = loss_builder();
        const std::vector<Tensor> wrt = params.tensors();
        std::vector<Tensor> grads = gradients(loss, wrt);
        Tensor gv = Tensor::scalar(0.0);
        std::size_t off = 0;
        for (std::size_t i = 0; i < wrt.size(); ++i) {
            const std::size_t n = wrt[i].numel();
            Tensor vi = Tensor::constant(wrt[i].shape(),
                                         std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(off),
                                                             v.begin() + static_cast<std::ptrdiff_t>(off + n)));
            gv = add(gv, dot(grads[i], vi));
            off += n;
        }
        std::vector<Tensor> hv = gradients(gv, wrt);
        std::vector<double> out;
        out.reserve(params.total_dim());
        for (const Tensor& h : hv) out.insert(out.end(), h.data().begin(), h.data().end());
        return out;
    }

    // central finite differences of the gradient along v
    const std::vector<double> theta = params.flatten();
    double vmax = 0.0, tmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::fabs(x));
    for (double x : theta) tmax = std::max(tmax, std::fabs(x));
    std::vector<double> out(theta.size(), 0.0);
    if (vmax == 0.0) return out;
    const double eps = 1e-5 * (1.0 + tmax) / vmax;

    std::vector<double> shifted(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) shifted[i] = theta[i] + eps * v[i];
    params.load_flat(shifted);
    const std::vector<double> gp = flat_gradients(loss_builder(), params);
    for (std::size_t i = 0; i < theta.size(); ++i) shifted[i] = theta[i] - eps * v[i];
    params.load_flat(shifted);
    const std::vector<double> gm = flat_gradients(loss_builder(), params);
    params.load_flat(theta);

    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * eps);
    return out;
}

}  // namespace skd
