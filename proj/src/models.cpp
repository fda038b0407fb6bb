#include "skd/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace skd {

void ModelSpec::validate() const {
    if (widths.empty()) throw ConfigError("model: needs at least one block");
    for (std::size_t w : widths)
        if (w == 0) throw ConfigError("model: zero-width block");
    if (classes < 1) throw ConfigError("model: needs at least one class");
    if (aux_heads && widths.size() < 2)
        throw ConfigError("model: auxiliary heads need m >= 2 blocks");
    if (kind == ModelKind::mlp) {
        if (input_shape.size() != 1) throw ConfigError("mlp: input shape must be (d,)");
    } else {
        if (input_shape.size() != 3) throw ConfigError("small_cnn: input shape must be (C,H,W)");
        // each block halves the spatial extent
        std::size_t h = input_shape[1], w = input_shape[2];
        for (std::size_t k = 0; k < widths.size(); ++k) {
            h /= 2;
            w /= 2;
            if (h == 0 || w == 0)
                throw ConfigError("small_cnn: input " + shape_str(input_shape) + " too small for " +
                                  std::to_string(widths.size()) + " pooling blocks");
        }
    }
}

namespace {

std::vector<double> uniform_fan_in(Rng& rng, std::size_t n, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
}

}  // namespace

BlockNet BlockNet::build(const ModelSpec& spec) {
    spec.validate();
    BlockNet net;
    net.spec_ = spec;
    Rng rng(spec.init_seed);
    const std::size_t m = spec.block_count();

    auto add_linear = [&](const std::string& name, std::size_t in, std::size_t out) {
        const std::size_t wi = net.params_.segment_count();
        net.params_.append(name + ".w", Tensor::leaf({in, out}, uniform_fan_in(rng, in * out, in), true));
        net.params_.append(name + ".b", Tensor::leaf({out}, std::vector<double>(out, 0.0), true));
        return BlockRef{wi, wi + 1};
    };
    auto add_conv = [&](const std::string& name, std::size_t cin, std::size_t cout) {
        const std::size_t wi = net.params_.segment_count();
        const std::size_t fan_in = cin * 9;
        net.params_.append(name + ".w",
                           Tensor::leaf({cout, cin, 3, 3}, uniform_fan_in(rng, cout * fan_in, fan_in), true));
        net.params_.append(name + ".b", Tensor::leaf({cout}, std::vector<double>(cout, 0.0), true));
        return BlockRef{wi, wi + 1};
    };

    if (spec.kind == ModelKind::mlp) {
        std::size_t in = spec.input_shape[0];
        for (std::size_t k = 0; k < m; ++k) {
            net.blocks_.push_back(add_linear("block" + std::to_string(k + 1), in, spec.widths[k]));
            in = spec.widths[k];
        }
    } else {
        std::size_t cin = spec.input_shape[0];
        for (std::size_t k = 0; k < m; ++k) {
            net.blocks_.push_back(add_conv("block" + std::to_string(k + 1), cin, spec.widths[k]));
            cin = spec.widths[k];
        }
    }
    net.head_ = add_linear("head", net.feature_dim(), spec.classes);

    if (spec.aux_heads) {
        for (std::size_t k = 1; k < m; ++k) {
            const std::string base = "aux" + std::to_string(k);
            AuxRef ref{};
            const BlockRef align = add_linear(base + ".align", spec.widths[k - 1], net.feature_dim());
            const BlockRef cls = add_linear(base + ".cls", net.feature_dim(), spec.classes);
            ref.align_w = align.weight;
            ref.align_b = align.bias;
            ref.cls_w = cls.weight;
            ref.cls_b = cls.bias;
            net.aux_.push_back(ref);
        }
    }
    return net;
}

Tensor BlockNet::activation(const Tensor& x) const {
    return spec_.act == Activation::relu ? relu(x) : tanh_op(x);
}

Tensor BlockNet::apply_block(const Tensor& x, std::size_t k) const {
    const BlockRef& b = blocks_[k];
    if (spec_.kind == ModelKind::mlp)
        return activation(add_rowwise(matmul(x, params_.tensor(b.weight)), params_.tensor(b.bias)));
    Tensor y = conv2d(x, params_.tensor(b.weight), 1, 1);
    y = add_channelwise(y, params_.tensor(b.bias));
    return avg_pool2(activation(y));
}

Tensor BlockNet::forward_to(const Tensor& x, std::size_t k) const {
    if (k < 1 || k > block_count())
        throw ConfigError("forward_to: block index " + std::to_string(k) + " out of [1," +
                          std::to_string(block_count()) + "]");
    Tensor h = x;
    for (std::size_t i = 0; i < k; ++i) h = apply_block(h, i);
    return h;
}

Tensor BlockNet::pool_features(const Tensor& block_out) const {
    return spec_.kind == ModelKind::mlp ? block_out : mean_hw(block_out);
}

BlockNet::FullOut BlockNet::forward_full(const Tensor& x) const {
    Tensor feats = pool_features(forward_to(x, block_count()));
    Tensor logits =
        add_rowwise(matmul(feats, params_.tensor(head_.weight)), params_.tensor(head_.bias));
    return {feats, logits};
}

BlockNet::StudentOut BlockNet::forward_student(const Tensor& x, std::size_t k) const {
    if (!spec_.aux_heads) throw ConfigError("forward_student: model has no auxiliary heads");
    if (k < 1 || k >= block_count())
        throw ConfigError("forward_student: student index " + std::to_string(k) + " out of [1," +
                          std::to_string(block_count()) + ")");
    const AuxRef& ref = aux_[k - 1];
    Tensor pooled = pool_features(forward_to(x, k));
    Tensor feats =
        add_rowwise(matmul(pooled, params_.tensor(ref.align_w)), params_.tensor(ref.align_b));
    Tensor logits =
        add_rowwise(matmul(feats, params_.tensor(ref.cls_w)), params_.tensor(ref.cls_b));
    return {feats, logits};
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'S', 'K', 'D', 'V', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw TruncatedFileError("checkpoint: '" + path + "' truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_params(const ParamVector& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
    out.write(kMagic, 5);
    write_u64_le(out, params.total_dim());
    const std::vector<double> flat = params.flatten();
    for (double v : flat) {
        const auto u = std::bit_cast<std::uint64_t>(v);
        write_u64_le(out, u);
    }
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params.segment_count(); ++i) {
        const std::string& name = params.name(i);
        write_u64_le(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64_le(out, offset);
        const std::uint64_t len = params.tensor(i).numel();
        write_u64_le(out, len);
        offset += len;
    }
}

void load_params(ParamVector& params, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[5];
    if (!in.read(magic, 5)) throw TruncatedFileError("checkpoint: '" + path + "' truncated");
    if (std::memcmp(magic, kMagic, 5) != 0)
        throw MagicMismatchError("checkpoint: '" + path + "' has wrong magic (want SKDV1)");
    const std::uint64_t dim = read_u64_le(in, path);
    if (dim != params.total_dim())
        throw CountMismatchError("checkpoint: dimension mismatch, file has " + std::to_string(dim) +
                                 ", model expects " + std::to_string(params.total_dim()));
    std::vector<double> flat(dim);
    for (auto& v : flat) v = std::bit_cast<double>(read_u64_le(in, path));

    // footer validation: names, offsets and lengths must match segment layout
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params.segment_count(); ++i) {
        const std::uint64_t name_len = read_u64_le(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(name_len)))
            throw TruncatedFileError("checkpoint: '" + path + "' truncated in footer");
        const std::uint64_t off = read_u64_le(in, path);
        const std::uint64_t len = read_u64_le(in, path);
        if (name != params.name(i) || off != offset || len != params.tensor(i).numel())
            throw CountMismatchError("checkpoint: segment '" + name + "' does not match model segment '" +
                                     params.name(i) + "'");
        offset += len;
    }
    params.load_flat(flat);
}

void BlockNet::save_checkpoint(const std::string& path) const { save_params(params_, path); }
void BlockNet::load_checkpoint(const std::string& path) { load_params(params_, path); }

}  // namespace skd
