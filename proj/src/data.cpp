#include "skd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace skd {

void Dataset::validate() const {
    if (labels.empty()) throw ConfigError("dataset '" + name + "': empty");
    if (num_classes == 0) throw ConfigError("dataset '" + name + "': num_classes is zero");
    if (inputs.size() != size() * sample_dim())
        throw ShapeError("dataset '" + name + "': input storage does not match N x sample shape");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
            throw ConfigError("dataset '" + name + "': label " + std::to_string(l) + " out of [0," +
                              std::to_string(num_classes) + ")");
    for (double v : inputs)
        if (!std::isfinite(v)) throw NumericError("dataset '" + name + "': non-finite input value");
}

// ---------------------------------------------------------------------------
// synthetic generation
// ---------------------------------------------------------------------------

namespace {

Dataset gen_gaussian_mixture(const SyntheticSpec& spec) {
    Rng rng(spec.seed);
    // class means: radius-scaled random directions; two classes are placed
    // antipodally so the pair is always well separated
    std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.dim, 0.0));
    for (std::size_t c = 0; c < spec.classes; ++c) {
        if (spec.classes == 2 && c == 1) {
            for (std::size_t j = 0; j < spec.dim; ++j) means[1][j] = -means[0][j];
            continue;
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < spec.dim; ++j) {
            means[c][j] = rng.normal();
            norm += means[c][j] * means[c][j];
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < spec.dim; ++j) means[c][j] *= spec.mean_radius / norm;
    }

    Dataset ds;
    ds.name = "gaussian-mixture";
    ds.sample_shape = {spec.dim};
    ds.num_classes = spec.classes;
    ds.inputs.resize(spec.n * spec.dim);
    ds.labels.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int label = static_cast<int>(i % spec.classes);  // round-robin keeps classes balanced
        ds.labels[i] = label;
        for (std::size_t j = 0; j < spec.dim; ++j)
            ds.inputs[i * spec.dim + j] =
                means[static_cast<std::size_t>(label)][j] + spec.noise_sigma * rng.normal();
    }
    return ds;
}

Dataset gen_two_spirals(const SyntheticSpec& spec) {
    if (spec.classes != 2) throw ConfigError("two-spirals: requires exactly 2 classes");
    if (spec.dim != 2) throw ConfigError("two-spirals: requires dim == 2");
    Rng rng(spec.seed);
    Dataset ds;
    ds.name = "two-spirals";
    ds.sample_shape = {2};
    ds.num_classes = 2;
    ds.inputs.resize(spec.n * 2);
    ds.labels.resize(spec.n);
    const double turns = 1.75;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double frac = (static_cast<double>(i / 2) + 0.5) / std::ceil(static_cast<double>(spec.n) / 2.0);
        const double t = turns * 2.0 * 3.14159265358979323846 * frac;
        const double r = spec.mean_radius * frac + 0.2;
        const double phase = label == 0 ? 0.0 : 3.14159265358979323846;
        ds.labels[i] = label;
        ds.inputs[i * 2 + 0] = r * std::cos(t + phase) + spec.noise_sigma * rng.normal();
        ds.inputs[i * 2 + 1] = r * std::sin(t + phase) + spec.noise_sigma * rng.normal();
    }
    return ds;
}

}  // namespace

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n < spec.classes)
        throw ConfigError("gen_synthetic: need at least one sample per class (N=" +
                          std::to_string(spec.n) + ", c=" + std::to_string(spec.classes) + ")");
    if (spec.classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
    if (spec.dim == 0) throw ConfigError("gen_synthetic: dim must be positive");
    Dataset ds = spec.kind == SyntheticKind::gaussian_mixture ? gen_gaussian_mixture(spec)
                                                              : gen_two_spirals(spec);
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// IDX ubyte files
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedFileError("idx: truncated header in '" + path + "'");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("idx: cannot open '" + images_path + "'");
    const std::uint32_t imagic = read_u32_be(img, images_path);
    if (imagic != kImageMagic)
        throw MagicMismatchError("idx: bad image magic in '" + images_path + "' (got 0x" +
                                 hex64(imagic).substr(8) + ", want 0x00000803)");
    const std::uint32_t n = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);
    std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * rows * cols);
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
        throw TruncatedFileError("idx: image file '" + images_path + "' shorter than header promises");

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("idx: cannot open '" + labels_path + "'");
    const std::uint32_t lmagic = read_u32_be(lab, labels_path);
    if (lmagic != kLabelMagic)
        throw MagicMismatchError("idx: bad label magic in '" + labels_path + "' (got 0x" +
                                 hex64(lmagic).substr(8) + ", want 0x00000801)");
    const std::uint32_t ln = read_u32_be(lab, labels_path);
    if (ln != n)
        throw CountMismatchError("idx: image count " + std::to_string(n) + " vs label count " +
                                 std::to_string(ln));
    std::vector<unsigned char> raw_labels(ln);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(raw_labels.size())))
        throw TruncatedFileError("idx: label file '" + labels_path + "' shorter than header promises");

    Dataset ds;
    ds.name = images_path;
    ds.sample_shape = {1, rows, cols};
    ds.inputs.resize(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) ds.inputs[i] = static_cast<double>(pixels[i]) / 255.0;
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    int maxl = 0;
    for (int l : ds.labels) maxl = std::max(maxl, l);
    ds.num_classes = static_cast<std::size_t>(maxl) + 1;
    ds.validate();
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    if (ds.sample_shape.size() != 3 || ds.sample_shape[0] != 1)
        throw ConfigError("save_idx: dataset samples must be single-channel images (1,H,W), got " +
                          shape_str(ds.sample_shape));
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IoError("idx: cannot write '" + images_path + "'");
    write_u32_be(img, kImageMagic);
    write_u32_be(img, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(img, static_cast<std::uint32_t>(ds.sample_shape[1]));
    write_u32_be(img, static_cast<std::uint32_t>(ds.sample_shape[2]));
    for (double v : ds.inputs) {
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        const unsigned char b = static_cast<unsigned char>(q);
        img.write(reinterpret_cast<const char*>(&b), 1);
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("idx: cannot write '" + labels_path + "'");
    write_u32_be(lab, kLabelMagic);
    write_u32_be(lab, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw TruncatedFileError("csv: '" + path + "' is empty");
    std::size_t dim = 0;
    {
        std::stringstream hs(header);
        std::string col;
        if (!std::getline(hs, col, ',') || col != "label")
            throw MagicMismatchError("csv: '" + path + "' missing `label` header column");
        while (std::getline(hs, col, ',')) ++dim;
    }
    if (dim == 0) throw ConfigError("csv: '" + path + "' has no feature columns");

    Dataset ds;
    ds.name = path;
    ds.sample_shape = {dim};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) throw TruncatedFileError("csv: short row in '" + path + "'");
        ds.labels.push_back(std::stoi(cell));
        std::size_t got = 0;
        while (std::getline(ls, cell, ',')) {
            ds.inputs.push_back(std::stod(cell));
            ++got;
        }
        if (got != dim)
            throw CountMismatchError("csv: row with " + std::to_string(got) + " features, expected " +
                                     std::to_string(dim));
    }
    if (ds.labels.empty()) throw TruncatedFileError("csv: '" + path + "' has a header but no rows");
    int maxl = 0;
    for (int l : ds.labels) maxl = std::max(maxl, l);
    ds.num_classes = static_cast<std::size_t>(maxl) + 1;
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    if (ds.sample_shape.size() != 1)
        throw ConfigError("save_csv: flat feature vectors only, got " + shape_str(ds.sample_shape));
    std::ofstream out(path);
    if (!out) throw IoError("csv: cannot write '" + path + "'");
    out << "label";
    for (std::size_t j = 0; j < ds.sample_dim(); ++j) out << ",f" << j;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (std::size_t j = 0; j < ds.sample_dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.inputs[i * ds.sample_dim() + j]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

NormStats standardize_fit(const Dataset& train) {
    const std::size_t d = train.sample_dim(), n = train.size();
    NormStats stats;
    stats.mean.assign(d, 0.0);
    stats.stdev.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) stats.mean[j] += train.inputs[i * d + j];
    for (double& m : stats.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = train.inputs[i * d + j] - stats.mean[j];
            stats.stdev[j] += diff * diff;
        }
    for (double& s : stats.stdev) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-12);
    return stats;
}

void standardize_apply(Dataset& ds, const NormStats& stats) {
    const std::size_t d = ds.sample_dim();
    if (stats.mean.size() != d)
        throw ShapeError("standardize: stats dim " + std::to_string(stats.mean.size()) +
                         " vs data dim " + std::to_string(d));
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double& v = ds.inputs[i * d + j];
            v = (v - stats.mean[j]) / stats.stdev[j];
        }
}

// ---------------------------------------------------------------------------
// batch streams
// ---------------------------------------------------------------------------

std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("batches: batch size must be positive");
    return (n + batch_size - 1) / batch_size;
}

std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, const StreamConfig& cfg,
                                              std::size_t epoch) {
    if (cfg.batch_size > dataset_size)
        throw ConfigError("batches: batch size " + std::to_string(cfg.batch_size) +
                          " exceeds dataset size " + std::to_string(dataset_size));
    std::vector<std::size_t> perm(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) perm[i] = i;
    Rng rng(cfg.run_seed + epoch);
    rng.shuffle(perm.begin(), perm.end());

    std::vector<std::vector<std::size_t>> out;
    out.reserve(batches_per_epoch(dataset_size, cfg.batch_size));
    for (std::size_t start = 0; start < dataset_size; start += cfg.batch_size) {
        const std::size_t end = std::min(start + cfg.batch_size, dataset_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

Tensor make_batch_inputs(const Dataset& ds, std::span<const std::size_t> idx) {
    const std::size_t d = ds.sample_dim();
    std::vector<double> data(idx.size() * d);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(ds.inputs.begin() + static_cast<std::ptrdiff_t>(idx[i] * d),
                  ds.inputs.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * d),
                  data.begin() + static_cast<std::ptrdiff_t>(i * d));
    Shape shape;
    shape.push_back(idx.size());
    for (std::size_t s : ds.sample_shape) shape.push_back(s);
    return Tensor::constant(std::move(shape), std::move(data));
}

std::vector<int> make_batch_labels(const Dataset& ds, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
    return out;
}

}  // namespace skd
