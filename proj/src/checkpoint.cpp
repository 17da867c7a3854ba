#include "qubodbn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "qubodbn/errors.hpp"

namespace qubodbn {

namespace {

constexpr std::array<char, 8> kMagic{'Q', 'D', 'B', 'N', 'C', 'K', 'P', 'T'};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) {
        std::array<char, 4> b{};
        for (int k = 0; k < 4; ++k) b[static_cast<std::size_t>(k)] = static_cast<char>((v >> (8 * k)) & 0xFF);
        out_.write(b.data(), b.size());
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        std::array<char, 8> b{};
        for (int k = 0; k < 8; ++k) b[static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xFF);
        out_.write(b.data(), b.size());
    }
    void matrix(const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
        }
    }
    void vector(const Eigen::VectorXd& v) {
        for (double x : v) f64(x);
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw TruncationError("checkpoint truncated");
    }
    std::uint32_t u32() {
        std::array<unsigned char, 4> b{};
        bytes(reinterpret_cast<char*>(b.data()), b.size());
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t{b[static_cast<std::size_t>(k)]} << (8 * k);
        return v;
    }
    double f64() {
        std::array<unsigned char, 8> b{};
        bytes(reinterpret_cast<char*>(b.data()), b.size());
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= std::uint64_t{b[static_cast<std::size_t>(k)]} << (8 * k);
        return std::bit_cast<double>(v);
    }
    Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
        }
        return m;
    }
    Eigen::VectorXd vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index k = 0; k < n; ++k) v[k] = f64();
        return v;
    }

private:
    std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    ckpt.model.validate();
    Writer w(out);
    out.write(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.config.size()));
    out.write(ckpt.config.data(), static_cast<std::streamsize>(ckpt.config.size()));

    w.u32(static_cast<std::uint32_t>(ckpt.model.layers.size()));
    for (const auto& layer : ckpt.model.layers) {
        w.u32(static_cast<std::uint32_t>(layer.num_visible()));
        w.u32(static_cast<std::uint32_t>(layer.num_hidden()));
        w.matrix(layer.weights);
        w.vector(layer.visible_bias);
        w.vector(layer.hidden_bias);
    }
    w.u32(static_cast<std::uint32_t>(ckpt.model.output_weights.rows()));
    w.u32(static_cast<std::uint32_t>(ckpt.model.output_weights.cols()));
    w.matrix(ckpt.model.output_weights);
    w.vector(ckpt.model.output_bias);

    const char has_bn = ckpt.bn ? 1 : 0;
    out.write(&has_bn, 1);
    if (ckpt.bn) {
        if (ckpt.bn->layers.size() != ckpt.model.layers.size()) {
            throw ShapeError("batch-norm state does not match the model");
        }
        w.f64(ckpt.bn->epsilon);
        w.f64(ckpt.bn->running_momentum);
        for (const auto& l : ckpt.bn->layers) {
            w.vector(l.gamma);
            w.vector(l.beta);
            w.vector(l.running_mean);
            w.vector(l.running_var);
        }
    }
    if (!out) throw FormatError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
    Reader r(in);
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kMagic) throw FormatError("not a qubodbn checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw UnsupportedError("checkpoint version " + std::to_string(version) + " not supported");
    }
    Checkpoint ckpt;
    ckpt.config.resize(r.u32());
    r.bytes(ckpt.config.data(), ckpt.config.size());

    const std::uint32_t layers = r.u32();
    for (std::uint32_t l = 0; l < layers; ++l) {
        const Eigen::Index m = r.u32();
        const Eigen::Index n = r.u32();
        RbmParams p;
        p.weights = r.matrix(n, m);
        p.visible_bias = r.vector(m);
        p.hidden_bias = r.vector(n);
        ckpt.model.layers.push_back(std::move(p));
    }
    const Eigen::Index classes = r.u32();
    const Eigen::Index top = r.u32();
    ckpt.model.output_weights = r.matrix(classes, top);
    ckpt.model.output_bias = r.vector(classes);
    ckpt.model.validate();

    char has_bn = 0;
    r.bytes(&has_bn, 1);
    if (has_bn) {
        BatchNormState bn;
        bn.epsilon = r.f64();
        bn.running_momentum = r.f64();
        for (const auto& layer : ckpt.model.layers) {
            const Eigen::Index n = layer.num_hidden();
            BatchNormLayer b;
            b.gamma = r.vector(n);
            b.beta = r.vector(n);
            b.running_mean = r.vector(n);
            b.running_var = r.vector(n);
            bn.layers.push_back(std::move(b));
        }
        ckpt.bn = std::move(bn);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path.string());
    write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace qubodbn
