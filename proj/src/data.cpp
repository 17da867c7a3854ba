#include "qubodbn/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>
#include <numeric>
#include <string>

#include "qubodbn/errors.hpp"
#include "qubodbn/random.hpp"

namespace qubodbn {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

constexpr int kCrop = 2;
constexpr int kBlock = 4;
constexpr int kGrid = 6;

constexpr std::array<int, kReducedPixels> kRetainedCells = [] {
    std::array<int, kReducedPixels> out{};
    int k = 0;
    for (int cell = 0; cell < kGrid * kGrid; ++cell) {
        if (cell == 0 || cell == kGrid - 1 || cell == kGrid * (kGrid - 1) || cell == kGrid * kGrid - 1) {
            continue;
        }
        out[static_cast<std::size_t>(k++)] = cell;
    }
    return out;
}();

}  // namespace

std::size_t idx_element_size(std::uint8_t element_type) {
    switch (element_type) {
        case 0x08:
        case 0x09:
            return 1;
        case 0x0B:
            return 2;
        case 0x0C:
        case 0x0D:
            return 4;
        case 0x0E:
            return 8;
        default:
            throw UnsupportedError("unsupported IDX element type " + std::to_string(element_type));
    }
}

std::size_t IdxArray::element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t d) { return a * d; });
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw TruncationError("IDX stream shorter than its magic number");
    if (bytes[0] != 0 || bytes[1] != 0) {
        throw FormatError("bad IDX magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08X", read_be32(bytes, 0));
            return std::string(buf);
        }());
    }
    IdxArray out;
    out.element_type = bytes[2];
    const std::size_t elem = idx_element_size(out.element_type);
    const std::size_t rank = bytes[3];
    if (rank == 0) throw FormatError("IDX rank must be at least 1");
    const std::size_t header = 4 + 4 * rank;
    if (bytes.size() < header) throw TruncationError("IDX header truncated");
    for (std::size_t d = 0; d < rank; ++d) out.dims.push_back(read_be32(bytes, 4 + 4 * d));

    const std::size_t expected = out.element_count() * elem;
    const std::size_t actual = bytes.size() - header;
    if (actual < expected) {
        throw TruncationError("IDX payload has " + std::to_string(actual) + " bytes, header declares " +
                              std::to_string(expected));
    }
    if (actual > expected) {
        throw FormatError("IDX payload has " + std::to_string(actual - expected) + " trailing bytes");
    }
    out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return out;
}

IdxArray read_idx_file(const std::filesystem::path& path) {
    // gzread passes uncompressed files through unchanged.
    std::unique_ptr<gzFile_s, decltype(&gzclose)> file(gzopen(path.c_str(), "rb"), &gzclose);
    if (!file) throw ArgumentError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::array<std::uint8_t, 1 << 16> chunk{};
    for (;;) {
        const int got = gzread(file.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
        if (got < 0) throw FormatError("failed to decompress " + path.string());
        if (got == 0) break;
        bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + got);
    }
    return parse_idx(bytes);
}

LabeledImages LabeledImages::subset(std::span<const std::size_t> indices) const {
    LabeledImages out;
    out.width = width;
    out.height = height;
    out.images.resize(static_cast<Eigen::Index>(indices.size()), images.cols());
    out.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= size()) throw ArgumentError("subset index out of range");
        out.images.row(static_cast<Eigen::Index>(k)) = images.row(static_cast<Eigen::Index>(indices[k]));
        out.labels.push_back(labels[indices[k]]);
    }
    return out;
}

LabeledImages labeled_images_from_idx(const IdxArray& images, const IdxArray& labels) {
    if (images.element_type != 0x08 || images.dims.size() != 3) {
        throw UnsupportedError("images must be an unsigned-byte rank-3 IDX array");
    }
    if (labels.element_type != 0x08 || labels.dims.size() != 1) {
        throw UnsupportedError("labels must be an unsigned-byte rank-1 IDX array");
    }
    if (images.dims[0] != labels.dims[0]) {
        throw ShapeError("image count " + std::to_string(images.dims[0]) + " differs from label count " +
                         std::to_string(labels.dims[0]));
    }
    const auto count = static_cast<Eigen::Index>(images.dims[0]);
    const auto pixels = static_cast<Eigen::Index>(images.dims[1]) * images.dims[2];
    LabeledImages out;
    out.height = static_cast<int>(images.dims[1]);
    out.width = static_cast<int>(images.dims[2]);
    out.images.resize(count, pixels);
    for (Eigen::Index r = 0; r < count; ++r) {
        for (Eigen::Index c = 0; c < pixels; ++c) {
            out.images(r, c) = images.payload[static_cast<std::size_t>(r * pixels + c)] / 255.0;
        }
    }
    out.labels.assign(labels.payload.begin(), labels.payload.end());
    for (int l : out.labels) {
        if (l > 9) throw FormatError("label " + std::to_string(l) + " outside 0..9");
    }
    return out;
}

LabeledImages load_labeled_images(const std::filesystem::path& images,
                                  const std::filesystem::path& labels) {
    return labeled_images_from_idx(read_idx_file(images), read_idx_file(labels));
}

Eigen::VectorXd reduce_image(std::span<const double> pixels) {
    if (pixels.size() != static_cast<std::size_t>(kMnistSide * kMnistSide)) {
        throw ShapeError("reduce_image expects 784 pixels, got " + std::to_string(pixels.size()));
    }
    Eigen::VectorXd out(kReducedPixels);
    for (int k = 0; k < kReducedPixels; ++k) {
        const int cell = kRetainedCells[static_cast<std::size_t>(k)];
        const int row0 = kCrop + kBlock * (cell / kGrid);
        const int col0 = kCrop + kBlock * (cell % kGrid);
        std::array<double, kBlock * kBlock> block{};
        for (int r = 0; r < kBlock; ++r) {
            for (int c = 0; c < kBlock; ++c) {
                block[static_cast<std::size_t>(r * kBlock + c)] =
                    pixels[static_cast<std::size_t>((row0 + r) * kMnistSide + col0 + c)];
            }
        }
        // Pairwise summation: a block of equal values sums to exactly 16x its value.
        for (std::size_t width = block.size() / 2; width >= 1; width /= 2) {
            for (std::size_t i = 0; i < width; ++i) block[i] = block[2 * i] + block[2 * i + 1];
        }
        out[k] = block[0] / static_cast<double>(kBlock * kBlock);
    }
    return out;
}

std::span<const int> reduced_cell_indices() { return kRetainedCells; }

LabeledImages reduce_dataset(const LabeledImages& data) {
    LabeledImages out;
    out.width = kReducedPixels;
    out.height = 1;
    out.labels = data.labels;
    out.images.resize(data.images.rows(), kReducedPixels);
    std::vector<double> row(static_cast<std::size_t>(data.images.cols()));
    for (Eigen::Index r = 0; r < data.images.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.images.cols(); ++c) row[static_cast<std::size_t>(c)] = data.images(r, c);
        out.images.row(r) = reduce_image(row).transpose();
    }
    return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_stream(seed, 0x5041525449ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::vector<LabeledImages> partition(const LabeledImages& data, const PartitionSpec& spec) {
    if (spec.num_parts < 1 || spec.part_size < 1 ||
        static_cast<std::size_t>(spec.num_parts) * spec.part_size > data.size()) {
        throw ArgumentError("partition of " + std::to_string(spec.num_parts) + " x " +
                            std::to_string(spec.part_size) + " does not fit " +
                            std::to_string(data.size()) + " samples");
    }
    const auto idx = shuffled_indices(data.size(), spec.seed);
    std::vector<LabeledImages> parts;
    for (int p = 0; p < spec.num_parts; ++p) {
        const auto first = idx.begin() + static_cast<std::ptrdiff_t>(p * spec.part_size);
        const std::vector<std::size_t> slice(first, first + static_cast<std::ptrdiff_t>(spec.part_size));
        parts.push_back(data.subset(slice));
    }
    return parts;
}

}  // namespace qubodbn
