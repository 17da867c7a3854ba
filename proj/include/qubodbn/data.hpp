#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qubodbn {

/// Decoded IDX container. `payload` holds the raw big-endian element bytes.
struct IdxArray {
    std::uint8_t element_type = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    [[nodiscard]] std::size_t element_count() const;
};

std::size_t idx_element_size(std::uint8_t element_type);

/// Parses a complete IDX byte stream. The payload must match the header exactly.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);

/// Reads a raw or gzip-compressed IDX file.
IdxArray read_idx_file(const std::filesystem::path& path);

struct LabeledImages {
    Eigen::MatrixXd images;  // one image per row, pixels in [0,1]
    std::vector<int> labels;
    int width = 0;
    int height = 0;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
    LabeledImages subset(std::span<const std::size_t> indices) const;
};

/// Combines an unsigned-byte rank-3 image array and rank-1 label array; pixels are divided by 255.
LabeledImages labeled_images_from_idx(const IdxArray& images, const IdxArray& labels);

LabeledImages load_labeled_images(const std::filesystem::path& images,
                                  const std::filesystem::path& labels);

inline constexpr int kMnistSide = 28;
inline constexpr int kReducedPixels = 32;

/// 28x28 -> 32: crop a 2-pixel frame, average 4x4 blocks into a 6x6 grid, drop the four corners.
Eigen::VectorXd reduce_image(std::span<const double> pixels);

/// Row-major 6x6 cell index of each reduced output value.
std::span<const int> reduced_cell_indices();

LabeledImages reduce_dataset(const LabeledImages& data);

struct PartitionSpec {
    int num_parts = 10;
    std::size_t part_size = 0;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then `num_parts` disjoint consecutive slices of `part_size`.
std::vector<LabeledImages> partition(const LabeledImages& data, const PartitionSpec& spec);

/// The shuffled index order used by partition().
std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed);

}  // namespace qubodbn
