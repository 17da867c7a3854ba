#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "qubodbn/dbn.hpp"

namespace qubodbn {

/// Binary model container:
///
///   "QDBNCKPT" magic, u32 version
///   u32 length + bytes: the key=value config text that produced the model
///   u32 layer count, then per layer u32 m, u32 n, weights (n x m, row-major),
///     visible bias (m), hidden bias (n)
///   u32 classes, u32 top size, output weights (row-major), output bias
///   u8 batch-norm flag; if set f64 epsilon, f64 running momentum and per layer
///     gamma, beta, running mean, running variance
///
/// Integers are little-endian u32, reals little-endian IEEE-754 binary64.
struct Checkpoint {
    DbnModel model;
    std::optional<BatchNormState> bn;
    std::string config;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qubodbn
