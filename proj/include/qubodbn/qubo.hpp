#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qubodbn/rbm.hpp"

namespace qubodbn {

/// Variables 0..m-1 are visible units, m..m+n-1 hidden units.
struct VariableLayout {
    int num_visible = 0;
    int num_hidden = 0;
};

struct QuadraticTerm {
    int i = 0;  // i < j
    int j = 0;
    double coefficient = 0.0;
};

/// Quadratic form over x = (v, h). `linear` is the diagonal of Q, `quadratic`
/// its off-diagonal entries; the energy is -(x^T Q x).
struct QuboProblem {
    int num_vars = 0;
    std::vector<double> linear;
    std::vector<QuadraticTerm> quadratic;
    VariableLayout layout;

    /// Throws ShapeError on out-of-range, unordered or duplicate quadratic entries.
    void validate() const;
};

using Assignment = std::vector<std::uint8_t>;

QuboProblem rbm_to_qubo(const RbmParams& params);

/// The RBM energy of x, -(sum_k linear_k x_k + sum c_ij x_i x_j). Lower is more probable.
double qubo_energy(const QuboProblem& q, std::span<const std::uint8_t> x);

BinaryState split_assignment(const QuboProblem& q, std::span<const std::uint8_t> x);

/// Concatenates (v, h) back into one assignment; entries are thresholded at 0.5.
Assignment join_assignment(const BinaryState& state);

}  // namespace qubodbn
