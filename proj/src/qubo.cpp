#include "qubodbn/qubo.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "qubodbn/errors.hpp"

namespace qubodbn {

namespace {

void require_assignment(const QuboProblem& q, std::span<const std::uint8_t> x) {
    if (static_cast<int>(x.size()) != q.num_vars) {
        throw ShapeError("assignment has " + std::to_string(x.size()) + " bits, problem has " +
                         std::to_string(q.num_vars) + " variables");
    }
}

}  // namespace

void QuboProblem::validate() const {
    if (num_vars != layout.num_visible + layout.num_hidden) {
        throw ShapeError("layout does not cover num_vars");
    }
    if (static_cast<int>(linear.size()) != num_vars) throw ShapeError("linear vector length");
    std::vector<std::pair<int, int>> seen;
    seen.reserve(quadratic.size());
    for (const auto& t : quadratic) {
        if (t.i < 0 || t.j >= num_vars || t.i >= t.j) {
            throw ShapeError("quadratic term (" + std::to_string(t.i) + "," + std::to_string(t.j) +
                             ") out of range or unordered");
        }
        seen.emplace_back(t.i, t.j);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        throw ShapeError("duplicate quadratic term");
    }
}

QuboProblem rbm_to_qubo(const RbmParams& params) {
    params.check_shape();
    const int m = static_cast<int>(params.num_visible());
    const int n = static_cast<int>(params.num_hidden());
    QuboProblem q;
    q.num_vars = m + n;
    q.layout = {m, n};
    q.linear.resize(static_cast<std::size_t>(m + n));
    for (int j = 0; j < m; ++j) q.linear[static_cast<std::size_t>(j)] = params.visible_bias[j];
    for (int i = 0; i < n; ++i) q.linear[static_cast<std::size_t>(m + i)] = params.hidden_bias[i];
    // Row j (visible) by column m+i (hidden): the upper-right W block of Q.
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            const double w = params.weights(i, j);
            if (w != 0.0) q.quadratic.push_back({j, m + i, w});
        }
    }
    return q;
}

double qubo_energy(const QuboProblem& q, std::span<const std::uint8_t> x) {
    require_assignment(q, x);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k]) s += q.linear[k];
    }
    for (const auto& t : q.quadratic) {
        if (x[static_cast<std::size_t>(t.i)] && x[static_cast<std::size_t>(t.j)]) s += t.coefficient;
    }
    return -s;
}

BinaryState split_assignment(const QuboProblem& q, std::span<const std::uint8_t> x) {
    require_assignment(q, x);
    const int m = q.layout.num_visible;
    BinaryState s{Eigen::VectorXd(m), Eigen::VectorXd(q.layout.num_hidden)};
    for (int j = 0; j < m; ++j) s.v[j] = x[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    for (int i = 0; i < q.layout.num_hidden; ++i) {
        s.h[i] = x[static_cast<std::size_t>(m + i)] ? 1.0 : 0.0;
    }
    return s;
}

Assignment join_assignment(const BinaryState& state) {
    Assignment x;
    x.reserve(static_cast<std::size_t>(state.v.size() + state.h.size()));
    for (double b : state.v) x.push_back(b > 0.5 ? 1 : 0);
    for (double b : state.h) x.push_back(b > 0.5 ? 1 : 0);
    return x;
}

}  // namespace qubodbn
