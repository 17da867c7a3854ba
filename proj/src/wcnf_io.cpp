#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qubodbn/errors.hpp"
#include "qubodbn/maxsat.hpp"

namespace qubodbn {

namespace {

std::string exact_decimal(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void write_wcnf(std::ostream& out, const WcnfFormula& f, double scale) {
    if (!(scale > 0.0)) throw ArgumentError("WCNF weight scale must be positive");
    std::vector<long long> weights;
    weights.reserve(f.clauses.size());
    long long total = 0;
    for (const auto& c : f.clauses) {
        // Rounding may not produce a zero weight; the format requires positive ones.
        const long long w = std::max(1LL, std::llround(c.weight * scale));
        weights.push_back(w);
        total += w;
    }
    out << "c weighted MAX-SAT from an RBM QUBO\n";
    out << "c scale " << exact_decimal(scale) << '\n';
    out << "c offset " << exact_decimal(f.offset) << '\n';
    out << "p wcnf " << f.num_vars << ' ' << f.clauses.size() << ' ' << total + 1 << '\n';
    for (std::size_t k = 0; k < f.clauses.size(); ++k) {
        out << weights[k];
        for (const auto& l : f.clauses[k].literals) out << ' ' << (l.positive ? 1 : -1) * (l.var + 1);
        out << " 0\n";
    }
}

WcnfFormula read_wcnf(std::istream& in) {
    WcnfFormula f;
    double scale = 1.0;
    bool have_header = false;
    long declared = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == 'c') {
            std::string tag, key;
            ls >> tag >> key;
            if (key == "scale") ls >> scale;
            if (key == "offset") ls >> f.offset;
            continue;
        }
        if (line[0] == 'p') {
            std::string p, kind;
            long long top = 0;
            ls >> p >> kind >> f.num_vars >> declared >> top;
            if (!ls || kind != "wcnf") throw FormatError("bad WCNF header: " + line);
            have_header = true;
            continue;
        }
        if (!have_header) throw FormatError("WCNF clause before the p line");
        double w = 0.0;
        if (!(ls >> w) || w <= 0.0) throw FormatError("bad clause weight: " + line);
        WeightedClause c;
        c.weight = w / scale;
        long lit = 0;
        bool terminated = false;
        while (ls >> lit) {
            if (lit == 0) {
                terminated = true;
                break;
            }
            const long var = std::labs(lit) - 1;
            if (var >= f.num_vars) throw FormatError("literal out of range: " + line);
            c.literals.push_back({static_cast<int>(var), lit > 0});
        }
        if (!terminated) throw FormatError("clause not 0-terminated: " + line);
        f.clauses.push_back(std::move(c));
    }
    if (!have_header) throw FormatError("missing p wcnf header");
    if (static_cast<long>(f.clauses.size()) != declared) {
        throw TruncationError("header declares " + std::to_string(declared) + " clauses, found " +
                              std::to_string(f.clauses.size()));
    }
    return f;
}

}  // namespace qubodbn
