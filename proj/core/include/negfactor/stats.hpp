#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace negfactor {

inline double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

// Mixes a master seed with a stream id (splitmix64 finalizer). Used to give
// restarts, folds and bootstrap replicates independent generators.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Ranks starting at 1, ties get the average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation (Pearson on average ranks). NaN when undefined:
// fewer than two pairs or a constant input.
double spearman(std::span<const double> a, std::span<const double> b);

// Linear-interpolation quantile of already sorted data, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

} // namespace negfactor
