#pragma once

// Test-only oracles, written from the definitions and kept independent of
// the library implementations they check.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double kernel(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    const double base = dot / static_cast<double>(a.size()) + 1.0;
    return base * base * base;
}

// Unbiased MMD^2, straight from the definition (triple loop).
inline double kid(const Matrix& x, const Matrix& y) {
    const double m = static_cast<double>(x.size());
    const double n = static_cast<double>(y.size());
    double xx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (i != j) xx += kernel(x[i], x[j]);
        }
    }
    double yy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (i != j) yy += kernel(y[i], y[j]);
        }
    }
    double xy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) xy += kernel(x[i], y[j]);
    }
    return xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n);
}

// Fractional ranks: rank = 1 + #smaller + (#equal - 1)/2.
inline std::vector<double> ranks(const std::vector<double>& values, bool ascending = true) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::size_t smaller = 0;
        std::size_t equal = 0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            const bool before = ascending ? values[j] < values[i] : values[j] > values[i];
            smaller += before ? 1 : 0;
            equal += values[j] == values[i] ? 1 : 0;
        }
        out[i] = 1.0 + static_cast<double>(smaller) +
                 (static_cast<double>(equal) - 1.0) / 2.0;
    }
    return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / n;
    const double mb = sb / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// Spearman from the definition: Pearson of the fractional ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

}  // namespace oracle
