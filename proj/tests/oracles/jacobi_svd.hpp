#pragma once

// One-sided Jacobi SVD on plain std::vector storage, independent of Eigen.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

// Singular values of the rows x cols matrix `a` (row-major), ascending.
inline std::vector<double> jacobi_singular_values(std::vector<double> a, std::size_t rows, std::size_t cols) {
    auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * cols + c]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double alpha = 0, beta = 0, gamma = 0;
                for (std::size_t r = 0; r < rows; ++r) {
                    alpha += at(r, p) * at(r, p);
                    beta += at(r, q) * at(r, q);
                    gamma += at(r, p) * at(r, q);
                }
                if (gamma == 0.0) continue;
                off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
                const double zeta = (beta - alpha) / (2 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
                const double c = 1 / std::sqrt(1 + t * t), s = c * t;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double x = at(r, p), y = at(r, q);
                    at(r, p) = c * x - s * y;
                    at(r, q) = s * x + c * y;
                }
            }
        }
        if (off < 1e-15) break;
    }
    std::vector<double> sv(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double s = 0;
        for (std::size_t r = 0; r < rows; ++r) s += at(r, c) * at(r, c);
        sv[c] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end());
    return sv;
}

}  // namespace oracle
