#pragma once

// Deliberately naive reference implementations used to cross-check the library.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "radfuse/image.hpp"

namespace oracle {

/// The 14 measures in library order, computed in long double with two-pass moments.
std::array<double, 14> brute_stats(std::span<const double> p);

/// Co-occurrence counts for the neighbour at angle `degrees` (offset 1, image rows grow downward).
std::vector<std::uint64_t> naive_glcm(const radfuse::GrayImage& img, int degrees);

/// Absolute-difference density at distance 10 along `degrees`.
std::array<double, 256> naive_gldm(const radfuse::GrayImage& img, int degrees);

/// Plain global equalization: v -> round(255 * cdf(v) / N).
radfuse::GrayImage global_equalize(const radfuse::GrayImage& img);

/// O(N^4) direct DFT magnitude with the zero frequency moved to (h/2, w/2).
std::vector<double> naive_dft_magnitude(const radfuse::GrayImage& img);

struct SvmSolution {
  Eigen::VectorXd w;
  double b = 0.0;
  double objective = 0.0;
};

/// Solves min 1/2 (|w|^2 + b^2) + C sum max(0, 1 - y_i (w.x_i + b)) as a smooth QP in (w, b, xi)
/// with a log-barrier Newton method.
SvmSolution barrier_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, double C);

/// PCA scores (centered X times principal axes) via SVD of the centered data matrix.
Eigen::MatrixXd svd_pca_scores(const Eigen::MatrixXd& X, int k);

}  // namespace oracle
