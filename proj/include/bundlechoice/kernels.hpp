#pragma once

#include <span>

#include "bundlechoice/common.hpp"

namespace bundlechoice {

// Higher-order Gaussian kernels (Hermite polynomial construction), the
// Aitchison-Aitken kernel for unordered discrete regressors, and the
// bandwidth rules used by the estimators.

enum class KernelFamily { gaussian_poly, aitchison_aitken };

struct KernelSpec {
    int order = 2;  // 2, 4 or 6
    KernelFamily family = KernelFamily::gaussian_poly;
};

// K2 = phi, K4 = (3 - v^2)/2 * phi, K6 = (15 - 10 v^2 + v^4)/8 * phi
double gaussian_kernel(int order, double v);

// 1 - lambda on a match, lambda/(c-1) otherwise; 0 <= lambda <= (c-1)/c
double aitchison_aitken(double lambda, int x, int x_ref, int num_categories);

// h^{-d} * prod_l K(diffs[l] / h)
double product_kernel(double h, std::span<const double> diffs, const KernelSpec& spec);

enum class BandwidthRule {
    cross_stage1,  // c * sigma * N^{-1/8} * ln(N)^{1/6}
    cross_stage2,  // c * sigma * N^{-1/4} * ln(N)^{1/4}
    panel,         // c * sigma * N^{-1/7} * ln(N)^{-1/14}
};

struct BandwidthSpec {
    double constant = 1.0;
    BandwidthRule rule = BandwidthRule::cross_stage1;
};

double bandwidth(int n, double sigma_hat, const BandwidthSpec& spec);

// 1.06 * sample sd * N^{-1/5}; rejects zero-variance samples
double silverman_bandwidth(std::span<const double> samples);

}  // namespace bundlechoice
