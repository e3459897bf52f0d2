#include "bundlechoice/kernels.hpp"

#include <cmath>
#include <string>

namespace bundlechoice {

double gaussian_kernel(int order, double v) {
    const double phi = std_normal_pdf(v);
    const double v2 = v * v;
    switch (order) {
        case 2:
            return phi;
        case 4:
            return 0.5 * (3.0 - v2) * phi;
        case 6:
            return 0.125 * (15.0 - 10.0 * v2 + v2 * v2) * phi;
        default:
            throw ConfigError("gaussian_kernel: unsupported order " + std::to_string(order));
    }
}

double aitchison_aitken(double lambda, int x, int x_ref, int num_categories) {
    if (num_categories < 2)
        throw ConfigError("aitchison_aitken: need at least 2 categories");
    const double lambda_max =
        static_cast<double>(num_categories - 1) / static_cast<double>(num_categories);
    if (lambda < 0.0 || lambda > lambda_max)
        throw ConfigError("aitchison_aitken: lambda outside [0, (c-1)/c]");
    if (x == x_ref) return 1.0 - lambda;
    return lambda / static_cast<double>(num_categories - 1);
}

double product_kernel(double h, std::span<const double> diffs, const KernelSpec& spec) {
    if (!(h > 0.0)) throw InputError("product_kernel: bandwidth must be positive");
    double prod = 1.0;
    for (double d : diffs) prod *= gaussian_kernel(spec.order, d / h);
    return prod * std::pow(h, -static_cast<double>(diffs.size()));
}

double bandwidth(int n, double sigma_hat, const BandwidthSpec& spec) {
    if (n < 2) throw InputError("bandwidth: need N >= 2");
    const double nn = static_cast<double>(n);
    const double ln = std::log(nn);
    double rate = 0.0;
    switch (spec.rule) {
        case BandwidthRule::cross_stage1:
            rate = std::pow(nn, -1.0 / 8.0) * std::pow(ln, 1.0 / 6.0);
            break;
        case BandwidthRule::cross_stage2:
            rate = std::pow(nn, -1.0 / 4.0) * std::pow(ln, 1.0 / 4.0);
            break;
        case BandwidthRule::panel:
            rate = std::pow(nn, -1.0 / 7.0) * std::pow(ln, -1.0 / 14.0);
            break;
    }
    return spec.constant * sigma_hat * rate;
}

double silverman_bandwidth(std::span<const double> samples) {
    if (samples.size() < 2) throw InputError("silverman_bandwidth: need at least 2 samples");
    const double sd = sample_sd(samples);
    if (!(sd > 0.0)) throw InputError("silverman_bandwidth: zero-variance sample");
    return 1.06 * sd * std::pow(static_cast<double>(samples.size()), -0.2);
}

}  // namespace bundlechoice
