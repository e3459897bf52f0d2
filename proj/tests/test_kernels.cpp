#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bundlechoice/kernels.hpp"

using namespace bundlechoice;

namespace {

// Adaptive Simpson quadrature; independent of the kernel implementation path.
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

double kernel_moment(int order, int power) {
    return integrate(
        [order, power](double v) { return std::pow(v, power) * gaussian_kernel(order, v); },
        -12.0, 12.0);
}

}  // namespace

TEST_CASE("gaussian_kernel moment conditions by quadrature") {
    for (int order : {2, 4, 6}) {
        CAPTURE(order);
        CHECK(std::abs(kernel_moment(order, 0) - 1.0) < 1e-8);
        for (int power = 1; power < order; ++power) {
            CAPTURE(power);
            CHECK(std::abs(kernel_moment(order, power)) < 1e-8);
        }
        CHECK(std::abs(kernel_moment(order, order)) > 0.1);
    }
}

TEST_CASE("gaussian_kernel values at zero and polynomial roots") {
    const double phi0 = 1.0 / std::sqrt(2.0 * M_PI);
    CHECK(gaussian_kernel(2, 0.0) == doctest::Approx(phi0).epsilon(1e-12));
    CHECK(gaussian_kernel(4, 0.0) == doctest::Approx(1.5 * phi0).epsilon(1e-12));
    CHECK(gaussian_kernel(6, 0.0) == doctest::Approx(1.875 * phi0).epsilon(1e-12));
    CHECK(gaussian_kernel(2, 0.0) == doctest::Approx(0.3989423).epsilon(1e-6));
    CHECK(gaussian_kernel(4, 0.0) == doctest::Approx(0.5984134).epsilon(1e-6));
    CHECK(gaussian_kernel(6, 0.0) == doctest::Approx(0.7480168).epsilon(1e-6));
    CHECK(std::abs(gaussian_kernel(4, std::sqrt(3.0))) < 1e-16);
    CHECK_THROWS_AS(gaussian_kernel(3, 0.0), ConfigError);
    CHECK_THROWS_AS(gaussian_kernel(0, 0.0), ConfigError);
}

TEST_CASE("gaussian_kernel is symmetric") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    for (int order : {2, 4, 6})
        for (int rep = 0; rep < 50; ++rep) {
            const double v = u(gen);
            CHECK(gaussian_kernel(order, v) == gaussian_kernel(order, -v));
        }
}

TEST_CASE("aitchison_aitken") {
    CHECK(aitchison_aitken(0.0, 0, 0, 2) == doctest::Approx(1.0));
    CHECK(aitchison_aitken(0.01, 0, 1, 2) == doctest::Approx(0.01));
    CHECK(aitchison_aitken(0.01, 0, 0, 2) == doctest::Approx(0.99));
    CHECK_THROWS_AS(aitchison_aitken(0.8, 0, 0, 2), ConfigError);  // > (c-1)/c
    CHECK_THROWS_AS(aitchison_aitken(-0.1, 0, 0, 2), ConfigError);
    CHECK_THROWS_AS(aitchison_aitken(0.1, 0, 0, 1), ConfigError);

    // weights over all categories sum to one
    for (int c : {2, 3, 5}) {
        const double lmax = (c - 1.0) / c;
        for (double lambda : {0.0, 0.3 * lmax, lmax}) {
            double total = 0.0;
            for (int x = 0; x < c; ++x) total += aitchison_aitken(lambda, x, 1 % c, c);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("product_kernel") {
    const double inv2pi = 1.0 / (2.0 * M_PI);
    const std::vector<double> zeros = {0.0, 0.0};
    KernelSpec spec2{2, KernelFamily::gaussian_poly};
    CHECK(product_kernel(1.0, zeros, spec2) == doctest::Approx(inv2pi).epsilon(1e-12));
    CHECK(product_kernel(0.5, zeros, spec2) == doctest::Approx(4.0 * inv2pi).epsilon(1e-12));
    CHECK(product_kernel(1.0, std::vector<double>{}, spec2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(product_kernel(0.0, zeros, spec2), InputError);

    // permutation invariance
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> diffs(5);
    for (double& d : diffs) d = u(gen);
    const double base = product_kernel(0.7, diffs, spec2);
    std::vector<double> shuffled = {diffs[3], diffs[0], diffs[4], diffs[2], diffs[1]};
    CHECK(product_kernel(0.7, shuffled, spec2) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("bandwidth rules") {
    // independent arithmetic for each rule
    auto rule1 = [](double c, double n) { return c * std::pow(n, -0.125) * std::pow(std::log(n), 1.0 / 6.0); };
    auto rule2 = [](double c, double n) { return c * std::pow(n, -0.25) * std::pow(std::log(n), 0.25); };
    auto rule3 = [](double c, double n) { return c * std::pow(n, -1.0 / 7.0) * std::pow(std::log(n), -1.0 / 14.0); };

    CHECK(bandwidth(250, 1.0, {1.0, BandwidthRule::cross_stage1}) ==
          doctest::Approx(rule1(1.0, 250.0)).epsilon(1e-12));
    CHECK(bandwidth(250, 1.0, {2.0, BandwidthRule::cross_stage2}) ==
          doctest::Approx(rule2(2.0, 250.0)).epsilon(1e-12));
    CHECK(bandwidth(1000, 1.0, {2.0, BandwidthRule::panel}) ==
          doctest::Approx(rule3(2.0, 1000.0)).epsilon(1e-12));

    CHECK(bandwidth(250, 1.0, {1.0, BandwidthRule::cross_stage1}) == doctest::Approx(0.6668).epsilon(1e-3));
    CHECK(bandwidth(250, 1.0, {2.0, BandwidthRule::cross_stage2}) == doctest::Approx(0.7712).epsilon(1e-3));
    CHECK(bandwidth(1000, 1.0, {2.0, BandwidthRule::panel}) == doctest::Approx(0.6494).epsilon(1e-3));

    CHECK(bandwidth(2, 0.5, {1.0, BandwidthRule::cross_stage1}) > 0.0);
    CHECK_THROWS_AS(bandwidth(1, 1.0, {1.0, BandwidthRule::cross_stage1}), InputError);
}

TEST_CASE("silverman_bandwidth") {
    const std::vector<double> two = {-1.0, 1.0};
    CHECK(silverman_bandwidth(two) ==
          doctest::Approx(1.06 * std::sqrt(2.0) * std::pow(2.0, -0.2)).epsilon(1e-12));
    const std::vector<double> three = {0.0, 0.0, 1.0};
    CHECK(silverman_bandwidth(three) ==
          doctest::Approx(1.06 * std::sqrt(1.0 / 3.0) * std::pow(3.0, -0.2)).epsilon(1e-12));
    const std::vector<double> flat = {0.7, 0.7};
    CHECK_THROWS_AS(silverman_bandwidth(flat), InputError);
    const std::vector<double> one = {0.7};
    CHECK_THROWS_AS(silverman_bandwidth(one), InputError);
}
