#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bundlechoice {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (input 2, estimation 3, batch 4).
// ---------------------------------------------------------------------------

struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : InputError {
    explicit ConfigError(const std::string& msg) : InputError(msg) {}
};

struct TieError : std::runtime_error {
    explicit TieError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EstimationError : std::runtime_error {
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BatchError : std::runtime_error {
    explicit BatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Small dense row-major matrix. Enough linear algebra for this project.
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<double> row(int i) { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int i) const { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Seeding. Child streams are derived from (master, index, purpose) with a
// splitmix64 chain so every consumer owns an independent reproducible stream.
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum class SeedPurpose : std::uint64_t {
    data = 1,
    de_stage1 = 2,
    de_stage2 = 3,
    bootstrap = 4,
    first_stage = 5,
    oracle = 6,
    replication = 7,
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, SeedPurpose purpose) {
    std::uint64_t s = splitmix64(master ^ splitmix64(index + 0x51ed2701));
    return splitmix64(s ^ splitmix64(static_cast<std::uint64_t>(purpose) + 0x9d463a1f));
}

// ---------------------------------------------------------------------------
// Rng: mt19937_64 plus hand-rolled transforms, so draws do not depend on the
// standard library's distribution implementations.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform on the open interval (0, 1)
    double uniform() {
        double u;
        do {
            u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        } while (u <= 0.0);
        return u;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // integer uniform on [0, n)
    int uniform_int(int n) {
        return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

// sgn(x) = 2*1[x > 0] - 1; in particular sgn(0) = -1.
inline double sign_pm1(double x) { return x > 0.0 ? 1.0 : -1.0; }

inline double std_normal_pdf(double v) { return std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI); }

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double logistic_quantile(double u) { return std::log(u) - std::log(1.0 - u); }

// Beta(2,2) cdf is the smoothstep 3u^2 - 2u^3; its inverse has a closed form.
inline double beta22_quantile(double u) {
    return 0.5 - std::sin(std::asin(1.0 - 2.0 * u) / 3.0);
}

// ---------------------------------------------------------------------------
// Summary statistics
// ---------------------------------------------------------------------------

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// sample standard deviation, denominator n-1
inline double sample_sd(std::span<const double> v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// linear-interpolation quantile of a sorted sample (R type 7)
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 0) throw InputError("quantile of empty sample");
    if (n == 1) return sorted[0];
    const double h = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, q);
}

// equal-tailed percentile interval from bootstrap draws
inline std::array<double, 2> percentile_ci(std::vector<double> draws, double level = 0.95) {
    if (draws.empty()) throw InputError("percentile_ci: no draws");
    std::sort(draws.begin(), draws.end());
    const double alpha = 1.0 - level;
    return {quantile_sorted(draws, alpha / 2.0), quantile_sorted(draws, 1.0 - alpha / 2.0)};
}

}  // namespace bundlechoice
