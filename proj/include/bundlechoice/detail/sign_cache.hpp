#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bundlechoice/common.hpp"

namespace bundlechoice::detail {

// Flattened pairwise criterion cache. Each entry contributes
//   coeff * sgn(diff . b)          (sign form), or
//   coeff * 1[diff . b > 0]        (indicator form)
// where b = (1, free...). Entries whose free components are all zero have a
// fixed sign and are folded into constants at finalize time; the criteria are
// evaluated thousands of times inside DE, so the cache is built once per
// (data, bandwidth) pair.
struct SignCache {
    int k = 0;  // diff length, including the pinned first coordinate
    std::vector<double> coeff;
    std::vector<double> diffs;  // k per entry, row-major
    double constant_sign = 0.0;
    double constant_ind = 0.0;
    long contributing_units = 0;  // diagnostic: pairs/agents with any entry

    bool empty() const { return coeff.empty() && constant_sign == 0.0 && constant_ind == 0.0; }
    bool flat() const { return coeff.empty(); }

    double eval_sign(std::span<const double> free) const {
        double total = constant_sign;
        const std::size_t n = coeff.size();
        if (k == 2) {
            const double b1 = free[0];
            for (std::size_t e = 0; e < n; ++e) {
                const double s = diffs[2 * e] + b1 * diffs[2 * e + 1];
                total += s > 0.0 ? coeff[e] : -coeff[e];
            }
            return total;
        }
        for (std::size_t e = 0; e < n; ++e) {
            double s = diffs[e * k];
            for (int j = 1; j < k; ++j) s += diffs[e * k + j] * free[j - 1];
            total += s > 0.0 ? coeff[e] : -coeff[e];
        }
        return total;
    }

    double eval_indicator(std::span<const double> free) const {
        double total = constant_ind;
        const std::size_t n = coeff.size();
        for (std::size_t e = 0; e < n; ++e) {
            double s = diffs[e * k];
            for (int j = 1; j < k; ++j) s += diffs[e * k + j] * free[j - 1];
            if (s > 0.0) total += coeff[e];
        }
        return total;
    }
};

class SignCacheBuilder {
public:
    explicit SignCacheBuilder(int k) : k_(k) {}

    void add(double coeff, std::span<const double> diff) {
        if (coeff == 0.0) return;
        coeff_.push_back(coeff);
        diffs_.insert(diffs_.end(), diff.begin(), diff.end());
    }

    SignCache finalize(double prune_ratio) const {
        SignCache c;
        c.k = k_;
        double max_abs = 0.0;
        for (double v : coeff_) max_abs = std::max(max_abs, std::abs(v));
        const double threshold = prune_ratio * max_abs;
        const std::size_t n = coeff_.size();
        for (std::size_t e = 0; e < n; ++e) {
            if (std::abs(coeff_[e]) < threshold) continue;
            const double* d = diffs_.data() + e * k_;
            bool fixed = true;
            for (int j = 1; j < k_; ++j) fixed = fixed && d[j] == 0.0;
            if (fixed) {
                c.constant_sign += coeff_[e] * sign_pm1(d[0]);
                if (d[0] > 0.0) c.constant_ind += coeff_[e];
            } else {
                c.coeff.push_back(coeff_[e]);
                c.diffs.insert(c.diffs.end(), d, d + k_);
            }
        }
        return c;
    }

private:
    int k_;
    std::vector<double> coeff_;
    std::vector<double> diffs_;
};

}  // namespace bundlechoice::detail
