#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cmar/error.hpp"

// Plant-level fusion of block detectors: T^2 values become fault/normal
// likelihoods, Bayes' rule with priors (alpha, 1 - alpha) gives per-block
// fault posteriors, and the likelihood-weighted mean of the posteriors is
// the plant anomaly index. Alarms are confirmed by a run of consecutive
// exceedances; thresholds can be calibrated to a target false alarm rate.

namespace cmar {

struct Likelihoods {
    double normal = 0.0;  // P(x | N) = exp(-T^2 / T^2_lim)
    double fault = 0.0;   // P(x | F) = exp(-T^2_lim / T^2), 0 at T^2 = 0
};

inline Likelihoods likelihoods(double t2, double t2_limit) {
    if (!(t2 >= 0.0)) throw input_error("T^2 must be nonnegative");
    if (!(t2_limit > 0.0)) throw input_error("T^2 limit must be positive");
    Likelihoods l;
    l.normal = std::exp(-t2 / t2_limit);
    l.fault = t2 == 0.0 ? 0.0 : std::exp(-t2_limit / t2);  // continuous limit at 0
    return l;
}

// P(F | x) by Bayes' rule with P(F) = alpha. Equal likelihoods cancel
// exactly, so t2 == t2_limit yields exactly alpha; a vanishing evidence
// term is reported as posterior 0.
inline double posterior(const Likelihoods& l, double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw input_error("significance level must lie strictly in (0, 1)");
    if (l.fault == 0.0 && l.normal == 0.0) return 0.0;
    if (l.fault == l.normal) return alpha;
    const double num = alpha * l.fault;
    const double den = num + (1.0 - alpha) * l.normal;
    return den == 0.0 ? 0.0 : num / den;
}

struct BlockScore {
    std::string block_name;
    double t2 = 0.0;
    double likelihood_normal = 0.0;
    double likelihood_fault = 0.0;
    double posterior = 0.0;
};

// Fault-likelihood-weighted mean of the block posteriors. Zero weight
// everywhere (all blocks at T^2 = 0) gives 0.
inline double bic(const std::vector<BlockScore>& scores) {
    if (scores.empty()) throw input_error("bic needs at least one block score");
    if (scores.size() == 1) return scores.front().posterior;  // weights cancel
    double num = 0.0, den = 0.0;
    for (const BlockScore& s : scores) {
        num += s.likelihood_fault * s.posterior;
        den += s.likelihood_fault;
    }
    return den == 0.0 ? 0.0 : num / den;
}

struct AlarmConfig {
    double threshold = 0.0;
    int confirm_run = 7;  // consecutive exceedances needed to confirm
};

// Per-sample exceedance (strict inequality).
inline std::vector<bool> sample_alarms(const std::vector<double>& index, double threshold) {
    std::vector<bool> alarms(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) alarms[i] = index[i] > threshold;
    return alarms;
}

struct AlarmSeries {
    std::vector<bool> latched;                // true from the confirming sample onward
    std::optional<std::size_t> first_alarm;   // last sample of the first confirming run
};

inline AlarmSeries confirm_alarms(const std::vector<bool>& exceed, int confirm_run) {
    if (confirm_run < 1) throw input_error("confirm_run must be >= 1");
    AlarmSeries out;
    out.latched.assign(exceed.size(), false);
    int run = 0;
    for (std::size_t i = 0; i < exceed.size(); ++i) {
        run = exceed[i] ? run + 1 : 0;
        if (run >= confirm_run) {
            out.first_alarm = i;
            std::fill(out.latched.begin() + static_cast<std::ptrdiff_t>(i), out.latched.end(),
                      true);
            break;
        }
    }
    return out;
}

inline AlarmSeries confirm_alarms(const std::vector<double>& index, const AlarmConfig& cfg) {
    if (index.empty()) throw input_error("alarm confirmation needs a nonempty series");
    return confirm_alarms(sample_alarms(index, cfg.threshold), cfg.confirm_run);
}

// Empirical (1 - target_far) quantile with the nearest-rank (ceiling)
// convention, so the sample-mode FAR on the calibration series itself is
// at most target_far. target_far = 0 returns just above the series max.
inline double calibrate_threshold(const std::vector<double>& series, double target_far) {
    if (series.empty()) throw input_error("calibration needs a nonempty series");
    if (!(target_far >= 0.0) || !(target_far < 1.0))
        throw input_error("target false alarm rate must lie in [0, 1)");
    std::vector<double> sorted = series;
    std::sort(sorted.begin(), sorted.end());
    if (target_far == 0.0)
        return std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
    const auto n = sorted.size();
    // Allowed exceedances floor(far * n), guarded against the product
    // rounding just below an integer.
    auto allowed = static_cast<std::size_t>(std::floor(target_far * static_cast<double>(n) + 1e-9));
    if (allowed >= n) allowed = n - 1;
    return sorted[n - 1 - allowed];
}

}  // namespace cmar
