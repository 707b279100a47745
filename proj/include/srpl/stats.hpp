#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace srpl {

enum class Magnitude { negligible, small, medium, large };

std::string_view to_string(Magnitude m);
// Thresholds 0.1 / 0.3 / 0.5 on |r|.
Magnitude effect_magnitude(double r);

struct TestResult {
    std::size_t n_pairs = 0;      // all pairs, zeros included
    std::size_t n_effective = 0;  // nonzero differences
    double w_plus = 0.0;          // rank sum of positive differences (the statistic W)
    double w_minus = 0.0;
    double z = 0.0;               // signed: positive when W+ exceeds its null mean
    double p_two_sided = 1.0;
    double effect_size_r = 0.0;            // |z| / sqrt(n_pairs)
    double effect_size_r_effective = 0.0;  // |z| / sqrt(n_effective)
    Magnitude magnitude = Magnitude::negligible;
    bool significant = false;  // p < 0.05
    bool exact = false;        // p from full sign enumeration
    bool degenerate = false;   // every difference was zero

    std::string to_json() const;
};

inline constexpr std::size_t kExactWilcoxonMax = 12;
inline constexpr double kSignificanceLevel = 0.05;

/// Two-sided Wilcoxon signed-rank test on paired differences. Zeros are
/// dropped, ties get average ranks. Exact p by sign enumeration when at most
/// kExactWilcoxonMax differences remain, otherwise a tie-corrected normal
/// approximation with continuity correction. Throws on an empty input.
TestResult wilcoxon_signed_rank(std::span<const double> diffs);

// Same statistic, forcing the normal approximation (used for agreement checks).
TestResult wilcoxon_signed_rank_normal(std::span<const double> diffs);

}  // namespace srpl
