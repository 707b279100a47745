#include "srpl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace srpl {

std::string_view to_string(Magnitude m) {
    switch (m) {
        case Magnitude::negligible: return "negligible";
        case Magnitude::small: return "small";
        case Magnitude::medium: return "medium";
        case Magnitude::large: return "large";
    }
    return "negligible";
}

Magnitude effect_magnitude(double r) {
    r = std::abs(r);
    if (r < 0.1) return Magnitude::negligible;
    if (r < 0.3) return Magnitude::small;
    if (r < 0.5) return Magnitude::medium;
    return Magnitude::large;
}

std::string TestResult::to_json() const {
    nlohmann::json j = {{"n", n_pairs},
                        {"n_effective", n_effective},
                        {"W", w_plus},
                        {"W_minus", w_minus},
                        {"z", z},
                        {"p", p_two_sided},
                        {"r", effect_size_r},
                        {"r_effective", effect_size_r_effective},
                        {"magnitude", std::string(to_string(magnitude))},
                        {"significant", significant},
                        {"exact", exact},
                        {"degenerate", degenerate}};
    return j.dump();
}

namespace {

TestResult run(std::span<const double> diffs, bool allow_exact) {
    if (diffs.empty()) throw std::invalid_argument("wilcoxon test needs at least one pair");
    TestResult out;
    out.n_pairs = diffs.size();

    std::vector<double> nz;
    for (double d : diffs) {
        if (!std::isfinite(d)) throw std::invalid_argument("wilcoxon difference is not finite");
        if (d != 0.0) nz.push_back(d);
    }
    const std::size_t n = nz.size();
    out.n_effective = n;
    if (n == 0) {
        out.degenerate = true;
        return out;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });

    // Twice the average rank, so tied ranks stay integral.
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
        const long r2 = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long wp2 = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (nz[i] > 0.0) wp2 += rank2[i];
    }
    out.w_plus = 0.5 * static_cast<double>(wp2);
    out.w_minus = 0.5 * static_cast<double>(total2 - wp2);

    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double dev = out.w_plus - mean;
    double num = 0.0;
    if (std::abs(dev) > 0.5) num = dev - 0.5 * (dev > 0.0 ? 1.0 : -1.0);
    out.z = var > 0.0 ? num / std::sqrt(var) : 0.0;

    if (allow_exact && n <= kExactWilcoxonMax) {
        // Count sign assignments by their doubled positive rank sum.
        std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
        ways[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            for (long s = total2; s >= rank2[i]; --s) ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - rank2[i])];
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double le = 0.0, ge = 0.0;
        for (long s = 0; s <= total2; ++s) {
            if (s <= wp2) le += ways[static_cast<std::size_t>(s)];
            if (s >= wp2) ge += ways[static_cast<std::size_t>(s)];
        }
        out.p_two_sided = std::min(1.0, 2.0 * std::min(le, ge) / all);
        out.exact = true;
    } else {
        out.p_two_sided = std::min(1.0, std::erfc(std::abs(out.z) / std::sqrt(2.0)));
    }
    out.effect_size_r = std::abs(out.z) / std::sqrt(static_cast<double>(out.n_pairs));
    out.effect_size_r_effective = std::abs(out.z) / std::sqrt(nd);
    out.magnitude = effect_magnitude(out.effect_size_r);
    out.significant = out.p_two_sided < kSignificanceLevel;
    return out;
}

}  // namespace

TestResult wilcoxon_signed_rank(std::span<const double> diffs) { return run(diffs, true); }
TestResult wilcoxon_signed_rank_normal(std::span<const double> diffs) { return run(diffs, false); }

}  // namespace srpl
