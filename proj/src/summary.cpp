#include "bregmix/summary.hpp"

#include <cmath>

#include "bregmix/error.hpp"

namespace bregmix {

double final_window_mean(std::span<const double> values)
{
    if (values.empty()) {
        throw Error("final_window_mean: empty series");
    }
    const auto n = values.size();
    const auto window = static_cast<std::size_t>(std::ceil(kFinalWindow * static_cast<double>(n)));
    double sum = 0.0;
    for (std::size_t i = n - window; i < n; ++i) {
        sum += values[i];
    }
    return sum / static_cast<double>(window);
}

std::optional<std::size_t> iterations_to_90(std::span<const std::size_t> t, std::span<const double> values)
{
    if (t.size() != values.size()) {
        throw Error("iterations_to_90: length mismatch");
    }
    const double target = final_window_mean(values);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::abs(values[i] - target) <= 0.1 * std::abs(target)) {
            return t[i];
        }
    }
    return std::nullopt;
}

double relative_rms(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.empty()) {
        throw Error("relative_rms: length mismatch");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

}  // namespace bregmix
