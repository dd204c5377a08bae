#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace bregmix {

/// Fraction of the rows forming the steady-state window.
inline constexpr double kFinalWindow = 0.1;

/// Mean over the last ceil(10%) of the rows.
double final_window_mean(std::span<const double> values);

/// Time index of the first row within 10% (relative) of the final-window mean, if any.
std::optional<std::size_t> iterations_to_90(std::span<const std::size_t> t, std::span<const double> values);

/// ||a - b|| / ||b||.
double relative_rms(std::span<const double> a, std::span<const double> b);

}  // namespace bregmix
