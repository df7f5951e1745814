#pragma once

#include <string>
#include <vector>

#include "flexrl/divergence.hpp"
#include "flexrl/trainers.hpp"

namespace flexrl {

/// Four-panel SVG: g*(zeta), g*'^-1(e), g(e) and the loss -e + g(e).
/// Panels carry data-* attributes with their plotted ranges; bounded
/// conjugate domains truncate the e-axis at the domain edge.
void plot_divergence_functions(const FlexF& flex, const std::string& title,
                               const std::string& path);

/// alpha_pm and beta traces over training steps from a metrics table.
void plot_adaptive_trace(const std::vector<MetricsRow>& rows, const std::string& path);

}  // namespace flexrl
