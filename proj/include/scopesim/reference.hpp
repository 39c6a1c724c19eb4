#pragma once

#include <vector>

#include "scopesim/neural.hpp"

namespace scopesim {

/// Independently written sequential double-precision forward pass over the
/// same layer family as Network. Used as the oracle for finite-difference
/// gradient checks and as the serial baseline in the benchmark tool.
std::vector<std::vector<double>> reference_forward(const NetworkSpec& spec,
                                                   const Parameters& params,
                                                   const std::vector<double>& input_row,
                                                   const std::vector<double>& append_row = {});

}  // namespace scopesim
