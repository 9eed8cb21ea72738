#pragma once

#include "rigsplat/common.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace rigsplat {

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

/// Adam state for named parameter groups.
struct OptimState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
    std::map<std::string, AdamMoments> groups;
};

/// One bias-corrected Adam update of `params` in place. A group's moments
/// are created on first use; a size change throws SizeError (use
/// remap_group after densification).
void adam_step(OptimState &state, const std::string &group, std::span<double> params, std::span<const double> grads,
               double lr);

/// Re-indexes a group's moments after the parameter rows were rebuilt:
/// output row j copies row source[j] unless is_new[j], which starts at zero.
void remap_group(OptimState &state, const std::string &group, std::span<const int> source,
                 std::span<const unsigned char> is_new, std::size_t row_width);

/// Zeroes a group's moments (after an external reset of its values).
void reset_group(OptimState &state, const std::string &group);

/// lr0 · final_fraction^(min(t, T)/T): exponential decay reaching
/// final_fraction·lr0 at iteration T and constant afterwards.
double position_lr(long iteration, double lr0, double final_fraction, long decay_end);

} // namespace rigsplat
