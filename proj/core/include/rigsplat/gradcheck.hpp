#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rigsplat {

struct GradCheckOptions {
    double step = 1e-4;            ///< central-difference step
    double tolerance = 1e-5;       ///< max relative error
    double absolute_floor = 1e-7;  ///< denominators never drop below this
};

struct GradCheckResult {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    double tolerance = 0.0;
    bool passed() const { return max_rel_error <= tolerance; }
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Perturbs each entry of `x` in place (restoring it afterwards) and compares
/// the fourth-order central difference of `f` with `analytic`.
GradCheckResult finite_difference_check(const std::string &name, std::span<double> x,
                                        std::span<const double> analytic, const std::function<double()> &f,
                                        const GradCheckOptions &options = {});

/// Suites: "gaussian", "rasterizer", "adjuster", "losses", "full", or "all".
/// Throws ConsistencyError for an unknown name.
std::vector<GradCheckResult> run_gradcheck(const std::string &module, std::uint64_t seed = 0);

std::vector<std::string> gradcheck_modules();

} // namespace rigsplat
