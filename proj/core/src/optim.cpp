#include "rigsplat/optim.hpp"

#include <cmath>

namespace rigsplat {

void adam_step(OptimState &state, const std::string &group, std::span<double> params, std::span<const double> grads,
               double lr) {
    require_size(grads.size(), params.size(), ("adam gradients for '" + group + "'").c_str());
    AdamMoments &mom = state.groups[group];
    if (mom.m.empty() && mom.step == 0) {
        mom.m.assign(params.size(), 0.0);
        mom.v.assign(params.size(), 0.0);
    }
    require_size(mom.m.size(), params.size(), ("adam moments for '" + group + "'").c_str());

    ++mom.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(mom.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(mom.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g;
        mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g * g;
        const double m_hat = mom.m[i] / c1;
        const double v_hat = mom.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

void remap_group(OptimState &state, const std::string &group, std::span<const int> source,
                 std::span<const unsigned char> is_new, std::size_t row_width) {
    require_size(is_new.size(), source.size(), "remap flags");
    auto it = state.groups.find(group);
    if (it == state.groups.end()) {
        return;
    }
    AdamMoments &mom = it->second;
    std::vector<double> m(source.size() * row_width, 0.0), v(source.size() * row_width, 0.0);
    for (std::size_t j = 0; j < source.size(); ++j) {
        if (is_new[j] != 0) {
            continue;
        }
        const std::size_t src = static_cast<std::size_t>(source[j]) * row_width;
        if (src + row_width > mom.m.size()) {
            throw ConsistencyError("remap source row out of range for group '" + group + "'");
        }
        std::copy_n(&mom.m[src], row_width, &m[j * row_width]);
        std::copy_n(&mom.v[src], row_width, &v[j * row_width]);
    }
    mom.m = std::move(m);
    mom.v = std::move(v);
}

void reset_group(OptimState &state, const std::string &group) {
    auto it = state.groups.find(group);
    if (it != state.groups.end()) {
        std::fill(it->second.m.begin(), it->second.m.end(), 0.0);
        std::fill(it->second.v.begin(), it->second.v.end(), 0.0);
    }
}

double position_lr(long iteration, double lr0, double final_fraction, long decay_end) {
    if (decay_end <= 0) {
        return lr0;
    }
    const double t = static_cast<double>(std::clamp(iteration, 0L, decay_end)) / static_cast<double>(decay_end);
    if (t == 0.0) {
        return lr0;
    }
    return lr0 * std::pow(final_fraction, t);
}

} // namespace rigsplat
