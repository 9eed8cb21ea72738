#include "rigsplat/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace rigsplat {

using nlohmann::json;

void TrainConfig::validate() const {
    if (densify_stride <= 0 || opacity_reset_stride <= 0) {
        throw ConsistencyError("config: strides must be positive");
    }
    if (densify_start_iter > densify_end_iter) {
        throw ConsistencyError("config: densify window is reversed");
    }
    if (total_iters < 0 || threads < 1) {
        throw ConsistencyError("config: total_iters must be >= 0 and threads >= 1");
    }
    if (loss.lambda_dssim < 0 || loss.lambda_perceptual < 0 || loss.lambda_position < 0 || loss.lambda_scaling < 0) {
        throw ConsistencyError("config: loss weights must be non-negative");
    }
}

namespace {

// One table drives both directions so the two can never drift apart.
template <typename Visitor>
void visit_fields(TrainConfig &c, Visitor &&v) {
    v("seed", c.seed);
    v("threads", c.threads);
    v("total_iters", c.total_iters);
    v("sh_degree", c.sh_degree);

    v("lambda1_dssim", c.loss.lambda_dssim);
    v("lambda2_perceptual", c.loss.lambda_perceptual);
    v("lambda3_position", c.loss.lambda_position);
    v("lambda4_scaling", c.loss.lambda_scaling);
    v("eps_position", c.loss.eps_position);
    v("eps_scaling", c.loss.eps_scaling);

    v("lr_position", c.lr_position);
    v("lr_position_final_fraction", c.lr_position_final_fraction);
    v("lr_position_decay_end", c.lr_position_decay_end);
    v("lr_scaling", c.lr_scaling);
    v("lr_rotation", c.lr_rotation);
    v("lr_opacity", c.lr_opacity);
    v("lr_sh", c.lr_sh);
    v("lr_sh_rest_divisor", c.lr_sh_rest_divisor);
    v("lr_mlp", c.lr_mlp);
    v("lr_triplane", c.lr_triplane);
    v("adam_beta1", c.adam_beta1);
    v("adam_beta2", c.adam_beta2);
    v("adam_eps", c.adam_eps);

    v("adjuster_start_iter", c.adjuster_start_iter);
    v("densify_start_iter", c.densify_start_iter);
    v("densify_end_iter", c.densify_end_iter);
    v("densify_stride", c.densify_stride);
    v("opacity_reset_stride", c.opacity_reset_stride);

    v("densify_grad_threshold", c.densify.grad_threshold);
    v("densify_percent_dense", c.densify.percent_dense);
    v("densify_split_factor", c.densify.split_factor);
    v("densify_split_children", c.densify.split_children);
    v("prune_opacity", c.densify.prune_opacity);
    v("opacity_reset_ceiling", c.densify.opacity_reset_ceiling);
    v("scene_extent", c.scene_extent);

    v("latent_dim", c.adjuster.latent_dim);
    v("triplane_resolutions", c.adjuster.resolutions);
    v("triplane_channels", c.adjuster.channels);
    v("basis_hidden", c.adjuster.basis_hidden);
    v("basis_layers", c.adjuster.basis_layers);
    v("latent_hidden", c.adjuster.latent_hidden);
    v("latent_layers", c.adjuster.latent_layers);
    v("fourier_bands", c.adjuster.fourier_bands);
    v("min_scale", c.adjuster.min_scale);
    v("triplane_init", c.adjuster.triplane_init);

    v("tile_size", c.render.tile_size);
    v("gaussian_cutoff", c.render.gaussian_cutoff);
    v("cutoff_radius", c.render.cutoff_radius);
    v("min_transmittance", c.render.min_transmittance);

    v("init_local_scale", c.init_local_scale);
    v("init_opacity", c.init_opacity);
    v("init_zero_psi", c.init_zero_psi);

    v("no_adjuster", c.ablation.no_adjuster);
    v("no_triplane", c.ablation.no_triplane);
    v("no_lbs", c.ablation.no_lbs);
    v("no_init", c.ablation.no_init);
}

} // namespace

std::string config_to_json(const TrainConfig &config) {
    TrainConfig copy = config;
    json j = json::object();
    visit_fields(copy, [&](const char *key, const auto &value) { j[key] = value; });
    j["encoding"] = config.adjuster.encoding == EncodingMode::triplane ? "triplane" : "fourier";
    return j.dump(2);
}

TrainConfig config_from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw LoadError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw LoadError("config: top level must be an object");
    }
    TrainConfig config;
    std::set<std::string> known{"encoding"};
    visit_fields(config, [&](const char *key, auto &value) {
        known.insert(key);
        if (j.contains(key)) {
            try {
                j.at(key).get_to(value);
            } catch (const json::exception &e) {
                throw LoadError(std::string("config: bad value for '") + key + "': " + e.what());
            }
        }
    });
    for (const auto &item : j.items()) {
        if (!known.count(item.key())) {
            throw LoadError("config: unknown key '" + item.key() + "'");
        }
    }
    if (j.contains("encoding")) {
        const std::string enc = j.at("encoding").get<std::string>();
        if (enc == "triplane") {
            config.adjuster.encoding = EncodingMode::triplane;
        } else if (enc == "fourier") {
            config.adjuster.encoding = EncodingMode::fourier;
        } else {
            throw LoadError("config: encoding must be 'triplane' or 'fourier'");
        }
    }
    config.validate();
    return config;
}

TrainConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open config " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

} // namespace rigsplat
