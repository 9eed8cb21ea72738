// Command-line front end: train, render, reenact, eval, gradcheck, synth.

#include "rigsplat/checkpoint.hpp"
#include "rigsplat/dataset.hpp"
#include "rigsplat/gradcheck.hpp"
#include "rigsplat/metrics.hpp"
#include "rigsplat/synthetic.hpp"
#include "rigsplat/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace rigsplat;

namespace {

TrainConfig config_or_default(const std::string &path) { return path.empty() ? TrainConfig{} : load_config(path); }

// Renders every record and writes a dataset directory plus raw float dumps.
void render_records(Checkpoint &ck, const std::vector<FrameRecord> &records, const std::string &out_dir) {
    Dataset out;
    out.rig = ck.model.rig;
    out.background = ck.model.background;
    fs::create_directories(fs::path(out_dir) / "raw");
    for (std::size_t i = 0; i < records.size(); ++i) {
        DatasetFrame f;
        f.record = records[i];
        f.image = ck.model.render(records[i].params, records[i].camera);
        f.mask.assign(f.image.pixel_count(), 1);
        write_raw((fs::path(out_dir) / "raw" / (frame_stem(i) + ".pd")).string(), f.image);
        out.frames.push_back(std::move(f));
    }
    save_dataset(out_dir, out);
    std::printf("rendered %zu frames to %s\n", records.size(), out_dir.c_str());
}

int cmd_train(const std::string &config_path, const std::string &data_dir, const std::string &out_dir, long iters,
              int threads, long log_every) {
    TrainConfig config = config_or_default(config_path);
    if (iters >= 0) {
        config.total_iters = iters;
    }
    if (threads > 0) {
        config.threads = threads;
    }
    config.validate();
    const Dataset data = load_dataset(data_dir);
    fs::create_directories(out_dir);
    {
        std::FILE *f = std::fopen((fs::path(out_dir) / "config.json").string().c_str(), "w");
        if (f != nullptr) {
            std::fputs((config_to_json(config) + "\n").c_str(), f);
            std::fclose(f);
        }
    }
    Trainer trainer(config, data);
    trainer.set_nan_dump_path((fs::path(out_dir) / "nan_dump.ckpt").string());
    const auto start = std::chrono::steady_clock::now();
    trainer.run(config.total_iters, [&](const LossRecord &r) {
        if (log_every > 0 && (r.iteration % log_every == 0 || r.iteration == config.total_iters)) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::printf("iter %ld  loss %.6f  l1 %.6f  gaussians %zu  %.1fs\n", r.iteration, r.terms.total, r.terms.l1,
                        r.gaussians, secs);
            std::fflush(stdout);
        }
    });
    write_loss_csv((fs::path(out_dir) / "loss.csv").string(), trainer.history());
    save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), trainer.checkpoint());
    std::printf("wrote %s\n", (fs::path(out_dir) / "checkpoint.bin").string().c_str());
    return 0;
}

int cmd_render(const std::string &ckpt_path, const std::string &params_path, const std::string &camera_path,
               const std::string &out_dir) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    const std::vector<RigParams> params = read_rig_params_file(params_path);
    const std::vector<Camera> cams = read_camera_file(camera_path);
    if (cams.size() != 1 && cams.size() != params.size()) {
        throw SizeError("need one camera or one camera per params record");
    }
    std::vector<FrameRecord> records;
    for (std::size_t i = 0; i < params.size(); ++i) {
        records.push_back({params[i], cams.size() == 1 ? cams[0] : cams[i]});
    }
    render_records(ck, records, out_dir);
    return 0;
}

int cmd_reenact(const std::string &ckpt_path, const std::string &driving_dir, const std::string &out_dir) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    const std::vector<FrameRecord> records = read_params_file((fs::path(driving_dir) / "params.jsonl").string());
    render_records(ck, records, out_dir);
    return 0;
}

int cmd_eval(const std::string &ckpt_path, const std::string &data_dir, const std::string &csv_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    const Dataset data = load_dataset(data_dir);
    double psnr_sum = 0.0, ssim_sum = 0.0;
    std::FILE *csv = csv_path.empty() ? nullptr : std::fopen(csv_path.c_str(), "w");
    if (csv != nullptr) {
        std::fputs("frame,psnr,ssim\n", csv);
    }
    for (std::size_t i = 0; i < data.frames.size(); ++i) {
        const DatasetFrame &f = data.frames[i];
        // Ground truth went through 8-bit PNG, so compare at the same precision.
        const Image render = quantize8(ck.model.render(f.record.params, f.record.camera));
        const ImageMetrics m = psnr_ssim(render, f.image);
        psnr_sum += m.psnr;
        ssim_sum += m.ssim;
        if (csv != nullptr) {
            std::fprintf(csv, "%zu,%.17g,%.17g\n", i, m.psnr, m.ssim);
        }
    }
    if (csv != nullptr) {
        std::fclose(csv);
    }
    const double n = static_cast<double>(std::max<std::size_t>(data.frames.size(), 1));
    std::printf("frames %zu\nPSNR %.6f\nSSIM %.9f\n", data.frames.size(), psnr_sum / n, ssim_sum / n);
    return 0;
}

int cmd_gradcheck(const std::string &module, std::uint64_t seed) {
    bool ok = true;
    for (const GradCheckResult &r : run_gradcheck(module, seed)) {
        std::printf("%-32s %s  checked %-6zu max_rel_err %.3e (tol %.0e)  worst #%zu analytic %.6e numeric %.6e\n",
                    r.name.c_str(), r.passed() ? "PASS" : "FAIL", r.checked, r.max_rel_error, r.tolerance,
                    r.worst_index, r.worst_analytic, r.worst_numeric);
        ok = ok && r.passed();
    }
    return ok ? 0 : 1;
}

int cmd_synth(const ToySceneOptions &opt, const std::string &out_dir, const std::string &heldout_dir) {
    const ToyScene scene = make_toy_scene(opt);
    save_dataset(out_dir, scene.train);
    std::printf("wrote %zu training frames to %s\n", scene.train.frames.size(), out_dir.c_str());
    if (!heldout_dir.empty()) {
        save_dataset(heldout_dir, scene.heldout);
        std::printf("wrote %zu held-out frames to %s\n", scene.heldout.frames.size(), heldout_dir.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"rigsplat: Gaussian splatting bound to a parametric mesh rig"};
    app.require_subcommand(0, 1);

    bool print_config = false;
    std::string config_path;
    app.add_flag("--print-config", print_config, "Print the effective training configuration as JSON and exit");

    auto *train = app.add_subcommand("train", "Optimize a model against a dataset");
    std::string data_dir, out_dir;
    long iters = -1, log_every = 100;
    int threads = 0;
    train->add_option("--config", config_path, "JSON config (defaults when omitted)");
    train->add_option("--data", data_dir, "Dataset directory")->required();
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--iters", iters, "Override total_iters");
    train->add_option("--threads", threads, "Override threads");
    train->add_option("--log-every", log_every, "Progress line stride (0 = quiet)");

    auto *render = app.add_subcommand("render", "Render driving parameters with a checkpoint");
    std::string ckpt_path, params_path, camera_path;
    render->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
    render->add_option("--params", params_path, "JSON-lines driving parameters")->required();
    render->add_option("--camera", camera_path, "Camera JSON (one, or one per line)")->required();
    render->add_option("--out", out_dir, "Output directory")->required();

    auto *reenact = app.add_subcommand("reenact", "Drive a checkpoint with another sequence's parameters");
    std::string driving_dir;
    reenact->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
    reenact->add_option("--driving", driving_dir, "Dataset directory providing params.jsonl")->required();
    reenact->add_option("--out", out_dir, "Output directory")->required();

    auto *eval = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint against a dataset");
    std::string csv_path;
    eval->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--data", data_dir, "Dataset directory")->required();
    eval->add_option("--csv", csv_path, "Per-frame metrics CSV");

    auto *gradcheck = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
    std::string module = "all";
    std::uint64_t seed = 0;
    gradcheck->add_option("--module", module, "gaussian, rasterizer, adjuster, losses, full or all");
    gradcheck->add_option("--seed", seed, "Random seed");

    auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset from a toy rig");
    ToySceneOptions toy;
    std::string heldout_dir;
    synth->add_option("--seed", toy.seed, "Random seed");
    synth->add_option("--out", out_dir, "Training dataset directory")->required();
    synth->add_option("--heldout", heldout_dir, "Held-out dataset directory");
    synth->add_option("--gaussians", toy.gaussians, "Ground-truth Gaussian count");
    synth->add_option("--cameras", toy.cameras, "Orbit camera count");
    synth->add_option("--settings", toy.train_settings, "Training parameter settings");
    synth->add_option("--heldout-settings", toy.heldout_settings, "Held-out parameter settings");
    synth->add_option("--size", toy.size, "Image width and height");
    synth->add_option("--fine", toy.fine.amplitude, "Amplitude of the non-rig deformation");
    double focal = 0.0;
    synth->add_option("--focal", focal, "Focal length in pixels (default scales with --size)");

    app.add_option("--config", config_path, "JSON config used by --print-config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (print_config) {
            std::cout << config_to_json(config_or_default(config_path)) << std::endl;
            return 0;
        }
        if (*train) {
            return cmd_train(config_path, data_dir, out_dir, iters, threads, log_every);
        }
        if (*render) {
            return cmd_render(ckpt_path, params_path, camera_path, out_dir);
        }
        if (*reenact) {
            return cmd_reenact(ckpt_path, driving_dir, out_dir);
        }
        if (*eval) {
            return cmd_eval(ckpt_path, data_dir, csv_path);
        }
        if (*gradcheck) {
            return cmd_gradcheck(module, seed);
        }
        if (*synth) {
            toy.focal = focal > 0.0 ? focal : toy.focal * toy.size / 64.0;
            return cmd_synth(toy, out_dir, heldout_dir);
        }
        std::cout << app.help() << std::endl;
        return 0;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
