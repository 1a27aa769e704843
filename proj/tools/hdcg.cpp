#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hdcg/baselines.hpp"
#include "hdcg/dataset.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/inspection.hpp"
#include "hdcg/pipeline.hpp"
#include "hdcg/rating.hpp"
#include "hdcg/training.hpp"

namespace fs = std::filesystem;
using namespace hdcg;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

BaselineParams baseline_params(const std::string& path) {
    if (path.empty()) return {};
    return load_baseline_params(path);
}

std::shared_ptr<const Checkpoint> maybe_checkpoint(const std::string& path) {
    if (path.empty()) return nullptr;
    return std::make_shared<const Checkpoint>(load_checkpoint(path));
}

std::vector<fs::path> image_files(const fs::path& in) {
    if (fs::is_regular_file(in)) return {in};
    if (!fs::is_directory(in)) throw IoError("no such input '" + in.string() + "'");
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(in)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".png" || ext == ".tif" || ext == ".tiff")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

// ---- commands -----------------------------------------------------------------

struct SynthArgs {
    int n = 50;
    std::string out;
    std::string config;
    std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
    PhantomConfig cfg = a.config.empty() ? PhantomConfig{} : load_phantom_config(a.config);
    const auto ids = write_phantom_dataset(a.out, cfg, a.n, a.seed);
    spdlog::info("event=synth count={} out={}", ids.size(), a.out);
}

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::string resume;
    std::string split;
    int epochs = -1;
};

void run_train(const TrainArgs& a) {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
    if (a.epochs >= 0) cfg.epochs = a.epochs;
    cfg.validate();
    const auto hn_ids = a.split.empty() ? list_volumes(a.data, Domain::HighNoise) : read_split_file(a.split);
    const auto ln_ids = a.split.empty() ? list_volumes(a.data, Domain::LowNoise) : read_split_file(a.split);
    auto hn = load_volumes(a.data, Domain::HighNoise, hn_ids);
    auto ln = load_volumes(a.data, Domain::LowNoise, ln_ids);
    spdlog::info("event=train_start hn={} ln={} epochs={} mode={}", hn.size(), ln.size(), cfg.epochs,
                 cfg.mode == TrainMode::SharedDiscriminator ? "shared" : "vanilla");
    fs::create_directories(a.out);
    UnpairedIterator it(hn, ln, cfg.seed);
    TrainOptions opt;
    opt.keep_checkpoints = false;
    if (!a.resume.empty()) opt.resume = load_checkpoint(a.resume);
    opt.on_checkpoint = [&](const Checkpoint& c) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04d.ckpt", c.epoch);
        save_checkpoint(fs::path(a.out) / name, c);
        const LossRecord last = c.loss_history.empty() ? LossRecord{} : c.loss_history.back();
        spdlog::info("event=checkpoint epoch={} step={} L_G={:.6f} L_D={:.6f} L_cycle={:.6f}", c.epoch, c.step,
                     last.gen, last.disc, last.cycle);
    };
    const auto out = train(it, cfg, opt);
    const Checkpoint& final_state = out.back();
    save_checkpoint(fs::path(a.out) / "final.ckpt", final_state);
    write_loss_log(fs::path(a.out) / "loss_log.csv", final_state.loss_history);
    discriminator_score_report(final_state, hn, ln).write_csv(fs::path(a.out) / "scores.csv");
    spdlog::info("event=train_done out={}", a.out);
}

struct DenoiseArgs {
    std::string ckpt;
    std::string in;
    std::string out;
    std::string method = kModelMethod;
    std::string params;
    int bit_depth = 16;
};

void run_denoise(const DenoiseArgs& a) {
    const auto den = make_denoiser(a.method, baseline_params(a.params), maybe_checkpoint(a.ckpt));
    const fs::path in(a.in), out(a.out);
    const auto files = image_files(in);
    const bool single = fs::is_regular_file(in);
    for (const auto& f : files) {
        const BScan img = load_bscan(f, Domain::HighNoise);
        const fs::path dst = single ? out : out / fs::relative(f, in).replace_extension(".png");
        if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
        save_png(dst, den(img).pixels(), a.bit_depth);
    }
    spdlog::info("event=denoise method={} count={}", a.method, files.size());
}

struct EvaluateArgs {
    std::string pairs;
    std::string methods = "raw,median,wavelet,bilateral,nlmeans,bm3d,ours";
    std::string ckpt;
    std::string params;
    std::string reference = "ln";
    std::string out = "metrics.csv";
    std::string samples;
    int limit = -1;
    bool subpixel = false;
};

void run_evaluate(const EvaluateArgs& a) {
    const Domain ref = domain_from_string(a.reference);
    const auto pairs = load_eval_pairs(a.pairs, ref, a.limit);
    const auto params = baseline_params(a.params);
    const auto ckpt = maybe_checkpoint(a.ckpt);
    EvalOptions opt;
    opt.subpixel = a.subpixel;
    MetricReport report;
    for (const auto& m : split_csv(a.methods)) {
        report.rows.push_back(evaluate_method(m, pairs, make_denoiser(m, params, ckpt), opt));
        const auto& r = report.rows.back();
        spdlog::info("event=evaluate method={} n={} excluded={} cnr={:.4f} msr={:.4f} psnr={:.3f} ssim={:.4f}", m, r.n,
                     r.excluded, r.cnr.mean, r.msr.mean, r.psnr.mean, r.ssim.mean);
    }
    report.write_csv(a.out);
    if (!a.samples.empty()) report.write_samples_csv(a.samples);
}

struct BenchArgs {
    std::string data;
    std::string methods = "median,wavelet,bilateral,nlmeans,bm3d,ours";
    std::string ckpt;
    std::string params;
    std::string out = "runtime.csv";
    int repeats = 3;
    int limit = 10;
};

void run_bench(const BenchArgs& a) {
    auto ids = list_volumes(a.data, Domain::HighNoise);
    if (a.limit >= 0 && static_cast<int>(ids.size()) > a.limit) ids.resize(a.limit);
    const auto images = load_volumes(a.data, Domain::HighNoise, ids);
    const auto params = baseline_params(a.params);
    const auto ckpt = maybe_checkpoint(a.ckpt);
    std::vector<TimedMethod> methods;
    for (const auto& m : split_csv(a.methods)) methods.push_back({m, make_denoiser(m, params, ckpt)});
    const auto report = benchmark_runtime(methods, images, a.repeats);
    for (const auto& r : report.rows) spdlog::info("event=bench method={} mean_s={:.6f} n={}", r.method, r.mean_s, r.n);
    report.write_csv(a.out);
}

struct InspectArgs {
    std::string ckpt;
    std::string in;
    std::vector<std::string> layers;
    std::string out;
    int channel = -1;
    double alpha = 0.5;
    double scale = 0.0;
};

void run_inspect(const InspectArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const BScan img = load_bscan(a.in, Domain::HighNoise);
    fs::create_directories(a.out);
    auto layers = a.layers;
    if (layers.empty()) layers = ckpt.model.gen_l.layer_names();
    nlohmann::json summary = {{"input", a.in}, {"layers", nlohmann::json::array()}};
    for (const auto& layer : layers) {
        const FeatureMapSet set = extract_feature_maps(ckpt, img, layer);
        std::vector<GridRow> rows;
        for (std::size_t c = 0; c < set.maps.size(); ++c)
            rows.push_back({img.pixels(), set.maps[c], layer + " channel " + std::to_string(c)});
        std::string stem = layer;
        std::replace(stem.begin(), stem.end(), '/', '_');
        write_overlay_grid(fs::path(a.out) / (stem + ".png"), rows, a.alpha);

        // Thickness from the requested channel, or the first one that yields two layers.
        std::vector<int> order;
        if (a.channel >= 0) {
            if (a.channel >= static_cast<int>(set.maps.size())) throw ConfigError("channel out of range");
            order.push_back(a.channel);
        } else {
            for (int c = 0; c < static_cast<int>(set.maps.size()); ++c) order.push_back(c);
        }
        nlohmann::json entry = {{"layer", layer}, {"channels", set.maps.size()}};
        for (int c : order) {
            try {
                const auto skel = skeletonize_layers(img.pixels(), resize_bilinear(set.maps[c], img.height(), img.width()));
                write_thickness_csv(fs::path(a.out) / (stem + "_thickness.csv"), skel);
                const auto prof =
                    thickness_profile(skel, a.scale > 0.0 ? std::optional<double>(a.scale) : std::nullopt);
                entry["thickness"] = {{"channel", c}, {"unit", prof.unit}, {"columns", prof.columns.size()}};
                if (prof.mean) entry["thickness"].update({{"mean", *prof.mean}, {"min", *prof.min}, {"max", *prof.max}});
                break;
            } catch (const InsufficientStructureError& e) {
                if (a.channel >= 0) throw;
            }
        }
        summary["layers"].push_back(entry);
    }
    std::ofstream(fs::path(a.out) / "summary.json") << summary.dump(2) << '\n';
    spdlog::info("event=inspect layers={} out={}", layers.size(), a.out);
}

struct ServeArgs {
    std::string data_dir;
    std::string host = "0.0.0.0";
    int port = 8080;
};

void run_serve(const ServeArgs& a) {
    RatingStore store(a.data_dir);
    RatingServer server(store);
    if (!server.bind(a.host, a.port)) throw ConfigError("cannot bind " + a.host + ":" + std::to_string(a.port));
    spdlog::info("event=serve host={} port={} data_dir={} sessions={}", a.host, a.port, a.data_dir,
                 store.session_ids().size());
    server.run();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unpaired high/low-noise denoising toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Write synthetic speckle phantoms (hn, ln, clean) and a manifest");
    c_synth->add_option("--n", synth.n, "Number of phantoms")->check(CLI::PositiveNumber);
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_option("--config", synth.config, "Phantom config JSON");
    c_synth->add_option("--seed", synth.seed, "Seed of the first phantom");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train the cycle model on unpaired hn/ln scans");
    c_train->add_option("--data", tr.data, "Dataset root with hn/ and ln/")->required();
    c_train->add_option("--config", tr.config, "Training config JSON (defaults otherwise)");
    c_train->add_option("--out", tr.out, "Output directory for checkpoints and logs")->required();
    c_train->add_option("--epochs", tr.epochs, "Override the configured epoch count");
    c_train->add_option("--resume", tr.resume, "Checkpoint to continue from");
    c_train->add_option("--split", tr.split, "File listing the training volume ids");

    DenoiseArgs dn;
    auto* c_den = app.add_subcommand("denoise", "Denoise an image or a directory of images");
    c_den->add_option("--ckpt", dn.ckpt, "Checkpoint (for method 'ours')");
    c_den->add_option("--in", dn.in, "Input file or directory")->required();
    c_den->add_option("--out", dn.out, "Output file or directory")->required();
    c_den->add_option("--method", dn.method, "ours, raw or a baseline name");
    c_den->add_option("--params", dn.params, "Baseline parameter JSON");
    c_den->add_option("--bit-depth", dn.bit_depth, "PNG bit depth")->check(CLI::IsMember({8, 16}));

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Metric table (CNR, MSR, PSNR, SSIM) per method");
    c_eval->add_option("--pairs", ev.pairs, "Dataset root with hn/ and the reference domain")->required();
    c_eval->add_option("--methods", ev.methods, "Comma-separated methods");
    c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint for 'ours'");
    c_eval->add_option("--params", ev.params, "Baseline parameter JSON");
    c_eval->add_option("--reference", ev.reference, "Reference domain")->check(CLI::IsMember({"ln", "clean"}));
    c_eval->add_option("--out", ev.out, "Metric CSV");
    c_eval->add_option("--samples", ev.samples, "Optional per-sample CSV");
    c_eval->add_option("--limit", ev.limit, "Use at most this many volumes");
    c_eval->add_flag("--subpixel", ev.subpixel, "Sub-pixel registration");

    BenchArgs bn;
    auto* c_bench = app.add_subcommand("bench", "Single-threaded runtime per method");
    c_bench->add_option("--data", bn.data, "Dataset root with hn/")->required();
    c_bench->add_option("--methods", bn.methods, "Comma-separated methods");
    c_bench->add_option("--ckpt", bn.ckpt, "Checkpoint for 'ours'");
    c_bench->add_option("--params", bn.params, "Baseline parameter JSON");
    c_bench->add_option("--out", bn.out, "Runtime CSV");
    c_bench->add_option("--repeats", bn.repeats, "Timed passes over the images")->check(CLI::PositiveNumber);
    c_bench->add_option("--limit", bn.limit, "Use at most this many volumes");

    InspectArgs in;
    auto* c_insp = app.add_subcommand("inspect", "Feature-map overlays and layer thickness");
    c_insp->add_option("--ckpt", in.ckpt, "Checkpoint")->required();
    c_insp->add_option("--in", in.in, "Input image")->required();
    c_insp->add_option("--layer", in.layers, "Layer name (repeatable; default all)");
    c_insp->add_option("--out", in.out, "Output directory")->required();
    c_insp->add_option("--channel", in.channel, "Channel for the thickness profile");
    c_insp->add_option("--alpha", in.alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0));
    c_insp->add_option("--scale", in.scale, "Micrometres per pixel row");

    ServeArgs sv;
    sv.data_dir = env_or("DATA_DIR", "rating-data");
    sv.port = std::atoi(env_or("PORT", "8080").c_str());
    auto* c_serve = app.add_subcommand("rate-serve", "Blind rating HTTP service");
    c_serve->add_option("--data-dir", sv.data_dir, "Session log and image store (env DATA_DIR)");
    c_serve->add_option("--host", sv.host, "Listen address");
    c_serve->add_option("--port", sv.port, "Listen port (env PORT)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*c_synth) run_synth(synth);
        if (*c_train) run_train(tr);
        if (*c_den) run_denoise(dn);
        if (*c_eval) run_evaluate(ev);
        if (*c_bench) run_bench(bn);
        if (*c_insp) run_inspect(in);
        if (*c_serve) run_serve(sv);
    } catch (const ConfigError& e) {
        spdlog::error("event=failed class=config message=\"{}\"", e.what());
        return kConfig;
    } catch (const TrainingError& e) {
        spdlog::error("event=failed class=runtime message=\"{}\" diagnostic={}", e.what(), e.diagnostic());
        return kRuntime;
    } catch (const DataError& e) {
        spdlog::error("event=failed class=data message=\"{}\"", e.what());
        return kData;
    } catch (const std::exception& e) {
        spdlog::error("event=failed class=runtime message=\"{}\"", e.what());
        return kRuntime;
    }
    return kOk;
}
