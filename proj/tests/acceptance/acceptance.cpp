// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hdcg/baselines.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/inspection.hpp"
#include "hdcg/losses.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/phantom.hpp"
#include "hdcg/pipeline.hpp"
#include "hdcg/rating.hpp"
#include "hdcg/training.hpp"

using namespace hdcg;
using nlohmann::json;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

Image random_image(int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(h, w);
    for (double& v : img.pixels()) v = u(rng);
    return img;
}

// ---- independent oracles --------------------------------------------------

double oracle_psnr(const Image& a, const Image& b) {
    long double se = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) se += std::pow(static_cast<long double>(a.pixels()[i] - b.pixels()[i]), 2);
    return static_cast<double>(10.0L * std::log10(static_cast<long double>(a.size()) / se));
}

double oracle_ssim(const Image& a, const Image& b) {
    const int r = 5;
    double w[11][11], total = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) total += w[dy + r][dx + r] = std::exp(-(dy * dy + dx * dx) / 4.5);
    const double c1 = 1e-4, c2 = 9e-4;
    double sum = 0.0;
    int n = 0;
    for (int y = r; y + r < a.height(); ++y)
        for (int x = r; x + r < a.width(); ++x) {
            double ma = 0, mb = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    ma += w[dy + r][dx + r] / total * a(y + dy, x + dx);
                    mb += w[dy + r][dx + r] / total * b(y + dy, x + dx);
                }
            double va = 0, vb = 0, cv = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const double k = w[dy + r][dx + r] / total;
                    va += k * std::pow(a(y + dy, x + dx) - ma, 2);
                    vb += k * std::pow(b(y + dy, x + dx) - mb, 2);
                    cv += k * (a(y + dy, x + dx) - ma) * (b(y + dy, x + dx) - mb);
                }
            sum += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    return sum / n;
}

std::pair<double, double> masked_moments(const Image& img, const Mask& m) {
    std::vector<double> v;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (m(y, x)) v.push_back(img(y, x));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, var / v.size()};
}

// ---- criteria ---------------------------------------------------------------

void loss_oracle() {
    const double ln3 = std::log(3.0);
    const std::vector<double> u{1.0 / 3, 1.0 / 3, 1.0 / 3};
    const double lg = generator_loss(u, u), ld = discriminator_loss(u, u, u, u);
    // 2.2 + 4.4 + 10 * 0.1 by hand
    const double tot = total_loss(2.2, 4.4, 0.1, {1.0, 10.0});
    const bool ok = std::abs(lg - 2 * ln3) < 1e-6 && std::abs(ld - 4 * ln3) < 1e-6 && std::abs(tot - 7.6) < 1e-9;
    report("loss oracle", ok, fmt("L_G=%.9f (2ln3=%.9f) L_D=%.9f (4ln3=%.9f) total=%.12f (7.6)", lg, 2 * ln3, ld,
                                  4 * ln3, tot));
}

void gradient_check() {
    TrainConfig cfg;
    cfg.generator = GeneratorSpec{1, 1, 1, 1, 3, 3, true, UpsampleMode::ResizeConv};
    cfg.discriminator.base_channels = 1;
    cfg.discriminator.n_downsample = 2;
    std::mt19937_64 rng(3);
    CycleModel m = CycleModel::create(cfg, rng);
    // Larger weights than the training init keep activations away from zero.
    std::normal_distribution<double> nd(0.0, 0.5);
    for (auto* ps : {&m.gen_h.parameters(), &m.gen_l.parameters(), &m.discriminators[0].parameters()})
        for (auto& p : *ps)
            for (double& v : p.value) v = nd(rng);
    const std::size_t count =
        m.gen_h.parameter_count() + m.gen_l.parameter_count() + m.discriminators[0].parameter_count();
    nn::Tensor l({1, 8, 8}), h({1, 8, 8});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : l.values()) v = u(rng);
    for (double& v : h.values()) v = u(rng);
    ModelGradients g;
    evaluate_objective(m, l, h, cfg.weights(), &g);

    double worst = 0.0;
    const double eps = 1e-5;
    auto check = [&](nn::ParameterSet& ps, const nn::Gradients& grads) {
        for (std::size_t p = 0; p < ps.size(); ++p)
            for (std::size_t i = 0; i < ps[p].value.size(); ++i) {
                const double orig = ps[p].value[i];
                ps[p].value[i] = orig + eps;
                const double up = evaluate_objective(m, l, h, cfg.weights()).total;
                ps[p].value[i] = orig - eps;
                const double down = evaluate_objective(m, l, h, cfg.weights()).total;
                ps[p].value[i] = orig;
                const double num = (up - down) / (2 * eps), an = grads[p][i];
                worst = std::max(worst, std::abs(num - an) / std::max({std::abs(num), std::abs(an), 1e-6}));
            }
    };
    check(m.gen_h.parameters(), g.gen_h);
    check(m.gen_l.parameters(), g.gen_l);
    check(m.discriminators[0].parameters(), g.disc[0]);
    report("gradient check", count <= 500 && worst < 1e-3,
           fmt("%zu parameters, max relative error %.3g (limit 1e-3)", count, worst));
}

void shape_conformance() {
    // Output sizes transcribed from the published architecture tables (HxWxC).
    const std::vector<std::pair<std::string, std::string>> gen_table{
        {"initial convolution", "512x512x16"}, {"down-sampling 1", "256x256x32"}, {"down-sampling 2", "128x128x64"},
        {"down-sampling 3", "64x64x128"},      {"residual block 1", "64x64x128"}, {"residual block 2", "64x64x128"},
        {"residual block 3", "64x64x128"},     {"residual block 4", "64x64x128"}, {"residual block 5", "64x64x128"},
        {"residual block 6", "64x64x128"},     {"up-sampling 1", "128x128x64"},   {"up-sampling 2", "256x256x32"},
        {"up-sampling 3", "512x512x16"},       {"final convolution", "512x512x1"}};
    const std::vector<std::pair<std::string, std::string>> disc_table{
        {"down-sampling 1", "256x256x16"}, {"residual block 1", "256x256x16"}, {"down-sampling 2", "128x128x32"},
        {"residual block 2", "128x128x32"}, {"down-sampling 3", "64x64x64"},   {"residual block 3", "64x64x64"},
        {"down-sampling 4", "32x32x128"},  {"residual block 4", "32x32x128"},  {"down-sampling 5", "16x16x256"},
        {"residual block 5", "16x16x256"}, {"down-sampling 6", "8x8x512"},     {"residual block 6", "8x8x512"},
        {"down-sampling 7", "4x4x1024"},   {"residual block 7", "4x4x1024"},   {"average pooling", "1x1x1024"},
        {"logits", "1x1x3"}};
    auto compare = [](const std::vector<LayerInfo>& got, const std::vector<std::pair<std::string, std::string>>& want,
                      std::string& bad) {
        if (got.size() != want.size()) bad += fmt("%zu layers vs %zu; ", got.size(), want.size());
        for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i)
            if (got[i].name != want[i].first || got[i].output.str() != want[i].second)
                bad += got[i].name + " " + got[i].output.str() + " vs " + want[i].first + " " + want[i].second + "; ";
        return want.size();
    };
    std::string bad;
    const std::size_t rows = compare(Generator().layer_shapes(512, 512), gen_table, bad) +
                             compare(Discriminator().layer_shapes(512, 512), disc_table, bad);
    report("shape conformance", bad.empty(), bad.empty() ? fmt("%zu table rows match", rows) : bad);
}

void metric_oracles() {
    std::mt19937_64 rng(11);
    double e_psnr = 0, e_ssim = 0, e_cnr = 0, e_msr = 0;
    bool ok = true;
    for (int t = 0; t < 100; ++t) {
        const Image a = random_image(16, 16, rng), b = random_image(16, 16, rng);
        Mask sig(16, 16), bg(16, 16);
        std::bernoulli_distribution coin(0.5);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) (coin(rng) ? sig : bg).set(y, x, true);
        const auto [ms, vs] = masked_moments(a, sig);
        const auto [mb, vb] = masked_moments(a, bg);
        const double p = psnr(a, b), s = ssim(a, b), c = cnr(a, sig, bg), m = msr(a, sig);
        const double po = oracle_psnr(a, b), so = oracle_ssim(a, b), co = (ms - mb) / std::sqrt(vs + vb),
                     mo = ms / std::sqrt(vs);
        ok = ok && close(p, po, 1e-9) && close(s, so, 1e-6) && close(c, co, 1e-12) && close(m, mo, 1e-12);
        e_psnr = std::max(e_psnr, std::abs(p - po));
        e_ssim = std::max(e_ssim, std::abs(s - so));
        e_cnr = std::max(e_cnr, std::abs(c - co));
        e_msr = std::max(e_msr, std::abs(m - mo));
    }

    // moving(p) = ref(p - s): crop the same texture at offset windows.
    int exact = 0;
    std::uniform_int_distribution<int> sh(-10, 10);
    for (int t = 0; t < 100; ++t) {
        const Image big = random_image(84, 84, rng);
        const int dy = sh(rng), dx = sh(rng);
        const Image ref = crop(big, {10, 10, 64, 64}), mov = crop(big, {10 - dy, 10 - dx, 64, 64});
        const Shift s = register_translation(ref, mov);
        exact += s.dy == dy && s.dx == dx;
    }

    // Fractional shifts: smooth blob scenes rendered at continuous offsets.
    double worst_sub = 0.0;
    std::uniform_real_distribution<double> frac(-5.0, 5.0), pos(16.0, 48.0), amp(0.3, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::array<double, 3>> blobs(8);
        for (auto& bl : blobs) bl = {pos(rng), pos(rng), amp(rng)};
        const double dy = frac(rng), dx = frac(rng);
        auto render = [&](double oy, double ox) {
            Image img(64, 64);
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x)
                    for (const auto& bl : blobs)
                        img(y, x) += bl[2] * std::exp(-(std::pow(y - bl[0] - oy, 2) + std::pow(x - bl[1] - ox, 2)) / 18.0);
            return img;
        };
        const Shift s = register_translation(render(0, 0), render(dy, dx), true);
        worst_sub = std::max({worst_sub, std::abs(s.dy - dy), std::abs(s.dx - dx)});
    }
    ok = ok && exact == 100 && worst_sub <= 0.25;
    report("metric oracles", ok,
           fmt("max |err| psnr %.2g ssim %.2g cnr %.2g msr %.2g; integer shifts %d/100; subpixel max error %.3f px",
               e_psnr, e_ssim, e_cnr, e_msr, exact, worst_sub));
}

void frame_averaging() {
    const Image clean(40, 25, 0.5);  // 1000 pixels
    std::mt19937_64 rng(1);
    const Image hn = speckle_average(clean, 12, rng), ln = speckle_average(clean, 60, rng);
    auto var = [](const Image& img) {
        const double m = img.mean();
        double v = 0.0;
        for (double x : img.pixels()) v += (x - m) * (x - m);
        return v / (img.size() - 1);
    };
    const double ratio = var(hn) / var(ln);
    report("frame averaging", std::abs(ratio / 5.0 - 1.0) <= 0.1, fmt("variance ratio %.3f (5 +/- 10%%)", ratio));
}

struct TrainingOutcome {
    std::shared_ptr<const Checkpoint> model;
};

TrainingOutcome desk_training() {
    const TrainConfig cfg = load_train_config(HDCG_CONFIG_DIR "/desk_train.json");
    PhantomConfig pc;
    std::vector<BScan> hn, ln;
    for (int i = 0; i < 40; ++i) {
        hn.push_back(generate_phantom(pc, pc.frames_hn, pc.frames_ln, i).hn);
        ln.push_back(generate_phantom(pc, pc.frames_hn, pc.frames_ln, 1000 + i).ln);
    }
    UnpairedIterator it(hn, ln, cfg.seed);
    TrainOptions opt;
    opt.keep_checkpoints = false;
    std::vector<double> epoch_cycle;
    double acc = 0.0;
    std::size_t n = 0;
    opt.on_step = [&](const LossRecord& r) {
        acc += r.cycle;
        if (++n == it.epoch_length()) {
            epoch_cycle.push_back(acc / n);
            acc = 0.0;
            n = 0;
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    auto model = std::make_shared<const Checkpoint>(train(it, cfg, opt).back());
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    double raw = 0.0, den = 0.0;
    std::vector<BScan> test_hn, test_ln;
    for (int i = 0; i < 20; ++i) {
        const auto s = generate_phantom(pc, pc.frames_hn, pc.frames_ln, 5000 + i);
        raw += psnr(s.hn, s.clean);
        den += psnr(denoise(*model, s.hn), s.clean);
        test_hn.push_back(s.hn);
        test_ln.push_back(s.ln);
    }
    raw /= 20;
    den /= 20;
    const bool a = den - raw >= 1.0;
    const bool b = !epoch_cycle.empty() && epoch_cycle.back() < 0.25 * epoch_cycle.front();

    const ScoreReport scores = discriminator_score_report(*model, test_hn, test_ln);
    bool c = scores.rows.size() == 2 && scores.columns.size() == 3;
    std::string table;
    for (std::size_t r = 0; r < scores.rows.size(); ++r) {
        double sum = 0.0;
        table += " " + scores.row_labels[r] + "[";
        for (double v : scores.rows[r]) {
            sum += v;
            table += fmt("%.3f ", v);
        }
        table.back() = ']';
        c = c && std::abs(sum - 1.0) < 1e-9;
    }
    const auto csv = std::filesystem::temp_directory_path() / "hdcg_acceptance_scores.csv";
    scores.write_csv(csv);
    c = c && std::filesystem::file_size(csv) > 0;

    report("desk-scale training", a && b && c,
           fmt("(a) PSNR denoised %.2f vs raw %.2f dB, gain %.2f (>= 1); (b) cycle %.4f -> %.4f (< 25%%); (c) scores",
               den, raw, den - raw, epoch_cycle.empty() ? 0.0 : epoch_cycle.front(),
               epoch_cycle.empty() ? 0.0 : epoch_cycle.back()) +
               table + fmt("; %.1f min", minutes));
    return {model};
}

void baseline_ordering(const std::shared_ptr<const Checkpoint>& model) {
    const BaselineParams params = load_baseline_params(HDCG_CONFIG_DIR "/baselines.json");
    PhantomConfig pc;
    std::vector<EvalPair> pairs;
    for (int i = 0; i < 50; ++i) {
        const auto s = generate_phantom(pc, pc.frames_hn, pc.frames_ln, 7000 + i);
        pairs.push_back({s.hn, s.clean});
    }
    std::vector<std::string> methods{kRawMethod};
    for (const auto& b : baseline_names()) methods.push_back(b);
    methods.push_back(kModelMethod);

    std::map<std::string, MetricRow> rows;
    bool disjoint = true;
    int masks_ok = 0;
    for (const auto& m : methods) {
        const Denoiser d = make_denoiser(m, params, model);
        rows[m] = evaluate_method(m, pairs, d);
        for (const auto& p : pairs) {
            try {
                const MaskPair mp = extract_masks(d(p.hn));
                ++masks_ok;
                for (int y = 0; y < mp.signal.height(); ++y)
                    for (int x = 0; x < mp.signal.width(); ++x)
                        disjoint = disjoint && !(mp.signal(y, x) && mp.background(y, x));
            } catch (const MaskExtractionError&) {
            }
        }
    }
    const MetricRow& raw = rows.at(kRawMethod);
    bool ordered = true;
    std::string detail;
    for (const auto& m : methods) {
        const MetricRow& r = rows.at(m);
        const bool ge = r.cnr.mean >= raw.cnr.mean && r.msr.mean >= raw.msr.mean && r.psnr.mean >= raw.psnr.mean;
        if (m != kRawMethod) ordered = ordered && ge;
        detail += fmt("%s cnr %.3f msr %.3f psnr %.2f%s; ", m.c_str(), r.cnr.mean, r.msr.mean, r.psnr.mean,
                      (m == kRawMethod || ge) ? "" : " (below raw)");
    }
    report("baseline ordering", ordered && disjoint,
           detail + fmt("masks disjoint on %d extractions: %s", masks_ok, disjoint ? "yes" : "no"));
}

void inspection_pipeline() {
    Image img(400, 200, 0.05);
    for (int x = 0; x < 200; ++x)
        for (int d = -1; d <= 1; ++d) {
            img(100 + d, x) = 0.9;
            img(300 + d, x) = 0.9;
        }
    const LayerSkeleton s = skeletonize_layers(img, Image(400, 200, 1.0));
    double worst_row = 0.0;
    int both = 0;
    for (int x = 0; x < 200; ++x)
        if (s.ilm[x] && s.rpe[x]) {
            ++both;
            worst_row = std::max({worst_row, std::abs(*s.ilm[x] - 100.0), std::abs(*s.rpe[x] - 300.0)});
        }
    const ThicknessProfile tp = thickness_profile(s);
    // 1-px invariant: no skeleton pixel has more than two 8-neighbours and no
    // column holds more than one pixel of the same curve.
    bool thin_ok = true;
    for (int y = 0; y < 400; ++y)
        for (int x = 0; x < 200; ++x) {
            if (!s.skeleton(y, x)) continue;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if ((dy || dx) && yy >= 0 && yy < 400 && xx >= 0 && xx < 200) n += s.skeleton(yy, xx);
                }
            thin_ok = thin_ok && n <= 2;
        }
    for (int x = 0; x < 200; ++x) {
        int upper = 0, lower = 0;
        for (int y = 0; y < 400; ++y)
            if (s.skeleton(y, x)) (y < 200 ? upper : lower)++;
        thin_ok = thin_ok && upper <= 1 && lower <= 1;
    }
    const bool ok = both > 0 && worst_row <= 1.0 && tp.mean && std::abs(*tp.mean - 200.0) <= 1.0 && thin_ok;
    report("inspection pipeline", ok,
           fmt("%d columns with both curves, max row error %.2f px, mean thickness %.2f, 1-px invariant %s", both,
               worst_row, tp.mean.value_or(-1.0), thin_ok ? "holds" : "violated"));
}

void runtime_harness(const std::shared_ptr<const Checkpoint>& model) {
    const BaselineParams params = load_baseline_params(HDCG_CONFIG_DIR "/baselines.json");
    PhantomConfig pc;
    std::vector<BScan> imgs;
    for (int i = 0; i < 5; ++i) imgs.push_back(generate_phantom(pc, pc.frames_hn, pc.frames_ln, 8000 + i).hn);
    std::vector<TimedMethod> methods;
    for (const auto& b : baseline_names()) methods.push_back({b, make_denoiser(b, params)});
    methods.push_back({kModelMethod, make_denoiser(kModelMethod, params, model)});
    const RuntimeReport r = benchmark_runtime(methods, imgs, 3);
    bool complete = r.rows.size() == methods.size();
    std::map<std::string, double> mean;
    std::string detail;
    for (const auto& row : r.rows) {
        complete = complete && row.n == 15 && row.times.size() == 15 && row.device == "cpu" &&
                   std::all_of(row.times.begin(), row.times.end(), [](double t) { return t > 0.0; });
        mean[row.method] = row.mean_s;
        detail += fmt("%s %.2f ms; ", row.method.c_str(), row.mean_s * 1e3);
    }
    const bool ordered = mean.count("median") && mean.count("bm3d") && mean["median"] < mean["bm3d"];
    report("runtime harness", complete && ordered,
           detail + (complete ? "report complete" : "report incomplete") + (ordered ? ", median < bm3d" : ""));
}

void rating_backend() {
    const auto root = std::filesystem::temp_directory_path() / fmt("hdcg-acceptance-rating-%u", std::random_device{}());
    std::filesystem::remove_all(root);
    const std::vector<std::string> methods{"bm3d", "wavelet", "ours"};
    PhantomConfig pc;
    for (int i = 0; i < 12; ++i) {
        const auto s = generate_phantom(pc, pc.frames_hn, pc.frames_ln, 9500 + i);
        const std::string file = fmt("%02d.png", i);
        std::filesystem::create_directories(root / "data/reference");
        save_png(root / "data/reference" / file, s.ln.pixels());
        for (const auto& m : methods) {
            std::filesystem::create_directories(root / "data" / m);
            save_png(root / "data" / m / file, run_baseline(m == "ours" ? "median" : m, s.hn).output.pixels());
        }
    }

    // Blinding: every byte the server sends back for a full session.
    bool blind = true;
    std::string session_id;
    json before;
    std::map<std::string, std::vector<bool>> completion_before;
    {
        RatingStore store(root / "store");
        RatingServer server(store);
        const int port = server.bind_any_port("127.0.0.1");
        std::thread th([&] { server.run(); });
        httplib::Client cli("127.0.0.1", port);
        std::string served;
        const json create{{"schema", kRatingSchema}, {"dataset", (root / "data").string()}, {"methods", methods},
                          {"n_samples", 12},         {"rater_id", "r1"},                  {"seed", 4}};
        auto res = cli.Post("/sessions", create.dump(), "application/json");
        served += res->body;
        session_id = json::parse(res->body)["session_id"];
        for (int i = 0; i < 8; ++i) {
            res = cli.Get("/sessions/" + session_id + "/next");
            served += res->body;
            const json next = json::parse(res->body);
            json ranking = json::array();
            for (const auto& c : next["candidates"]) ranking.push_back(c["candidate_id"]);
            const json body{{"schema", kRatingSchema}, {"sample_id", next["sample_id"]}, {"ranking", ranking}};
            res = cli.Post("/sessions/" + session_id + "/ratings", body.dump(), "application/json");
            served += res->body;
            blind = blind && res->status == 200;
        }
        served += cli.Get("/sessions/" + session_id + "/next")->body;
        for (const auto& m : methods) blind = blind && served.find(m) == std::string::npos;
        before = store.aggregate({session_id}).to_json();
        completion_before = store.completion();
        server.stop();
        th.join();
    }

    // Fairness of the presentation shuffle.
    const auto orders = presentation_orders(17, 10000, 3);
    std::map<std::vector<int>, int> freq;
    for (const auto& o : orders) ++freq[o];
    double worst = 0.0;
    for (const auto& [perm, count] : freq) worst = std::max(worst, std::abs(count / 10000.0 - 1.0 / 6.0));
    const bool fair = freq.size() == 6 && worst <= 0.02;

    // Replay.
    RatingStore reopened(root / "store");
    const bool replay = reopened.aggregate({session_id}).to_json() == before &&
                        reopened.completion() == completion_before &&
                        reopened.next_sample(session_id)["sample_index"] == 8;
    std::filesystem::remove_all(root);
    report("rating backend", blind && fair && replay,
           fmt("blinding %s; %zu permutations, max |freq - 1/6| %.4f (<= 0.02); replay %s", blind ? "clean" : "LEAK",
               freq.size(), worst, replay ? "exact" : "mismatch"));
}

}  // namespace

int main() {
    auto guard = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const std::exception& e) {
            report(name, false, std::string("exception: ") + e.what());
        }
        using R = decltype(fn());
        if constexpr (!std::is_void_v<R>) return R{};
    };
    guard("loss oracle", loss_oracle);
    guard("gradient check", gradient_check);
    guard("shape conformance", shape_conformance);
    guard("metric oracles", metric_oracles);
    guard("frame averaging", frame_averaging);
    const TrainingOutcome trained = guard("desk-scale training", desk_training);
    guard("baseline ordering", [&] { baseline_ordering(trained.model); });
    guard("inspection pipeline", inspection_pipeline);
    guard("runtime harness", [&] { runtime_harness(trained.model); });
    guard("rating backend", rating_backend);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
