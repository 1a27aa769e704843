// Grid search of baseline parameters on held-out phantoms; writes the frozen
// parameter file used by evaluate/bench.
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hdcg/baselines.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/phantom.hpp"

using namespace hdcg;

namespace {

struct Candidate {
    std::string label;
    std::function<void(BaselineParams&)> apply;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tune baseline parameters on held-out phantoms"};
    std::string out = "configs/baselines.json";
    int n = 10;
    std::uint64_t seed = 9000;
    app.add_option("--out", out, "Parameter file to write");
    app.add_option("--n", n, "Number of tuning phantoms")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Seed of the first tuning phantom");
    CLI11_PARSE(app, argc, argv);

    PhantomConfig cfg;
    std::vector<PhantomSample> set;
    for (int i = 0; i < n; ++i) set.push_back(generate_phantom(cfg, cfg.frames_hn, cfg.frames_ln, seed + i));

    std::map<std::string, std::vector<Candidate>> grid;
    for (int w : {3, 5, 7, 9})
        grid["median"].push_back({"window=" + std::to_string(w), [w](BaselineParams& p) { p.median.window = w; }});
    for (auto rule : {ThresholdRule::Bayes, ThresholdRule::Universal})
        for (int levels : {3, 4})
            for (double s : {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3})
                grid["wavelet"].push_back(
                    {std::string(rule == ThresholdRule::Bayes ? "bayes" : "universal") +
                         " levels=" + std::to_string(levels) + " sigma=" + std::to_string(s),
                     [=](BaselineParams& p) {
                         p.wavelet.rule = rule;
                         p.wavelet.levels = levels;
                         p.wavelet.sigma = s > 0.0 ? std::optional<double>(s) : std::nullopt;
                     }});
    for (double ss : {1.0, 1.5, 2.0, 3.0})
        for (double sr : {0.05, 0.1, 0.2, 0.3, 0.5})
            grid["bilateral"].push_back({"spatial=" + std::to_string(ss) + " range=" + std::to_string(sr),
                                         [=](BaselineParams& p) {
                                             p.bilateral.sigma_spatial = ss;
                                             p.bilateral.sigma_range = sr;
                                         }});
    for (int patch : {3, 5, 7})
        for (double h : {0.05, 0.1, 0.15, 0.2, 0.3})
            grid["nlmeans"].push_back({"patch=" + std::to_string(patch) + " h=" + std::to_string(h),
                                       [=](BaselineParams& p) {
                                           p.nlmeans.patch = patch;
                                           p.nlmeans.h = h;
                                       }});
    for (double s : {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3})
        grid["bm3d"].push_back({"sigma=" + std::to_string(s), [=](BaselineParams& p) {
                                    p.bm3d.sigma = s > 0.0 ? std::optional<double>(s) : std::nullopt;
                                }});

    BaselineParams best;
    for (const auto& name : baseline_names()) {
        double best_score = -kInfinity;
        std::string best_label;
        for (const auto& c : grid[name]) {
            BaselineParams p = best;
            c.apply(p);
            double score = 0.0;
            for (const auto& s : set) score += psnr(run_baseline(name, s.hn, p).output, s.clean);
            score /= n;
            std::cout << name << ' ' << c.label << " psnr=" << score << '\n';
            if (score > best_score) {
                best_score = score;
                best_label = c.label;
                c.apply(best);
            }
        }
        std::cout << "best " << name << ' ' << best_label << " psnr=" << best_score << '\n';
    }
    std::ofstream(out) << nlohmann::json(best).dump(2) << '\n';
}
