#include "hdcg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hdcg/dataset.hpp"
#include "hdcg/errors.hpp"

namespace hdcg {

Denoiser make_denoiser(const std::string& method, const BaselineParams& params,
                       std::shared_ptr<const Checkpoint> ckpt) {
    if (method == kRawMethod) return [](const BScan& img) { return img; };
    if (method == kModelMethod) {
        if (!ckpt) throw ConfigError("method 'ours' needs a checkpoint");
        return [ckpt](const BScan& img) { return denoise(*ckpt, img); };
    }
    const auto& names = baseline_names();
    if (std::find(names.begin(), names.end(), method) == names.end())
        throw ConfigError("unknown method '" + method + "'");
    return [method, params](const BScan& img) { return run_baseline(method, img, params).output; };
}

std::vector<std::string> write_phantom_dataset(const std::filesystem::path& out, const PhantomConfig& cfg, int n,
                                               std::uint64_t seed) {
    if (n < 1) throw ConfigError("phantom count must be >= 1");
    cfg.validate();
    std::vector<std::string> ids;
    nlohmann::json samples = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "p%04d", i);
        const PhantomSample s = generate_phantom(cfg, cfg.frames_hn, cfg.frames_ln, seed + i);
        for (const auto& [scan, dir] : {std::pair{&s.hn, "hn"}, std::pair{&s.ln, "ln"}, std::pair{&s.clean, "clean"}}) {
            const auto vol = out / dir / id;
            std::filesystem::create_directories(vol);
            save_png(vol / "0.png", scan->pixels(), 16);
        }
        samples.push_back({{"id", id},
                           {"seed", s.seed},
                           {"top_boundary", s.top_boundary},
                           {"bottom_boundary", s.bottom_boundary}});
        ids.emplace_back(id);
    }
    nlohmann::json manifest = {{"schema", "phantoms/v1"}, {"config", cfg}, {"samples", samples}};
    std::ofstream f(out / "manifest.json");
    if (!f) throw IoError("cannot write manifest in '" + out.string() + "'");
    f << manifest.dump(2) << '\n';
    return ids;
}

std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& root, Domain reference, int limit) {
    const auto hn_ids = list_volumes(root, Domain::HighNoise);
    const auto ref_ids = list_volumes(root, reference);
    std::vector<std::string> ids;
    std::set_intersection(hn_ids.begin(), hn_ids.end(), ref_ids.begin(), ref_ids.end(), std::back_inserter(ids));
    if (limit >= 0 && static_cast<int>(ids.size()) > limit) ids.resize(limit);
    if (ids.empty()) throw DataError("no volumes with both hn and " + std::string(to_string(reference)) + " scans");
    const auto hn = load_volumes(root, Domain::HighNoise, ids);
    const auto ref = load_volumes(root, reference, ids);
    if (hn.size() != ref.size()) throw DataError("hn and reference volumes hold different slice counts");
    std::vector<EvalPair> pairs;
    for (std::size_t i = 0; i < hn.size(); ++i) {
        if (hn[i].source_id() != ref[i].source_id())
            throw DataError("unpaired slice '" + hn[i].source_id() + "' vs '" + ref[i].source_id() + "'");
        pairs.push_back({hn[i], ref[i]});
    }
    return pairs;
}

}  // namespace hdcg
