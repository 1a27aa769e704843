#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hdcg/baselines.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/phantom.hpp"
#include "hdcg/training.hpp"

namespace hdcg {

/// Names accepted by make_denoiser besides the baselines.
inline constexpr const char* kRawMethod = "raw";
inline constexpr const char* kModelMethod = "ours";

/// "raw" (identity), any baseline name, or "ours" (requires a checkpoint).
Denoiser make_denoiser(const std::string& method, const BaselineParams& params,
                       std::shared_ptr<const Checkpoint> ckpt = nullptr);

/// Writes n phantoms (seeds seed..seed+n-1) as <out>/<hn|ln|clean>/pNNNN/0.png
/// plus manifest.json with seeds and boundaries. Returns the volume ids.
std::vector<std::string> write_phantom_dataset(const std::filesystem::path& out, const PhantomConfig& cfg, int n,
                                               std::uint64_t seed);

/// HN scans paired with the same volume/slice of the reference domain.
std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& root, Domain reference, int limit = -1);

}  // namespace hdcg
