#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hdcg/image.hpp"

namespace hdcg {

struct DatasetSplit {
    std::vector<std::string> train_volumes;
    std::vector<std::string> test_volumes;
    double fraction_train = 0.9;
};

/// Splits whole volumes (never individual scans) into train and test sets.
/// |train| = round(fraction * total), clamped so both sides are non-empty.
DatasetSplit split_by_volume(const std::vector<std::string>& volumes, double fraction_train, std::uint64_t seed);

std::vector<std::string> read_split_file(const std::filesystem::path& path);
void write_split_file(const std::filesystem::path& path, const std::vector<std::string>& volumes);

/// Volume ids found under `<root>/<hn|ln>/`, sorted.
std::vector<std::string> list_volumes(const std::filesystem::path& root, Domain domain);

/// All slices of the given volumes from `<root>/<hn|ln>/<volume>/<slice>.png`,
/// ordered by volume then numeric slice index.
std::vector<BScan> load_volumes(const std::filesystem::path& root, Domain domain,
                                const std::vector<std::string>& volumes);

/// Endless stream of unregistered (hn, ln) pairs. Each epoch reshuffles both
/// sets independently and pairs them by position; the shorter set wraps
/// around its own permutation so an epoch has max(|hn|, |ln|) pairs.
class UnpairedIterator {
public:
    UnpairedIterator(std::vector<BScan> hn_set, std::vector<BScan> ln_set, std::uint64_t seed);

    std::pair<const BScan&, const BScan&> next();

    std::size_t epoch_length() const noexcept { return std::max(hn_.size(), ln_.size()); }
    /// Number of completed epochs.
    std::size_t epoch() const noexcept { return epoch_; }
    /// Index of the next pair within the current epoch.
    std::size_t position() const noexcept { return position_; }

    const std::vector<BScan>& hn_set() const noexcept { return hn_; }
    const std::vector<BScan>& ln_set() const noexcept { return ln_; }

private:
    void reshuffle();

    std::vector<BScan> hn_;
    std::vector<BScan> ln_;
    std::vector<std::size_t> hn_order_;
    std::vector<std::size_t> ln_order_;
    std::mt19937_64 rng_;
    std::size_t epoch_ = 0;
    std::size_t position_ = 0;
};

}  // namespace hdcg
