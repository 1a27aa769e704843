#include "hdcg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hdcg/errors.hpp"

namespace hdcg {

DatasetSplit split_by_volume(const std::vector<std::string>& volumes, double fraction_train, std::uint64_t seed) {
    if (volumes.size() < 2) throw ConfigError("need at least 2 volumes to split");
    if (!(fraction_train > 0.0 && fraction_train < 1.0)) throw ConfigError("fraction_train must lie in (0,1)");

    const auto total = static_cast<long>(volumes.size());
    const long n_train = std::clamp(std::lround(fraction_train * static_cast<double>(total)), 1L, total - 1);

    std::vector<std::size_t> order(volumes.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    DatasetSplit split;
    split.fraction_train = fraction_train;
    for (auto i : train_idx) split.train_volumes.push_back(volumes[i]);
    for (auto i : test_idx) split.test_volumes.push_back(volumes[i]);
    return split;
}

std::vector<std::string> read_split_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open split file '" + path.string() + "'");
    std::vector<std::string> ids;
    for (std::string line; std::getline(in, line);) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

void write_split_file(const std::filesystem::path& path, const std::vector<std::string>& volumes) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write split file '" + path.string() + "'");
    for (const auto& v : volumes) out << v << '\n';
}

std::vector<std::string> list_volumes(const std::filesystem::path& root, Domain domain) {
    const auto dir = root / std::string(to_string(domain));
    if (!std::filesystem::is_directory(dir)) throw IoError("missing dataset directory '" + dir.string() + "'");
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

long slice_index(const std::filesystem::path& p) {
    try {
        return std::stol(p.stem().string());
    } catch (const std::exception&) {
        throw DataError("slice file name is not an index: '" + p.string() + "'");
    }
}

}  // namespace

std::vector<BScan> load_volumes(const std::filesystem::path& root, Domain domain,
                                const std::vector<std::string>& volumes) {
    std::vector<BScan> scans;
    for (const auto& vol : volumes) {
        const auto dir = root / std::string(to_string(domain)) / vol;
        if (!std::filesystem::is_directory(dir)) throw IoError("missing volume directory '" + dir.string() + "'");
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            const auto ext = entry.path().extension().string();
            if (entry.is_regular_file() && (ext == ".png" || ext == ".tif" || ext == ".tiff"))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end(),
                  [](const auto& a, const auto& b) { return slice_index(a) < slice_index(b); });
        for (const auto& f : files) {
            BScan s = load_bscan(f, domain);
            scans.emplace_back(s.pixels(), domain, vol + "/" + f.stem().string());
        }
    }
    return scans;
}

UnpairedIterator::UnpairedIterator(std::vector<BScan> hn_set, std::vector<BScan> ln_set, std::uint64_t seed)
    : hn_(std::move(hn_set)), ln_(std::move(ln_set)), rng_(seed) {
    if (hn_.empty() || ln_.empty()) throw DataError("unpaired iterator needs non-empty HN and LN sets");
    reshuffle();
}

void UnpairedIterator::reshuffle() {
    hn_order_.resize(hn_.size());
    ln_order_.resize(ln_.size());
    std::iota(hn_order_.begin(), hn_order_.end(), 0);
    std::iota(ln_order_.begin(), ln_order_.end(), 0);
    std::shuffle(hn_order_.begin(), hn_order_.end(), rng_);
    std::shuffle(ln_order_.begin(), ln_order_.end(), rng_);
}

std::pair<const BScan&, const BScan&> UnpairedIterator::next() {
    if (position_ == epoch_length()) {
        position_ = 0;
        reshuffle();
    }
    const std::size_t i = position_++;
    if (position_ == epoch_length()) ++epoch_;
    return {hn_[hn_order_[i % hn_.size()]], ln_[ln_order_[i % ln_.size()]]};
}

}  // namespace hdcg
