#include "hdcg/rating.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "hdcg/errors.hpp"

namespace hdcg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string random_hex(std::mt19937_64& rng, int words) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (int w = 0; w < words; ++w) {
        std::uint64_t v = rng();
        for (int i = 0; i < 16; ++i, v >>= 4) out.push_back(digits[v & 0xf]);
    }
    return out;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_hash(const std::string& s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

std::size_t first_unrated(const std::vector<std::optional<RatingRecord>>& ratings) {
    std::size_t i = 0;
    while (i < ratings.size() && ratings[i]) ++i;
    return i;
}

}  // namespace

void to_json(json& j, const RatingSession& s) {
    json samples = json::array();
    for (const auto& smp : s.samples) {
        json cands = json::array();
        for (const auto& c : smp.candidates)
            cands.push_back({{"candidate_id", c.candidate_id},
                             {"hidden_method_label", c.hidden_method_label},
                             {"image_ref", c.image_ref}});
        samples.push_back({{"sample_id", smp.sample_id},
                           {"reference_id", smp.reference_id},
                           {"reference_ref", smp.reference_ref},
                           {"candidates", cands},
                           {"presentation_order", smp.presentation_order}});
    }
    j = {{"session_id", s.session_id},
         {"rater_id", s.rater_id},
         {"created_at", s.created_at},
         {"methods", s.methods},
         {"samples", samples}};
}

void from_json(const json& j, RatingSession& s) {
    j.at("session_id").get_to(s.session_id);
    j.at("rater_id").get_to(s.rater_id);
    j.at("created_at").get_to(s.created_at);
    j.at("methods").get_to(s.methods);
    s.samples.clear();
    for (const auto& js : j.at("samples")) {
        RatingSample smp;
        js.at("sample_id").get_to(smp.sample_id);
        js.at("reference_id").get_to(smp.reference_id);
        js.at("reference_ref").get_to(smp.reference_ref);
        js.at("presentation_order").get_to(smp.presentation_order);
        for (const auto& jc : js.at("candidates"))
            smp.candidates.push_back({jc.at("candidate_id").get<std::string>(),
                                      jc.at("hidden_method_label").get<std::string>(),
                                      jc.at("image_ref").get<std::string>()});
        s.samples.push_back(std::move(smp));
    }
}

void to_json(json& j, const RatingRecord& r) {
    j = {{"session_id", r.session_id},
         {"sample_id", r.sample_id},
         {"rater_id", r.rater_id},
         {"ranking", r.ranking},
         {"submitted_at", r.submitted_at}};
}

void from_json(const json& j, RatingRecord& r) {
    j.at("session_id").get_to(r.session_id);
    j.at("sample_id").get_to(r.sample_id);
    j.at("rater_id").get_to(r.rater_id);
    j.at("ranking").get_to(r.ranking);
    j.at("submitted_at").get_to(r.submitted_at);
}

json AggregateResult::to_json() const {
    json raters = json::object();
    for (const auto& [rater, counts] : per_rater) {
        json m = json::object();
        for (const auto& [method, c] : counts) m[method] = c;
        raters[rater] = {{"rank_counts", m}, {"completed", completed.at(rater)}};
    }
    return {{"schema", kRatingSchema}, {"methods", methods}, {"per_rater", raters}, {"first_place", first_place}};
}

std::vector<std::vector<int>> presentation_orders(std::uint64_t seed, int n_samples, int n_candidates) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> out(n_samples);
    for (auto& order : out) {
        order.resize(n_candidates);
        for (int i = 0; i < n_candidates; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
    }
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw ComputeError("SHA-256 failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(digits[md[i] >> 4]);
        out.push_back(digits[md[i] & 0xf]);
    }
    return out;
}

RatingStore::RatingStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    fs::create_directories(data_dir_ / "images");
    replay();
}

void RatingStore::replay() {
    std::ifstream in(log_path());
    if (!in) return;
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.push_back(line);
    std::map<std::string, std::shared_ptr<State>> states;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        json j;
        try {
            j = json::parse(lines[n]);
        } catch (const json::parse_error&) {
            if (n + 1 == lines.size()) break;  // torn final write
            throw FormatError("rating log line " + std::to_string(n + 1) + " is not valid JSON");
        }
        try {
            if (j.at("schema") != kRatingSchema) throw FormatError("unknown schema in rating log");
            const std::string type = j.at("type");
            if (type == "session") {
                auto st = std::make_shared<State>();
                st->session = j.at("session").get<RatingSession>();
                st->ratings.resize(st->session.samples.size());
                states[st->session.session_id] = st;
            } else if (type == "rating") {
                auto r = j.at("record").get<RatingRecord>();
                auto it = states.find(r.session_id);
                if (it == states.end()) throw FormatError("rating for unknown session " + r.session_id);
                auto& samples = it->second->session.samples;
                auto pos = std::find_if(samples.begin(), samples.end(),
                                        [&](const RatingSample& s) { return s.sample_id == r.sample_id; });
                if (pos == samples.end()) throw FormatError("rating for unknown sample " + r.sample_id);
                it->second->ratings[pos - samples.begin()] = std::move(r);
            } else {
                throw FormatError("unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw FormatError("rating log line " + std::to_string(n + 1) + ": " + e.what());
        }
    }
    std::lock_guard lock(map_mutex_);
    for (auto& [id, st] : states) sessions_[id] = st;
}

void RatingStore::append(const json& line) {
    const std::string text = line.dump() + "\n";
    const int fd = ::open(log_path().c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw IoError("cannot open rating log '" + log_path().string() + "'");
    std::size_t done = 0;
    while (done < text.size()) {
        const ssize_t n = ::write(fd, text.data() + done, text.size() - done);
        if (n <= 0) {
            ::close(fd);
            throw IoError("write to rating log failed");
        }
        done += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
}

std::string RatingStore::store_image(const fs::path& src) {
    const std::string bytes = read_bytes(src);
    const std::string hash = sha256_hex(bytes);
    const fs::path dst = data_dir_ / "images" / (hash + ".png");
    if (!fs::exists(dst)) {
        const fs::path tmp = dst.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        }
        fs::rename(tmp, dst);
    }
    return hash;
}

std::shared_ptr<const RatingStore::State> RatingStore::snapshot(const std::string& session_id) const {
    std::lock_guard lock(map_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw RatingError(404, "unknown session '" + session_id + "'");
    return it->second;
}

RatingSession RatingStore::create_session(const SessionSpec& spec) {
    if (spec.methods.size() < 2) throw ConfigError("at least two methods are required");
    if (std::set<std::string>(spec.methods.begin(), spec.methods.end()).size() != spec.methods.size())
        throw ConfigError("methods must be unique");
    if (spec.n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (spec.rater_id.empty()) throw ConfigError("rater_id is required");
    const fs::path ref_dir = spec.dataset / "reference";
    if (!fs::is_directory(ref_dir)) throw DataError("missing reference directory '" + ref_dir.string() + "'");
    std::vector<fs::path> refs;
    for (const auto& e : fs::directory_iterator(ref_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") refs.push_back(e.path());
    std::sort(refs.begin(), refs.end());
    if (static_cast<int>(refs.size()) < spec.n_samples)
        throw DataError("dataset has " + std::to_string(refs.size()) + " reference images, " +
                        std::to_string(spec.n_samples) + " requested");
    refs.resize(spec.n_samples);
    for (const auto& r : refs)
        for (const auto& m : spec.methods)
            if (!fs::is_regular_file(spec.dataset / m / r.filename()))
                throw DataError("missing image '" + (spec.dataset / m / r.filename()).string() + "'");

    RatingSession s;
    std::random_device rd;
    std::mt19937_64 id_rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    s.session_id = random_hex(id_rng, 2);
    s.rater_id = spec.rater_id;
    s.created_at = utc_now();
    s.methods = spec.methods;
    const int k = static_cast<int>(spec.methods.size());
    const auto orders = presentation_orders(spec.seed, spec.n_samples, k);
    std::mt19937_64 cand_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < spec.n_samples; ++i) {
        RatingSample smp;
        smp.sample_id = "s" + std::to_string(i);
        smp.reference_id = refs[i].stem().string();
        smp.reference_ref = store_image(refs[i]);
        for (const auto& m : spec.methods)
            smp.candidates.push_back({random_hex(cand_rng, 1), m, store_image(spec.dataset / m / refs[i].filename())});
        smp.presentation_order = orders[i];
        s.samples.push_back(std::move(smp));
    }

    auto st = std::make_shared<State>();
    st->session = s;
    st->ratings.resize(s.samples.size());
    std::lock_guard writer(writer_mutex_);
    append({{"schema", kRatingSchema}, {"type", "session"}, {"session", s}});
    std::lock_guard lock(map_mutex_);
    sessions_[s.session_id] = std::move(st);
    return s;
}

json RatingStore::next_sample(const std::string& session_id) const {
    const auto st = snapshot(session_id);
    const std::size_t i = first_unrated(st->ratings);
    const std::size_t total = st->ratings.size();
    if (i == total)
        return {{"schema", kRatingSchema}, {"session_id", session_id}, {"done", true}, {"completed", total},
                {"total", total}};
    const auto& smp = st->session.samples[i];
    json cands = json::array();
    for (int idx : smp.presentation_order) {
        const auto& c = smp.candidates[idx];
        cands.push_back({{"candidate_id", c.candidate_id}, {"image", "/images/" + c.image_ref}});
    }
    return {{"schema", kRatingSchema},
            {"session_id", session_id},
            {"done", false},
            {"sample_index", i},
            {"sample_id", smp.sample_id},
            {"completed", i},
            {"total", total},
            {"reference", {{"image", "/images/" + smp.reference_ref}}},
            {"candidates", cands}};
}

json RatingStore::submit_rating(const std::string& session_id, const json& body) {
    if (!body.is_object() || body.value("schema", "") != kRatingSchema)
        throw RatingError(400, std::string("body must be a JSON object with schema '") + kRatingSchema + "'");
    if (!body.contains("sample_id") || !body["sample_id"].is_string())
        throw RatingError(400, "sample_id must be a string");
    if (!body.contains("ranking") || !body["ranking"].is_array())
        throw RatingError(400, "ranking must be an array");
    RatingRecord r;
    r.session_id = session_id;
    r.sample_id = body["sample_id"];
    for (const auto& c : body["ranking"]) {
        if (!c.is_string()) throw RatingError(422, "ranking entries must be candidate ids");
        r.ranking.push_back(c);
    }

    std::lock_guard writer(writer_mutex_);
    const auto st = snapshot(session_id);
    r.rater_id = body.value("rater_id", st->session.rater_id);
    if (r.rater_id != st->session.rater_id) throw RatingError(422, "rater_id does not match the session");
    const auto& samples = st->session.samples;
    auto pos = std::find_if(samples.begin(), samples.end(),
                            [&](const RatingSample& s) { return s.sample_id == r.sample_id; });
    if (pos == samples.end()) throw RatingError(422, "unknown sample '" + r.sample_id + "'");
    const std::size_t idx = static_cast<std::size_t>(pos - samples.begin());
    if (st->ratings[idx]) throw RatingError(409, "sample '" + r.sample_id + "' is already rated");
    if (idx != first_unrated(st->ratings)) throw RatingError(409, "sample '" + r.sample_id + "' is not pending");
    std::set<std::string> expected, given(r.ranking.begin(), r.ranking.end());
    for (const auto& c : pos->candidates) expected.insert(c.candidate_id);
    if (given.size() != r.ranking.size()) throw RatingError(422, "ranking repeats a candidate");
    if (given != expected) throw RatingError(422, "ranking must be a permutation of the sample's candidates");
    r.submitted_at = utc_now();

    append({{"schema", kRatingSchema}, {"type", "rating"}, {"record", r}});
    auto next = std::make_shared<State>(*st);
    next->ratings[idx] = r;
    const std::size_t completed = first_unrated(next->ratings);
    {
        std::lock_guard lock(map_mutex_);
        sessions_[session_id] = std::move(next);
    }
    return {{"schema", kRatingSchema},
            {"session_id", session_id},
            {"sample_id", r.sample_id},
            {"accepted", true},
            {"completed", completed},
            {"total", samples.size()}};
}

AggregateResult RatingStore::aggregate(const std::vector<std::string>& session_ids) const {
    AggregateResult out;
    std::size_t width = 0;
    for (const auto& id : session_ids) {
        const auto st = snapshot(id);
        for (const auto& m : st->session.methods)
            if (std::find(out.methods.begin(), out.methods.end(), m) == out.methods.end()) out.methods.push_back(m);
        auto& counts = out.per_rater[st->session.rater_id];
        out.completed.try_emplace(st->session.rater_id, 0);
        for (std::size_t i = 0; i < st->ratings.size(); ++i) {
            if (!st->ratings[i]) continue;
            const auto& smp = st->session.samples[i];
            const auto& ranking = st->ratings[i]->ranking;
            width = std::max(width, ranking.size());
            for (std::size_t k = 0; k < ranking.size(); ++k) {
                auto c = std::find_if(smp.candidates.begin(), smp.candidates.end(),
                                      [&](const Candidate& c) { return c.candidate_id == ranking[k]; });
                auto& v = counts[c->hidden_method_label];
                if (v.size() <= k) v.resize(k + 1, 0);
                ++v[k];
                if (k == 0) ++out.first_place[c->hidden_method_label];
            }
            ++out.completed[st->session.rater_id];
        }
    }
    for (auto& [rater, counts] : out.per_rater) {
        for (const auto& m : out.methods) counts[m].resize(width, 0);
        for (auto& [m, v] : counts) v.resize(width, 0);
    }
    for (const auto& m : out.methods) out.first_place.try_emplace(m, 0);
    return out;
}

std::optional<fs::path> RatingStore::image_path(const std::string& content_hash) const {
    if (!is_hash(content_hash)) return std::nullopt;
    const fs::path p = data_dir_ / "images" / (content_hash + ".png");
    if (!fs::is_regular_file(p)) return std::nullopt;
    return p;
}

std::map<std::string, std::vector<bool>> RatingStore::completion() const {
    std::lock_guard lock(map_mutex_);
    std::map<std::string, std::vector<bool>> out;
    for (const auto& [id, st] : sessions_) {
        auto& v = out[id];
        for (const auto& r : st->ratings) v.push_back(r.has_value());
    }
    return out;
}

std::vector<std::string> RatingStore::session_ids() const {
    std::lock_guard lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, st] : sessions_) out.push_back(id);
    return out;
}

}  // namespace hdcg
