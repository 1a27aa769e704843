#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hdcg {

inline constexpr const char* kRatingSchema = "rating/v1";

struct SessionSpec {
    /// Directory with reference/<sample>.png and <method>/<sample>.png.
    std::filesystem::path dataset;
    std::vector<std::string> methods;
    int n_samples = 0;
    std::string rater_id;
    std::uint64_t seed = 0;
};

struct Candidate {
    std::string candidate_id;
    std::string hidden_method_label;
    std::string image_ref;  // content hash
};

struct RatingSample {
    std::string sample_id;
    std::string reference_id;
    std::string reference_ref;
    std::vector<Candidate> candidates;  // in method order
    std::vector<int> presentation_order;
};

struct RatingSession {
    std::string session_id;
    std::string rater_id;
    std::string created_at;
    std::vector<std::string> methods;
    std::vector<RatingSample> samples;
};

struct RatingRecord {
    std::string session_id;
    std::string sample_id;
    std::string rater_id;
    std::vector<std::string> ranking;  // candidate ids, most similar first
    std::string submitted_at;
};

void to_json(nlohmann::json& j, const RatingSession& s);
void from_json(const nlohmann::json& j, RatingSession& s);
void to_json(nlohmann::json& j, const RatingRecord& r);
void from_json(const nlohmann::json& j, RatingRecord& r);

/// Rank-position counts: counts[method][k] = times ranked at position k.
struct AggregateResult {
    std::vector<std::string> methods;
    std::map<std::string, std::map<std::string, std::vector<int>>> per_rater;
    std::map<std::string, int> completed;  // per rater
    std::map<std::string, int> first_place;

    nlohmann::json to_json() const;
};

/// One uniformly random permutation of 0..n_candidates-1 per sample.
std::vector<std::vector<int>> presentation_orders(std::uint64_t seed, int n_samples, int n_candidates);

/// SHA-256 of the bytes, lower-case hex.
std::string sha256_hex(const std::string& bytes);

class RatingError : public std::runtime_error {
public:
    RatingError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Sessions and ratings backed by an append-only NDJSON log in data_dir.
/// Opening a store replays the log. Writes are serialized; readers work on
/// immutable per-session snapshots.
class RatingStore {
public:
    explicit RatingStore(std::filesystem::path data_dir);

    RatingSession create_session(const SessionSpec& spec);
    /// Blinded payload for the earliest unrated sample, or a done marker.
    nlohmann::json next_sample(const std::string& session_id) const;
    /// Validates and appends the rating; returns the ack payload.
    nlohmann::json submit_rating(const std::string& session_id, const nlohmann::json& body);
    AggregateResult aggregate(const std::vector<std::string>& session_ids) const;

    std::optional<std::filesystem::path> image_path(const std::string& content_hash) const;

    /// Completion state per session: which samples have a rating.
    std::map<std::string, std::vector<bool>> completion() const;
    std::vector<std::string> session_ids() const;
    std::filesystem::path log_path() const { return data_dir_ / "ratings.ndjson"; }

private:
    struct State {
        RatingSession session;
        std::vector<std::optional<RatingRecord>> ratings;
    };

    std::shared_ptr<const State> snapshot(const std::string& session_id) const;
    void replay();
    void append(const nlohmann::json& line);
    std::string store_image(const std::filesystem::path& src);

    std::filesystem::path data_dir_;
    mutable std::mutex map_mutex_;
    std::mutex writer_mutex_;
    std::map<std::string, std::shared_ptr<const State>> sessions_;
};

/// HTTP front end for a store: POST /sessions, GET /sessions/{id}/next,
/// POST /sessions/{id}/ratings, GET /results?sessions=a,b, GET /images/{hash}.
class RatingServer {
public:
    explicit RatingServer(RatingStore& store);
    ~RatingServer();
    RatingServer(const RatingServer&) = delete;
    RatingServer& operator=(const RatingServer&) = delete;

    /// Binds to a free port and returns it.
    int bind_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hdcg
