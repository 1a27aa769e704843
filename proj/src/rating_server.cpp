#include <fstream>
#include <sstream>

#include <httplib.h>

#include "hdcg/errors.hpp"
#include "hdcg/rating.hpp"

namespace hdcg {

using nlohmann::json;

struct RatingServer::Impl {
    RatingStore& store;
    httplib::Server http;

    explicit Impl(RatingStore& s) : store(s) {}
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, {{"schema", kRatingSchema}, {"error", message}});
}

template <class F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const RatingError& e) {
        fail(res, e.status(), e.what());
    } catch (const json::exception& e) {
        fail(res, 400, e.what());
    } catch (const ConfigError& e) {
        fail(res, 400, e.what());
    } catch (const DataError& e) {
        fail(res, 422, e.what());
    } catch (const std::exception& e) {
        fail(res, 500, e.what());
    }
}

std::vector<std::string> split_ids(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string id; std::getline(ss, id, ',');)
        if (!id.empty()) out.push_back(id);
    return out;
}

}  // namespace

RatingServer::RatingServer(RatingStore& store) : impl_(std::make_unique<Impl>(store)) {
    auto& http = impl_->http;
    RatingStore& st = impl_->store;

    http.Post("/sessions", [&st](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = json::parse(req.body);
            if (body.value("schema", "") != kRatingSchema)
                throw RatingError(400, std::string("schema must be '") + kRatingSchema + "'");
            SessionSpec spec;
            spec.dataset = body.at("dataset").get<std::string>();
            spec.methods = body.at("methods").get<std::vector<std::string>>();
            spec.n_samples = body.at("n_samples").get<int>();
            spec.rater_id = body.at("rater_id").get<std::string>();
            spec.seed = body.value("seed", std::uint64_t{0});
            const RatingSession s = st.create_session(spec);
            reply(res, 201,
                  {{"schema", kRatingSchema},
                   {"session_id", s.session_id},
                   {"n_samples", s.samples.size()},
                   {"n_candidates", s.methods.size()}});
        });
    });
    http.Get(R"(/sessions/([^/]+)/next)", [&st](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, st.next_sample(req.matches[1])); });
    });
    http.Post(R"(/sessions/([^/]+)/ratings)", [&st](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, st.submit_rating(req.matches[1], json::parse(req.body))); });
    });
    http.Get("/results", [&st](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto ids = split_ids(req.get_param_value("sessions"));
            if (ids.empty()) throw RatingError(400, "sessions parameter is required");
            reply(res, 200, st.aggregate(ids).to_json());
        });
    });
    http.Get(R"(/images/([0-9a-f]+))", [&st](const httplib::Request& req, httplib::Response& res) {
        const auto path = st.image_path(req.matches[1]);
        if (!path) return fail(res, 404, "unknown image");
        std::ifstream in(*path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        res.set_content(ss.str(), "image/png");
    });
}

RatingServer::~RatingServer() = default;

int RatingServer::bind_any_port(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool RatingServer::bind(const std::string& host, int port) { return impl_->http.bind_to_port(host, port); }

void RatingServer::run() { impl_->http.listen_after_bind(); }

void RatingServer::stop() { impl_->http.stop(); }

}  // namespace hdcg
