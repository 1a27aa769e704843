#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <nlohmann/json.hpp>

#include "hdcg/errors.hpp"
#include "hdcg/training.hpp"

namespace hdcg {

namespace {

constexpr char kMagic[8] = {'H', 'D', 'C', 'G', 'C', 'K', 'P', 'T'};

const char* mode_name(TrainMode m) { return m == TrainMode::SharedDiscriminator ? "shared" : "vanilla"; }

TrainMode mode_from_name(const std::string& s) {
    if (s == "shared") return TrainMode::SharedDiscriminator;
    if (s == "vanilla") return TrainMode::VanillaTwoDiscriminators;
    throw ConfigError("unknown training mode '" + s + "' (expected shared or vanilla)");
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"lambda_gan", c.lambda_gan},
                       {"lambda_cycle", c.lambda_cycle},
                       {"learning_rate", c.learning_rate},
                       {"optimizer", c.optimizer},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"mode", mode_name(c.mode)},
                       {"seed", c.seed},
                       {"checkpoint_every", c.checkpoint_every},
                       {"adam_beta1", c.adam_beta1},
                       {"adam_beta2", c.adam_beta2},
                       {"adam_epsilon", c.adam_epsilon},
                       {"discriminator_lr_scale", c.discriminator_lr_scale},
                       {"generator", c.generator},
                       {"discriminator", c.discriminator}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    const TrainConfig d;
    c.lambda_gan = j.value("lambda_gan", d.lambda_gan);
    c.lambda_cycle = j.value("lambda_cycle", d.lambda_cycle);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.optimizer = j.value("optimizer", d.optimizer);
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.mode = mode_from_name(j.value("mode", std::string(mode_name(d.mode))));
    c.seed = j.value("seed", d.seed);
    c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
    c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
    c.discriminator_lr_scale = j.value("discriminator_lr_scale", d.discriminator_lr_scale);
    c.generator = j.value("generator", d.generator);
    c.discriminator = j.value("discriminator", d.discriminator);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open training config '" + path.string() + "'");
    TrainConfig cfg;
    try {
        cfg = nlohmann::json::parse(in).get<TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid training config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

// ---- binary container -------------------------------------------------------
//
// "HDCGCKPT" | u32 version | u64 header bytes | JSON header | f64 payload
// The header lists every tensor with its payload offset (in doubles) and size.

namespace {

struct Writer {
    nlohmann::json index = nlohmann::json::array();
    std::vector<double> payload;

    void add(const std::string& name, const std::vector<int>& shape, std::span<const double> v) {
        index.push_back({{"name", name}, {"shape", shape}, {"offset", payload.size()}, {"count", v.size()}});
        payload.insert(payload.end(), v.begin(), v.end());
    }
    void add_set(const std::string& prefix, const nn::ParameterSet& params) {
        for (const auto& p : params) add(prefix + "/" + p.name, p.shape, p.value);
    }
    void add_adam(const std::string& prefix, const nn::ParameterSet& params, const AdamState& s) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            add("adam/" + prefix + "/m/" + params[i].name, params[i].shape, s.m[i]);
            add("adam/" + prefix + "/v/" + params[i].name, params[i].shape, s.v[i]);
        }
    }
};

struct Reader {
    std::map<std::string, std::pair<std::size_t, std::size_t>> entries;
    std::span<const double> payload;

    void fill(const std::string& name, std::vector<double>& dst) const {
        const auto it = entries.find(name);
        if (it == entries.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
        const auto [offset, count] = it->second;
        if (count != dst.size()) throw FormatError("checkpoint tensor '" + name + "' has the wrong size");
        std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), count, dst.begin());
    }
    void fill_set(const std::string& prefix, nn::ParameterSet& params) const {
        for (auto& p : params) fill(prefix + "/" + p.name, p.value);
    }
    void fill_adam(const std::string& prefix, const nn::ParameterSet& params, AdamState& s) const {
        s = AdamState(params);
        for (std::size_t i = 0; i < params.size(); ++i) {
            fill("adam/" + prefix + "/m/" + params[i].name, s.m[i]);
            fill("adam/" + prefix + "/v/" + params[i].name, s.v[i]);
        }
    }
};

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) throw FormatError("truncated checkpoint");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::string disc_prefix(std::size_t i) { return "disc" + std::to_string(i); }

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    const auto& m = ckpt.model;
    w.add_set("gen_h", m.gen_h.parameters());
    w.add_set("gen_l", m.gen_l.parameters());
    for (std::size_t i = 0; i < m.discriminators.size(); ++i)
        w.add_set(disc_prefix(i), m.discriminators[i].parameters());
    w.add_adam("gen_h", m.gen_h.parameters(), ckpt.opt_gen_h);
    w.add_adam("gen_l", m.gen_l.parameters(), ckpt.opt_gen_l);
    nlohmann::json disc_steps = nlohmann::json::array();
    for (std::size_t i = 0; i < m.discriminators.size(); ++i) {
        w.add_adam(disc_prefix(i), m.discriminators[i].parameters(), ckpt.opt_disc.at(i));
        disc_steps.push_back(ckpt.opt_disc[i].timestep);
    }

    nlohmann::json history = nlohmann::json::array();
    for (const auto& r : ckpt.loss_history)
        history.push_back({r.step, r.epoch, r.gen, r.disc, r.cycle, r.total});

    const nlohmann::json header{{"config", ckpt.config},
                                {"epoch", ckpt.epoch},
                                {"step", ckpt.step},
                                {"adam_timesteps",
                                 {{"gen_h", ckpt.opt_gen_h.timestep},
                                  {"gen_l", ckpt.opt_gen_l.timestep},
                                  {"disc", disc_steps}}},
                                {"loss_history", history},
                                {"tensors", w.index}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    const auto* p = reinterpret_cast<const std::uint8_t*>(w.payload.data());
    out.insert(out.end(), p, p + w.payload.size() * sizeof(double));
    return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a checkpoint file");
    std::size_t pos = sizeof(kMagic);
    const auto version = get<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto header_len = get<std::uint64_t>(bytes, pos);
    if (header_len > bytes.size() - pos) throw FormatError("truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    }
    pos += header_len;
    const std::size_t payload_bytes = bytes.size() - pos;
    if (payload_bytes % sizeof(double) != 0) throw FormatError("corrupt checkpoint payload");
    std::vector<double> payload(payload_bytes / sizeof(double));
    std::memcpy(payload.data(), bytes.data() + pos, payload_bytes);

    try {
        TrainConfig cfg = header.at("config").get<TrainConfig>();
        std::mt19937_64 rng(cfg.seed);
        Checkpoint c{cfg, CycleModel::create(cfg, rng), {}, {}, {}, 0, 0, {}};
        c.epoch = header.at("epoch").get<int>();
        c.step = header.at("step").get<long>();

        Reader r;
        r.payload = payload;
        for (const auto& t : header.at("tensors")) {
            const auto offset = t.at("offset").get<std::size_t>();
            const auto count = t.at("count").get<std::size_t>();
            if (offset + count > payload.size()) throw FormatError("checkpoint tensor out of range");
            r.entries[t.at("name").get<std::string>()] = {offset, count};
        }
        auto& m = c.model;
        r.fill_set("gen_h", m.gen_h.parameters());
        r.fill_set("gen_l", m.gen_l.parameters());
        for (std::size_t i = 0; i < m.discriminators.size(); ++i)
            r.fill_set(disc_prefix(i), m.discriminators[i].parameters());
        r.fill_adam("gen_h", m.gen_h.parameters(), c.opt_gen_h);
        r.fill_adam("gen_l", m.gen_l.parameters(), c.opt_gen_l);
        const auto& steps = header.at("adam_timesteps");
        c.opt_gen_h.timestep = steps.at("gen_h").get<long>();
        c.opt_gen_l.timestep = steps.at("gen_l").get<long>();
        for (std::size_t i = 0; i < m.discriminators.size(); ++i) {
            c.opt_disc.emplace_back();
            r.fill_adam(disc_prefix(i), m.discriminators[i].parameters(), c.opt_disc.back());
            c.opt_disc.back().timestep = steps.at("disc").at(i).get<long>();
        }
        for (const auto& h : header.at("loss_history"))
            c.loss_history.push_back({h.at(0).get<long>(), h.at(1).get<int>(), h.at(2).get<double>(),
                                      h.at(3).get<double>(), h.at(4).get<double>(), h.at(5).get<double>()});
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace hdcg
