#include "hdcg/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hdcg/errors.hpp"

namespace hdcg {

void TrainConfig::validate() const {
    if (!(lambda_gan >= 0.0)) throw ConfigError("lambda_gan must be >= 0");
    if (!(lambda_cycle >= 0.0)) throw ConfigError("lambda_cycle must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (optimizer != "adam") throw ConfigError("only the adam optimizer is supported");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
    if (!(discriminator_lr_scale > 0.0)) throw ConfigError("discriminator_lr_scale must be > 0");
    generator.validate();
    discriminator_for_mode().validate();
}

DiscriminatorSpec TrainConfig::discriminator_for_mode() const {
    DiscriminatorSpec d = discriminator;
    d.n_classes = mode == TrainMode::SharedDiscriminator ? 3 : 2;
    return d;
}

// ---- Adam -------------------------------------------------------------------

AdamState::AdamState(const nn::ParameterSet& params) : m(nn::zero_gradients(params)), v(nn::zero_gradients(params)) {}

void AdamState::step(nn::ParameterSet& params, const nn::Gradients& grads, double lr, double beta1, double beta2,
                     double eps) {
    ++timestep;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(timestep));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(timestep));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params[p].value;
        const auto& g = grads[p];
        auto& mp = m[p];
        auto& vp = v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            mp[i] = beta1 * mp[i] + (1.0 - beta1) * g[i];
            vp[i] = beta2 * vp[i] + (1.0 - beta2) * g[i] * g[i];
            w[i] -= lr * (mp[i] / c1) / (std::sqrt(vp[i] / c2) + eps);
        }
    }
}

// ---- model --------------------------------------------------------------------

CycleModel CycleModel::create(const TrainConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    CycleModel model{cfg.mode, Generator(cfg.generator), Generator(cfg.generator), {}};
    model.gen_h.initialize(rng);
    model.gen_l.initialize(rng);
    const int n_disc = cfg.mode == TrainMode::SharedDiscriminator ? 1 : 2;
    for (int i = 0; i < n_disc; ++i) {
        model.discriminators.emplace_back(cfg.discriminator_for_mode());
        model.discriminators.back().initialize(rng);
    }
    return model;
}

Checkpoint initialize_training(const TrainConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    Checkpoint c{cfg, CycleModel::create(cfg, rng), {}, {}, {}, 0, 0, {}};
    c.opt_gen_h = AdamState(c.model.gen_h.parameters());
    c.opt_gen_l = AdamState(c.model.gen_l.parameters());
    for (const auto& d : c.model.discriminators) c.opt_disc.emplace_back(d.parameters());
    return c;
}

ModelGradients ModelGradients::zeros(const CycleModel& model) {
    ModelGradients g;
    g.gen_h = nn::zero_gradients(model.gen_h.parameters());
    g.gen_l = nn::zero_gradients(model.gen_l.parameters());
    for (const auto& d : model.discriminators) g.disc.push_back(nn::zero_gradients(d.parameters()));
    return g;
}

// ---- objective ----------------------------------------------------------------

namespace {

std::vector<double> one_hot(int n, int k) {
    std::vector<double> v(n, 0.0);
    v[k] = 1.0;
    return v;
}

}  // namespace

CycleForward forward_cycle(const CycleModel& model, const nn::Tensor& l, const nn::Tensor& h,
                           const LossWeights& weights) {
    CycleForward f;
    f.l = l;
    f.h = h;
    f.fake_h = model.gen_h.forward(l, &f.gh_of_l);
    f.rec_l = model.gen_l.forward(f.fake_h, &f.gl_of_fake_h);
    f.fake_l = model.gen_l.forward(h, &f.gl_of_h);
    f.rec_h = model.gen_h.forward(f.fake_l, &f.gh_of_fake_l);

    const bool shared = model.mode == TrainMode::SharedDiscriminator;
    const int n = shared ? 3 : 2;
    const int real = 0;
    const int fake = shared ? ClassTargets::kFake : 1;
    const int d_h = 0;
    const int d_l = shared ? 0 : 1;

    auto judge = [&](int disc, bool is_fake, const nn::Tensor& img, std::vector<double> gen_target,
                     std::vector<double> disc_target) {
        Judgment j;
        j.discriminator = disc;
        j.fake = is_fake;
        j.prob = model.discriminators[disc].forward(img, &j.trace);
        j.gen_target = std::move(gen_target);
        j.disc_target = std::move(disc_target);
        f.judgments.push_back(std::move(j));
    };
    if (shared) {
        judge(d_h, true, f.fake_h, one_hot(n, ClassTargets::kRealHighNoise), one_hot(n, fake));
        judge(d_l, true, f.fake_l, one_hot(n, ClassTargets::kRealLowNoise), one_hot(n, fake));
        judge(d_h, false, h, {}, one_hot(n, ClassTargets::kRealHighNoise));
        judge(d_l, false, l, {}, one_hot(n, ClassTargets::kRealLowNoise));
    } else {
        judge(d_h, true, f.fake_h, one_hot(n, real), one_hot(n, fake));
        judge(d_l, true, f.fake_l, one_hot(n, real), one_hot(n, fake));
        judge(d_h, false, h, {}, one_hot(n, real));
        judge(d_l, false, l, {}, one_hot(n, real));
    }

    for (const auto& j : f.judgments) {
        if (j.fake) f.losses.gen += cross_entropy(j.prob, j.gen_target);
        f.losses.disc += cross_entropy(j.prob, j.disc_target);
    }
    f.losses.cycle = mean_abs_diff(l.values(), f.rec_l.values()) + mean_abs_diff(h.values(), f.rec_h.values());
    f.losses.total = total_loss(f.losses.gen, f.losses.disc, f.losses.cycle, weights);
    return f;
}

void backprop_cycle(const CycleModel& model, const CycleForward& fwd, const BackpropRequest& req,
                    ModelGradients& grads) {
    std::vector<nn::Tensor> fake_input_grads(2);
    for (std::size_t k = 0; k < fwd.judgments.size(); ++k) {
        const Judgment& j = fwd.judgments[k];
        const Discriminator& d = model.discriminators[j.discriminator];
        nn::Gradients* dg = req.disc_params ? &grads.disc[j.discriminator] : nullptr;
        if (j.fake) {
            std::vector<double> g(j.prob.size(), 0.0);
            if (req.fake_gen != 0.0) {
                const auto a = cross_entropy_logit_grad(j.prob, j.gen_target);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += req.fake_gen * a[i];
            }
            if (req.fake_disc != 0.0) {
                const auto b = cross_entropy_logit_grad(j.prob, j.disc_target);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += req.fake_disc * b[i];
            }
            if (!req.to_generators && !req.disc_params) continue;
            fake_input_grads[k] = d.backward(j.trace, g, dg, req.to_generators);
        } else if (req.real_disc != 0.0 && req.disc_params) {
            auto g = cross_entropy_logit_grad(j.prob, j.disc_target);
            for (double& v : g) v *= req.real_disc;
            d.backward(j.trace, g, dg, false);
        }
    }
    if (!req.to_generators) return;

    auto scaled_abs_grad = [&](const nn::Tensor& x, const nn::Tensor& rec) {
        nn::Tensor g = mean_abs_grad(x, rec);
        for (double& v : g.values()) v *= req.cycle;
        return g;
    };

    // l -> G_H -> fake_h -> G_L -> rec_l
    nn::Tensor g_fake_h = model.gen_l.backward(fwd.gl_of_fake_h, scaled_abs_grad(fwd.l, fwd.rec_l), &grads.gen_l);
    g_fake_h += fake_input_grads[0];
    model.gen_h.backward(fwd.gh_of_l, g_fake_h, &grads.gen_h, false);

    // h -> G_L -> fake_l -> G_H -> rec_h
    nn::Tensor g_fake_l = model.gen_h.backward(fwd.gh_of_fake_l, scaled_abs_grad(fwd.h, fwd.rec_h), &grads.gen_h);
    g_fake_l += fake_input_grads[1];
    model.gen_l.backward(fwd.gl_of_h, g_fake_l, &grads.gen_l, false);
}

LossComponents evaluate_objective(const CycleModel& model, const nn::Tensor& l, const nn::Tensor& h,
                                  const LossWeights& weights, ModelGradients* grads) {
    const CycleForward fwd = forward_cycle(model, l, h, weights);
    if (grads) {
        *grads = ModelGradients::zeros(model);
        const BackpropRequest req{weights.lambda_gan, weights.lambda_gan, weights.lambda_gan, weights.lambda_cycle,
                                  true, true};
        backprop_cycle(model, fwd, req, *grads);
    }
    return fwd.losses;
}

// ---- training -------------------------------------------------------------------

namespace {

void scale(nn::Gradients& g, double s) {
    for (auto& p : g)
        for (double& v : p) v *= s;
}

std::string diagnostic_payload(const Checkpoint& state, const LossComponents& c) {
    nlohmann::json j{{"step", state.step}, {"epoch", state.epoch},   {"L_G", c.gen},
                     {"L_D", c.disc},      {"L_cycle", c.cycle},     {"total", c.total}};
    // json cannot represent NaN/inf; fall back to strings.
    for (auto key : {"L_G", "L_D", "L_cycle", "total"}) {
        const double v = j[key].get<double>();
        if (!std::isfinite(v)) j[key] = std::to_string(v);
    }
    return j.dump();
}

}  // namespace

void apply_generator_update(Checkpoint& state, const std::vector<CycleForward>& batch) {
    const auto& cfg = state.config;
    ModelGradients g = ModelGradients::zeros(state.model);
    const BackpropRequest req{cfg.lambda_gan, 0.0, 0.0, cfg.lambda_cycle, true, false};
    for (const auto& fwd : batch) backprop_cycle(state.model, fwd, req, g);
    const double inv = 1.0 / static_cast<double>(batch.size());
    scale(g.gen_h, inv);
    scale(g.gen_l, inv);
    state.opt_gen_h.step(state.model.gen_h.parameters(), g.gen_h, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                         cfg.adam_epsilon);
    state.opt_gen_l.step(state.model.gen_l.parameters(), g.gen_l, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                         cfg.adam_epsilon);
}

void apply_discriminator_update(Checkpoint& state, const std::vector<CycleForward>& batch) {
    const auto& cfg = state.config;
    ModelGradients g = ModelGradients::zeros(state.model);
    const BackpropRequest req{0.0, cfg.lambda_gan, cfg.lambda_gan, 0.0, false, true};
    for (const auto& fwd : batch) backprop_cycle(state.model, fwd, req, g);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t d = 0; d < g.disc.size(); ++d) {
        scale(g.disc[d], inv);
        state.opt_disc[d].step(state.model.discriminators[d].parameters(), g.disc[d],
                               cfg.learning_rate * cfg.discriminator_lr_scale,
                               cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
    }
}

LossRecord train_step(Checkpoint& state, const std::vector<std::pair<BScan, BScan>>& batch) {
    if (batch.empty()) throw DataError("empty training batch");
    std::vector<CycleForward> forwards;
    forwards.reserve(batch.size());
    LossComponents mean;
    for (const auto& [l, h] : batch) {
        forwards.push_back(
            forward_cycle(state.model, to_tensor(l.pixels()), to_tensor(h.pixels()), state.config.weights()));
        const auto& c = forwards.back().losses;
        mean.gen += c.gen;
        mean.disc += c.disc;
        mean.cycle += c.cycle;
        mean.total += c.total;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    mean.gen *= inv;
    mean.disc *= inv;
    mean.cycle *= inv;
    mean.total *= inv;
    if (!std::isfinite(mean.total) || !std::isfinite(mean.gen) || !std::isfinite(mean.disc) ||
        !std::isfinite(mean.cycle))
        throw TrainingError("non-finite loss", diagnostic_payload(state, mean));

    // The discriminator phase reuses the forward traces: discriminator weights
    // are untouched by the generator phase and translations are constants there.
    apply_generator_update(state, forwards);
    apply_discriminator_update(state, forwards);

    LossRecord rec{state.step, state.epoch, mean.gen, mean.disc, mean.cycle, mean.total};
    ++state.step;
    state.loss_history.push_back(rec);
    return rec;
}

LossRecord train_step(Checkpoint& state, const BScan& l, const BScan& h) {
    return train_step(state, std::vector<std::pair<BScan, BScan>>{{l, h}});
}

namespace {

void copy_params(nn::ParameterSet& dst, const nn::ParameterSet& src, const char* what) {
    if (dst.size() != src.size()) throw ConfigError(std::string("pre-trained ") + what + " does not match the spec");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].value.size() != src[i].value.size())
            throw ConfigError(std::string("pre-trained ") + what + " does not match the spec");
        dst[i].value = src[i].value;
    }
}

}  // namespace

std::vector<Checkpoint> train(UnpairedIterator& data, const TrainConfig& cfg, const TrainOptions& options) {
    cfg.validate();
    Checkpoint state = options.resume ? *options.resume : initialize_training(cfg);
    if (options.resume) {
        state.config.epochs = cfg.epochs;
        state.config.checkpoint_every = cfg.checkpoint_every;
        for (long i = 0; i < static_cast<long>(state.epoch) * static_cast<long>(data.epoch_length()); ++i)
            (void)data.next();
    } else {
        if (options.init_gen_h) copy_params(state.model.gen_h.parameters(), *options.init_gen_h, "generator");
        if (options.init_gen_l) copy_params(state.model.gen_l.parameters(), *options.init_gen_l, "generator");
        if (options.init_disc)
            for (auto& d : state.model.discriminators) copy_params(d.parameters(), *options.init_disc, "discriminator");
    }

    std::vector<Checkpoint> out;
    auto emit = [&] {
        if (options.on_checkpoint) options.on_checkpoint(state);
        if (options.keep_checkpoints) out.push_back(state);
    };
    if (!options.resume) emit();

    const std::size_t steps_per_epoch =
        (data.epoch_length() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
    while (state.epoch < cfg.epochs) {
        std::size_t consumed = 0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            std::vector<std::pair<BScan, BScan>> batch;
            while (batch.size() < static_cast<std::size_t>(cfg.batch_size) && consumed < data.epoch_length()) {
                auto [hn, ln] = data.next();
                batch.emplace_back(ln, hn);
                ++consumed;
            }
            const LossRecord rec = train_step(state, batch);
            if (options.on_step) options.on_step(rec);
        }
        ++state.epoch;
        if (state.epoch % cfg.checkpoint_every == 0 || state.epoch == cfg.epochs) emit();
    }
    if (!options.keep_checkpoints) out.push_back(state);
    return out;
}

// ---- pre-training --------------------------------------------------------------

PretrainResult pretrain_generator_autoencoder(Generator& gen, const std::vector<BScan>& images,
                                              const PretrainConfig& cfg) {
    if (images.empty()) throw DataError("autoencoder pre-training needs images");
    if (cfg.epochs < 0 || !(cfg.learning_rate > 0.0)) throw ConfigError("invalid pre-training config");
    std::vector<nn::Tensor> xs;
    for (const auto& img : images) {
        xs.push_back(to_tensor(img.pixels()));
        gen.check_input(xs.back().shape());
    }
    auto mean_loss = [&] {
        double s = 0.0;
        for (const auto& x : xs) s += mean_abs_diff(x.values(), gen.forward(x).values());
        return s / static_cast<double>(xs.size());
    };

    PretrainResult result;
    result.initial_loss = mean_loss();
    AdamState opt(gen.parameters());
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        for (auto i : order) {
            NetworkTrace trace;
            const nn::Tensor y = gen.forward(xs[i], &trace);
            sum += mean_abs_diff(xs[i].values(), y.values());
            nn::Gradients g = nn::zero_gradients(gen.parameters());
            gen.backward(trace, mean_abs_grad(xs[i], y), &g, false);
            opt.step(gen.parameters(), g, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, 1e-8);
        }
        result.epoch_losses.push_back(sum / static_cast<double>(xs.size()));
    }
    return result;
}

PretrainResult pretrain_discriminator_on_labels(Discriminator& disc, const std::vector<BScan>& images,
                                                const std::vector<int>& labels, const PretrainConfig& cfg) {
    if (images.empty() || images.size() != labels.size()) throw DataError("classifier pre-training needs labelled images");
    if (cfg.epochs < 0 || !(cfg.learning_rate > 0.0)) throw ConfigError("invalid pre-training config");
    const int n = disc.spec().n_classes;
    std::vector<nn::Tensor> xs;
    for (const auto& img : images) xs.push_back(to_tensor(img.pixels()));
    for (int lab : labels)
        if (lab != 0 && lab != 1) throw DataError("domain labels must be 0 (HN) or 1 (LN)");

    auto mean_loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) s += cross_entropy(disc.forward(xs[i]), one_hot(n, labels[i]));
        return s / static_cast<double>(xs.size());
    };
    PretrainResult result;
    result.initial_loss = mean_loss();
    AdamState opt(disc.parameters());
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        for (auto i : order) {
            NetworkTrace trace;
            const auto prob = disc.forward(xs[i], &trace);
            const auto target = one_hot(n, labels[i]);
            sum += cross_entropy(prob, target);
            nn::Gradients g = nn::zero_gradients(disc.parameters());
            disc.backward(trace, cross_entropy_logit_grad(prob, target), &g, false);
            opt.step(disc.parameters(), g, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, 1e-8);
        }
        result.epoch_losses.push_back(sum / static_cast<double>(xs.size()));
    }
    return result;
}

PretrainResult pretrain_discriminator_classifier(Discriminator& disc, const std::vector<BScan>& hn_set,
                                                 const std::vector<BScan>& ln_set, const PretrainConfig& cfg) {
    std::vector<BScan> images;
    std::vector<int> labels;
    for (const auto& s : hn_set) {
        images.push_back(s);
        labels.push_back(0);
    }
    for (const auto& s : ln_set) {
        images.push_back(s);
        labels.push_back(1);
    }
    return pretrain_discriminator_on_labels(disc, images, labels, cfg);
}

int classify_domain(const Discriminator& disc, const Image& img) {
    const auto p = disc.forward(to_tensor(img));
    return p[1] > p[0] ? 1 : 0;
}

double domain_accuracy(const Discriminator& disc, const std::vector<BScan>& images, const std::vector<int>& labels) {
    if (images.empty() || images.size() != labels.size()) throw DataError("accuracy needs labelled images");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (classify_domain(disc, images[i].pixels()) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(images.size());
}

// ---- inference -------------------------------------------------------------------

BScan denoise(const Checkpoint& ckpt, const BScan& img) {
    const nn::Tensor y = ckpt.model.gen_l.forward(to_tensor(img.pixels()));
    return BScan(clip01(tensor_to_image(y)), Domain::Generated, img.source_id());
}

ScoreReport discriminator_score_report(const Checkpoint& ckpt, const std::vector<BScan>& hn_set,
                                       const std::vector<BScan>& ln_set) {
    if (hn_set.empty() || ln_set.empty()) throw DataError("score report needs HN and LN images");
    ScoreReport r;
    r.mode = ckpt.model.mode;
    const auto& discs = ckpt.model.discriminators;
    const bool shared = r.mode == TrainMode::SharedDiscriminator;
    r.columns = shared ? std::vector<std::string>{"real_hn", "real_ln", "fake"}
                       : std::vector<std::string>{"d_hn", "d_ln"};
    for (const auto* set : {&hn_set, &ln_set}) {
        std::vector<double> row(r.columns.size(), 0.0);
        for (const auto& img : *set) {
            const nn::Tensor x = to_tensor(img.pixels());
            if (shared) {
                const auto p = discs[0].forward(x);
                for (std::size_t k = 0; k < row.size(); ++k) row[k] += p[k];
            } else {
                for (std::size_t d = 0; d < discs.size(); ++d) row[d] += discs[d].forward(x)[0];
            }
        }
        for (double& v : row) v /= static_cast<double>(set->size());
        r.rows.push_back(std::move(row));
    }
    return r;
}

void ScoreReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(10);
    out << "input_domain";
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << row_labels[r];
        for (double v : rows[r]) out << ',' << v;
        out << '\n';
    }
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(17);
    out << "step,epoch,L_G,L_D,L_cycle,total\n";
    for (const auto& r : history)
        out << r.step << ',' << r.epoch << ',' << r.gen << ',' << r.disc << ',' << r.cycle << ',' << r.total << '\n';
}

}  // namespace hdcg
