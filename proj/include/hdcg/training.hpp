#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hdcg/dataset.hpp"
#include "hdcg/image.hpp"
#include "hdcg/losses.hpp"
#include "hdcg/networks.hpp"

namespace hdcg {

enum class TrainMode { SharedDiscriminator, VanillaTwoDiscriminators };

struct TrainConfig {
    double lambda_gan = 1.0;
    double lambda_cycle = 10.0;
    double learning_rate = 5e-4;
    std::string optimizer = "adam";
    int epochs = 245;
    int batch_size = 1;
    TrainMode mode = TrainMode::SharedDiscriminator;
    std::uint64_t seed = 0;
    int checkpoint_every = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Discriminator step size relative to learning_rate.
    double discriminator_lr_scale = 1.0;
    GeneratorSpec generator{};
    DiscriminatorSpec discriminator{};

    void validate() const;
    LossWeights weights() const { return {lambda_gan, lambda_cycle}; }
    /// Discriminator spec with the class count implied by the mode.
    DiscriminatorSpec discriminator_for_mode() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

/// First and second moment estimates for one parameter set.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const nn::ParameterSet& params);

    void step(nn::ParameterSet& params, const nn::Gradients& grads, double lr, double beta1, double beta2,
              double eps);

    long timestep = 0;
    nn::Gradients m;
    nn::Gradients v;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Two generators plus either one shared three-way discriminator or two
/// per-domain real/fake discriminators.
struct CycleModel {
    TrainMode mode = TrainMode::SharedDiscriminator;
    Generator gen_h;  // low noise -> high noise
    Generator gen_l;  // high noise -> low noise
    std::vector<Discriminator> discriminators;

    static CycleModel create(const TrainConfig& cfg, std::mt19937_64& rng);
};

struct LossRecord {
    long step = 0;
    int epoch = 0;
    double gen = 0.0;
    double disc = 0.0;
    double cycle = 0.0;
    double total = 0.0;

    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct Checkpoint {
    TrainConfig config;
    CycleModel model;
    AdamState opt_gen_h;
    AdamState opt_gen_l;
    std::vector<AdamState> opt_disc;
    int epoch = 0;
    long step = 0;
    std::vector<LossRecord> loss_history;
};

/// Fresh model (weights ~ N(0, 0.02) from cfg.seed) and optimizer state.
Checkpoint initialize_training(const TrainConfig& cfg);

// ---- checkpoint container ---------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& history);

// ---- objective --------------------------------------------------------------

struct LossComponents {
    double gen = 0.0;
    double disc = 0.0;
    double cycle = 0.0;
    double total = 0.0;
};

/// One discriminator evaluation of a real or translated image.
struct Judgment {
    int discriminator = 0;
    bool fake = false;
    NetworkTrace trace;
    std::vector<double> prob;
    std::vector<double> gen_target;   // empty for real images
    std::vector<double> disc_target;
};

/// All activations of one (l, h) pass through both cycles.
struct CycleForward {
    nn::Tensor l;
    nn::Tensor h;
    NetworkTrace gh_of_l;       // G_H(l) = fake_h
    NetworkTrace gl_of_fake_h;  // G_L(fake_h) = rec_l
    NetworkTrace gl_of_h;       // G_L(h) = fake_l
    NetworkTrace gh_of_fake_l;  // G_H(fake_l) = rec_h
    nn::Tensor fake_h;
    nn::Tensor rec_l;
    nn::Tensor fake_l;
    nn::Tensor rec_h;
    std::vector<Judgment> judgments;  // fake_h, fake_l, real_h, real_l
    LossComponents losses;
};

CycleForward forward_cycle(const CycleModel& model, const nn::Tensor& l, const nn::Tensor& h,
                           const LossWeights& weights);

struct ModelGradients {
    nn::Gradients gen_h;
    nn::Gradients gen_l;
    std::vector<nn::Gradients> disc;

    static ModelGradients zeros(const CycleModel& model);
};

/// Coefficients applied to each loss path during backpropagation.
struct BackpropRequest {
    double fake_gen = 0.0;   // generator cross-entropy on translated images
    double fake_disc = 0.0;  // discriminator cross-entropy on translated images
    double real_disc = 0.0;  // discriminator cross-entropy on real images
    double cycle = 0.0;
    bool to_generators = true;
    bool disc_params = true;
};

void backprop_cycle(const CycleModel& model, const CycleForward& fwd, const BackpropRequest& req,
                    ModelGradients& grads);

/// Value of the full objective and, optionally, its exact gradient with
/// respect to every parameter of both generators and the discriminator(s).
LossComponents evaluate_objective(const CycleModel& model, const nn::Tensor& l, const nn::Tensor& h,
                                  const LossWeights& weights, ModelGradients* grads = nullptr);

// ---- training ---------------------------------------------------------------

/// Generator phase of a step: minimizes lambda_gan*L_G + lambda_cycle*L_cycle,
/// discriminators untouched.
void apply_generator_update(Checkpoint& state, const std::vector<CycleForward>& batch);
/// Discriminator phase: minimizes lambda_gan*L_D with translations held fixed.
void apply_discriminator_update(Checkpoint& state, const std::vector<CycleForward>& batch);

/// One alternating generator/discriminator update on a batch of unpaired
/// (l, h) images. Appends to and returns the loss history entry.
LossRecord train_step(Checkpoint& state, const std::vector<std::pair<BScan, BScan>>& batch);
LossRecord train_step(Checkpoint& state, const BScan& l, const BScan& h);

struct TrainOptions {
    /// Continue from this state; the iterator must be fresh (it is advanced
    /// past the already-consumed epochs).
    std::optional<Checkpoint> resume;
    /// Pre-trained weights copied in before the first step.
    std::optional<nn::ParameterSet> init_gen_h;
    std::optional<nn::ParameterSet> init_gen_l;
    std::optional<nn::ParameterSet> init_disc;
    std::function<void(const Checkpoint&)> on_checkpoint;
    std::function<void(const LossRecord&)> on_step;
    bool keep_checkpoints = true;
};

/// Runs cfg.epochs epochs. Returns the initial state followed by a snapshot
/// every cfg.checkpoint_every epochs and after the last epoch.
std::vector<Checkpoint> train(UnpairedIterator& data, const TrainConfig& cfg, const TrainOptions& options = {});

// ---- pre-training -----------------------------------------------------------

struct PretrainConfig {
    int epochs = 20;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
};

struct PretrainResult {
    double initial_loss = 0.0;  // mean loss over the set before any update
    std::vector<double> epoch_losses;
};

/// Trains `gen` to reproduce its input under mean absolute error.
PretrainResult pretrain_generator_autoencoder(Generator& gen, const std::vector<BScan>& images,
                                              const PretrainConfig& cfg);

/// Supervised real-HN vs real-LN classification; the fake class is unused.
PretrainResult pretrain_discriminator_classifier(Discriminator& disc, const std::vector<BScan>& hn_set,
                                                 const std::vector<BScan>& ln_set, const PretrainConfig& cfg);

/// Same as above with explicit labels (0 = HN, 1 = LN).
PretrainResult pretrain_discriminator_on_labels(Discriminator& disc, const std::vector<BScan>& images,
                                                const std::vector<int>& labels, const PretrainConfig& cfg);

/// 0 for HN, 1 for LN: the larger of the two real-class probabilities.
int classify_domain(const Discriminator& disc, const Image& img);
double domain_accuracy(const Discriminator& disc, const std::vector<BScan>& images, const std::vector<int>& labels);

// ---- inference ----------------------------------------------------------------

/// Applies the HN -> LN generator once and clips to [0, 1].
BScan denoise(const Checkpoint& ckpt, const BScan& img);

/// Mean discriminator scores per real input domain. Shared mode: mean class
/// probabilities (columns real_hn, real_ln, fake). Vanilla mode: mean "real"
/// probability of each per-domain discriminator (columns d_hn, d_ln).
struct ScoreReport {
    TrainMode mode = TrainMode::SharedDiscriminator;
    std::vector<std::string> columns;
    std::vector<std::string> row_labels{"hn", "ln"};
    std::vector<std::vector<double>> rows;

    void write_csv(const std::filesystem::path& path) const;
};

ScoreReport discriminator_score_report(const Checkpoint& ckpt, const std::vector<BScan>& hn_set,
                                       const std::vector<BScan>& ln_set);

}  // namespace hdcg
