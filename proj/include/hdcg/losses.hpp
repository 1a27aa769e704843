#pragma once

#include <array>
#include <span>
#include <vector>

#include "hdcg/image.hpp"
#include "hdcg/nn/tensor.hpp"

namespace hdcg {

/// Guard inside every log of a cross-entropy term.
inline constexpr double kLogEpsilon = 1e-12;

/// One-hot class targets of the shared discriminator: real HN, real LN, fake.
struct ClassTargets {
    std::array<double, 3> t_h{1.0, 0.0, 0.0};
    std::array<double, 3> t_l{0.0, 1.0, 0.0};
    std::array<double, 3> t_f{0.0, 0.0, 1.0};

    static constexpr int kRealHighNoise = 0;
    static constexpr int kRealLowNoise = 1;
    static constexpr int kFake = 2;
};

/// Throws DataError unless `p` is non-negative and sums to 1 (to 1e-9).
void check_probability(std::span<const double> p);

/// -sum_j t_j log(p_j + eps).
double cross_entropy(std::span<const double> prob, std::span<const double> target);

/// Gradient of cross_entropy(softmax(z), t) with respect to the logits z.
std::vector<double> cross_entropy_logit_grad(std::span<const double> prob, std::span<const double> target);

/// Adversarial generator objective: translated images scored against the real
/// class of their target domain.
double generator_loss(std::span<const double> d_fake_h, std::span<const double> d_fake_l,
                      const ClassTargets& targets = {});

/// Both translations against the fake class, real HN against t_h, real LN against t_l.
double discriminator_loss(std::span<const double> d_fake_h, std::span<const double> d_fake_l,
                          std::span<const double> d_real_h, std::span<const double> d_real_l,
                          const ClassTargets& targets = {});

/// Mean absolute difference.
double mean_abs_diff(std::span<const double> a, std::span<const double> b);

/// |l - l_rec|_1 + |h - h_rec|_1 with per-pixel mean norms.
double cycle_loss(const Image& l, const Image& h, const Image& l_rec, const Image& h_rec);
double cycle_loss(const BScan& l, const BScan& h, const BScan& l_rec, const BScan& h_rec);

/// d/d(rec) of mean|x - rec|: sign(rec - x) / n.
nn::Tensor mean_abs_grad(const nn::Tensor& x, const nn::Tensor& rec);

struct LossWeights {
    double lambda_gan = 1.0;
    double lambda_cycle = 10.0;
};

/// lambda_gan * (gen + disc) + lambda_cycle * cyc.
double total_loss(double gen_loss, double disc_loss, double cyc_loss, const LossWeights& w);

}  // namespace hdcg
