#include "hdcg/losses.hpp"

#include <cmath>

#include "hdcg/errors.hpp"

namespace hdcg {

void check_probability(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw DataError("probability vector has a negative or NaN entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("probability vector does not sum to 1");
}

double cross_entropy(std::span<const double> prob, std::span<const double> target) {
    if (prob.size() != target.size()) throw ShapeError("cross-entropy size mismatch");
    double loss = 0.0;
    for (std::size_t j = 0; j < prob.size(); ++j)
        if (target[j] != 0.0) loss -= target[j] * std::log(prob[j] + kLogEpsilon);
    return loss;
}

std::vector<double> cross_entropy_logit_grad(std::span<const double> prob, std::span<const double> target) {
    // dL/dz_k = -sum_j t_j / (p_j + eps) * p_j (delta_jk - p_k)
    const std::size_t n = prob.size();
    std::vector<double> g(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (target[j] == 0.0) continue;
        const double a = target[j] * prob[j] / (prob[j] + kLogEpsilon);
        for (std::size_t k = 0; k < n; ++k) g[k] -= a * ((j == k ? 1.0 : 0.0) - prob[k]);
    }
    return g;
}

double generator_loss(std::span<const double> d_fake_h, std::span<const double> d_fake_l,
                      const ClassTargets& targets) {
    check_probability(d_fake_h);
    check_probability(d_fake_l);
    return cross_entropy(d_fake_h, targets.t_h) + cross_entropy(d_fake_l, targets.t_l);
}

double discriminator_loss(std::span<const double> d_fake_h, std::span<const double> d_fake_l,
                          std::span<const double> d_real_h, std::span<const double> d_real_l,
                          const ClassTargets& targets) {
    for (auto p : {d_fake_h, d_fake_l, d_real_h, d_real_l}) check_probability(p);
    return cross_entropy(d_fake_h, targets.t_f) + cross_entropy(d_fake_l, targets.t_f) +
           cross_entropy(d_real_h, targets.t_h) + cross_entropy(d_real_l, targets.t_l);
}

double mean_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ShapeError("mean absolute difference needs equal, non-empty inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double cycle_loss(const Image& l, const Image& h, const Image& l_rec, const Image& h_rec) {
    if (!l.same_shape(l_rec) || !h.same_shape(h_rec)) throw ShapeError("cycle loss shape mismatch");
    return mean_abs_diff(l.pixels(), l_rec.pixels()) + mean_abs_diff(h.pixels(), h_rec.pixels());
}

double cycle_loss(const BScan& l, const BScan& h, const BScan& l_rec, const BScan& h_rec) {
    return cycle_loss(l.pixels(), h.pixels(), l_rec.pixels(), h_rec.pixels());
}

nn::Tensor mean_abs_grad(const nn::Tensor& x, const nn::Tensor& rec) {
    nn::Tensor g(rec.shape());
    const double inv_n = 1.0 / static_cast<double>(rec.size());
    auto gv = g.values();
    auto xv = x.values();
    auto rv = rec.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
        const double d = rv[i] - xv[i];
        gv[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return g;
}

double total_loss(double gen_loss, double disc_loss, double cyc_loss, const LossWeights& w) {
    return w.lambda_gan * (gen_loss + disc_loss) + w.lambda_cycle * cyc_loss;
}

}  // namespace hdcg
