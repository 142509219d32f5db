#include "blindrestore/prior.hpp"

#include <cmath>
#include <stdexcept>

namespace blindrestore {

const Condition& GmmPrior::condition(const std::string& label) const {
    auto it = conditions.find(label);
    if (it == conditions.end()) throw std::invalid_argument("unknown condition '" + label + "'");
    return it->second;
}

void GmmPrior::validate() const {
    if (means.empty()) throw std::invalid_argument("prior needs at least one component");
    if (weights.size() != means.size())
        throw std::invalid_argument("prior weights/means size mismatch");
    if (!(comp_std > 0.0)) throw std::invalid_argument("prior comp_std must be positive");
    double ws = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("prior weights must be nonnegative");
        ws += w;
    }
    if (std::abs(ws - 1.0) > 1e-9) throw std::invalid_argument("prior weights must sum to 1");
    for (const auto& m : means) means[0].check_same(m);
    if (conditions.find("uncond") == conditions.end())
        throw std::invalid_argument("prior must define an 'uncond' condition");
    for (const auto& [label, c] : conditions) {
        if (c.components.empty())
            throw std::invalid_argument("condition '" + label + "' selects no components");
        for (int k : c.components)
            if (k < 0 || k >= (int)means.size())
                throw std::invalid_argument("condition '" + label + "' references missing component");
        if (!c.weight_overrides.empty()) {
            if (c.weight_overrides.size() != c.components.size())
                throw std::invalid_argument("condition '" + label + "' override size mismatch");
            double s = 0.0;
            for (double w : c.weight_overrides) {
                if (w < 0.0) throw std::invalid_argument("condition overrides must be nonnegative");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw std::invalid_argument("condition overrides must sum to 1");
        }
    }
}

std::vector<double> GmmPrior::condition_weights(const Condition& c) const {
    if (!c.weight_overrides.empty()) return c.weight_overrides;
    std::vector<double> w(c.components.size());
    double s = 0.0;
    for (size_t i = 0; i < c.components.size(); ++i) {
        w[i] = weights[c.components[i]];
        s += w[i];
    }
    if (s <= 0.0) throw std::logic_error("condition has zero total weight");
    for (double& x : w) x /= s;
    return w;
}

GmmPrior make_gmm(std::vector<Tensor> means, double comp_std, std::vector<double> weights) {
    GmmPrior p;
    p.means = std::move(means);
    p.comp_std = comp_std;
    if (weights.empty()) weights.assign(p.means.size(), 1.0 / (double)p.means.size());
    p.weights = std::move(weights);
    Condition all;
    all.label = "uncond";
    for (int k = 0; k < (int)p.means.size(); ++k) all.components.push_back(k);
    p.conditions["uncond"] = all;
    p.validate();
    return p;
}

namespace {

// log responsibilities over the condition's components at z_t
std::vector<double> responsibilities(const GmmPrior& prior, const Latent& z, double ab,
                                     const Condition& cond, double* log_norm_out) {
    double s2 = prior.comp_std * prior.comp_std;
    double v = ab * s2 + (1.0 - ab);
    std::vector<double> cw = prior.condition_weights(cond);
    std::vector<double> lg(cond.components.size());
    double mx = -1e300;
    double sqrt_ab = std::sqrt(ab);
    for (size_t i = 0; i < cond.components.size(); ++i) {
        const Tensor& mu = prior.means[cond.components[i]];
        z.check_same(mu);
        double d2 = 0.0;
        for (int64_t j = 0; j < z.numel(); ++j) {
            double d = z[j] - sqrt_ab * mu[j];
            d2 += d * d;
        }
        lg[i] = (cw[i] > 0 ? std::log(cw[i]) : -1e300) - d2 / (2.0 * v);
        if (lg[i] > mx) mx = lg[i];
    }
    double sum = 0.0;
    for (double& l : lg) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (double& l : lg) l /= sum;
    if (log_norm_out) *log_norm_out = mx + std::log(sum);
    return lg;
}

}  // namespace

NoisePrediction exact_epsilon(const GmmPrior& prior, const Latent& z_t, int t,
                              const Condition& cond, const NoiseSchedule& s) {
    if (t < 1 || t > s.T) throw std::out_of_range("exact_epsilon: t outside [1,T]");
    double ab = s.alpha_bar_at(t);
    double s2 = prior.comp_std * prior.comp_std;
    double v = ab * s2 + (1.0 - ab);
    double sqrt_ab = std::sqrt(ab);
    std::vector<double> r = responsibilities(prior, z_t, ab, cond, nullptr);

    // score = sum_k r_k (sqrt(ab) mu_k - z) / v; eps = -sqrt(1-ab) * score
    Tensor eps(z_t.shape());
    double c = std::sqrt(1.0 - ab) / v;
    for (size_t i = 0; i < cond.components.size(); ++i) {
        const Tensor& mu = prior.means[cond.components[i]];
        double w = r[i];
        if (w == 0.0) continue;
        for (int64_t j = 0; j < z_t.numel(); ++j)
            eps[j] += w * c * (z_t[j] - sqrt_ab * mu[j]);
    }
    return eps;
}

NoisePrediction cfg_combine(const NoisePrediction& eps_neg, const NoisePrediction& eps_pos,
                            double gamma) {
    eps_neg.check_same(eps_pos);
    if (!std::isfinite(gamma)) throw std::invalid_argument("cfg_combine: gamma must be finite");
    Tensor out(eps_neg.shape());
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = eps_neg[i] + gamma * (eps_pos[i] - eps_neg[i]);
    return out;
}

Latent estimate_x0(const Latent& z_t, const NoisePrediction& eps_hat, int t,
                   const NoiseSchedule& s) {
    if (t < 1 || t > s.T) throw std::out_of_range("estimate_x0: t outside [1,T]");
    z_t.check_same(eps_hat);
    double ab = s.alpha_bar_at(t);
    double inv = 1.0 / std::sqrt(ab);
    double c = std::sqrt(1.0 - ab);
    Tensor out(z_t.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = (z_t[i] - c * eps_hat[i]) * inv;
    return out;
}

double log_marginal(const GmmPrior& prior, const Latent& z_t, int t, const Condition& cond,
                    const NoiseSchedule& s) {
    double ab = s.alpha_bar_at(t);
    double s2 = prior.comp_std * prior.comp_std;
    double v = ab * s2 + (1.0 - ab);
    double log_norm = 0.0;
    responsibilities(prior, z_t, ab, cond, &log_norm);
    double n = (double)z_t.numel();
    return log_norm - 0.5 * n * std::log(2.0 * 3.14159265358979323846 * v);
}

}  // namespace blindrestore
