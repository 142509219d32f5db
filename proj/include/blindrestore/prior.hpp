#pragma once

#include <map>
#include <string>
#include <vector>

#include "blindrestore/schedule.hpp"
#include "blindrestore/tensor.hpp"

namespace blindrestore {

// A symbolic condition selects a subset of prior components, optionally with
// its own renormalized weights. Stands in for a prompt embedding.
struct Condition {
    std::string label;
    std::vector<int> components;            // non-empty, indices into the prior
    std::vector<double> weight_overrides;   // empty, or same length as components, sums to 1
};

// Isotropic Gaussian mixture over the latent domain with a shared per
// component standard deviation. The time-t marginal under forward noising is
//   sum_k w_k N(sqrt(ab_t) mu_k, (ab_t s^2 + 1 - ab_t) I)
// which gives closed-form scores at every step.
struct GmmPrior {
    std::vector<Tensor> means;
    double comp_std = 0.2;
    std::vector<double> weights;
    std::map<std::string, Condition> conditions;  // must include "uncond" over all components

    const Condition& condition(const std::string& label) const;
    const Shape& latent_shape() const { return means.at(0).shape(); }
    void validate() const;

    // condition-restricted weights, renormalized (or the overrides)
    std::vector<double> condition_weights(const Condition& c) const;
};

GmmPrior make_gmm(std::vector<Tensor> means, double comp_std, std::vector<double> weights);

// Exact conditional noise prediction eps = -sqrt(1-ab_t) * grad log p_t(z).
// Responsibilities are evaluated with a max-shifted log-sum-exp.
NoisePrediction exact_epsilon(const GmmPrior& prior, const Latent& z_t, int t,
                              const Condition& cond, const NoiseSchedule& s);

// eps_hat = eps_neg + gamma * (eps_pos - eps_neg)
NoisePrediction cfg_combine(const NoisePrediction& eps_neg, const NoisePrediction& eps_pos,
                            double gamma);

// z0|t = (z_t - sqrt(1-ab_t) eps_hat) / sqrt(ab_t)
Latent estimate_x0(const Latent& z_t, const NoisePrediction& eps_hat, int t,
                   const NoiseSchedule& s);

// log density of the time-t marginal restricted to a condition; used by
// finite-difference checks
double log_marginal(const GmmPrior& prior, const Latent& z_t, int t, const Condition& cond,
                    const NoiseSchedule& s);

}  // namespace blindrestore
