#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blindrestore/codec.hpp"
#include "blindrestore/operators.hpp"
#include "blindrestore/prior.hpp"
#include "blindrestore/rng.hpp"
#include "blindrestore/schedule.hpp"

namespace blindrestore {

// Differentiable image-pair penalty added to the guidance loss. The shipped
// implementation penalizes mismatched forward differences against the
// measurement.
class Regularizer {
public:
    virtual ~Regularizer() = default;
    virtual grad::Var build(grad::Tape& tape, grad::Var image, const Image& y) const = 0;
};

class GradientDifferenceReg : public Regularizer {
public:
    grad::Var build(grad::Tape& tape, grad::Var image, const Image& y) const override {
        return tape.grad_diff_penalty(image, y);
    }
};

struct StepTraceRow {
    int t = 0;
    int rep = 0;           // 1-based repetition index within the outer step
    bool guided = false;
    double guidance_loss = 0.0;
    double grad_norm = 0.0;
    uint64_t draws = 0;    // rng draws consumed so far
};

struct SamplerTrace {
    std::vector<StepTraceRow> rows;
    std::string to_csv() const;
    // every outer step must carry exactly M rows, floor(M/2) of them guided
    void check_guidance_parity(int M) const;
};

// z_Ts = sqrt(ab_Ts) E(y) + sqrt(1-ab_Ts) eps, one tensor draw
Latent sdedit_init(const Image& y, const Codec& codec, int Ts, const NoiseSchedule& s, Rng& rng);

// eps_neg/eps_pos through the exact prior, then the gamma combination
NoisePrediction guided_eps(const GmmPrior& prior, const Latent& z_t, int t,
                           const Condition& cond_pos, const Condition& cond_neg, double gamma,
                           const NoiseSchedule& s);

// one gradient step on z0|t through decode and the surrogate; phi stays fixed
Latent mpgd_update(const Latent& z0t, const Image& y, const SurrogateOperator& surrogate,
                   const Tensor& phi, const Codec& codec, double ct, const Regularizer* reg,
                   double lambda_z, double* loss_out = nullptr, double* grad_norm_out = nullptr);

// z_{t-1} = sqrt(ab_{t-1}) z0t + sqrt(1-ab_{t-1}-sigma_t^2) eps_hat + sigma_t eps.
// Consumes one tensor draw even when sigma_t is zero so the stream layout
// does not depend on eta.
Latent ddim_step(const Latent& z_t, const Latent& z0t, const NoisePrediction& eps_hat, int t,
                 const NoiseSchedule& s, Rng& rng);

// z_t = sqrt(ab_t/ab_{t-1}) z_{t-1} + sqrt(1-ab_t/ab_{t-1}) eps'; one draw
Latent time_travel(const Latent& z_prev, int t, const NoiseSchedule& s, Rng& rng);

}  // namespace blindrestore
