#pragma once

#include <cstdint>
#include <string>

#include "blindrestore/sampler.hpp"

namespace blindrestore {

enum class CtSchedule { Flat, SqrtAlphaPrev };
enum class InitMode { FixedParams, BroadGaussian, Dirac, RandomParams, OperatorInit };
enum class RefineInput { Post, Pre };
enum class NoiseDirection { Cfg, Uncond };

struct OperatorInitConfig {
    int iters = 8;   // outer rounds
    int batch = 4;   // trajectories per round
    int steps = 60;  // reverse steps per trajectory
};

struct SolverConfig {
    int Ts = 150;
    int M = 4;               // time-travel repetitions
    int update_period = 5;   // operator refresh cadence in outer steps
    int K = 50;              // optimizer steps per refinement round
    double gamma = 2.0;
    double ct = 0.5;
    CtSchedule ct_schedule = CtSchedule::SqrtAlphaPrev;
    double lambda_z = 0.0;
    double lambda_phi = 2.0;
    bool use_reg = false;            // gradient-difference regularizer on the guidance loss
    bool refine = true;
    // the pre-guidance estimate avoids feeding the operator its own guidance
    // fingerprint back during fitting
    RefineInput refine_input = RefineInput::Pre;
    bool project_kernel_after_round = true;
    // which prediction multiplies the noise-direction term of the reverse
    // update; the guided combination by default, the unconditional prediction
    // as the literal alternative
    NoiseDirection ddim_noise = NoiseDirection::Cfg;
    InitMode init = InitMode::BroadGaussian;
    double init_gaussian_std = 2.5;
    OperatorInitConfig opinit;
    grad::AdamConfig adam;
    std::string cond_pos = "sharp";
    std::string cond_neg = "uncond";
    uint64_t seed = 0;
    bool collect_trace = true;

    void validate(int T) const;
    double ct_at(double alpha_bar_prev) const {
        return ct_schedule == CtSchedule::Flat ? ct : ct * std::sqrt(alpha_bar_prev);
    }
};

struct SolveResult {
    Image x0;
    Tensor phi_hat;
    SamplerTrace trace;
    uint64_t rng_draws = 0;
    double final_guidance_loss = 0.0;
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Fast batched operator fitting: each round draws a fresh batch of noised
// encodings, runs a short guided reverse pass (guidance off in round 1), then
// takes K optimizer steps on the batch-averaged fitting loss. Returns the
// fitted parameters. encode_ref, when given, is the latent-shaped image whose
// encoding seeds the reverse passes (used when the measurement domain differs
// from the image domain).
Tensor init_operator(const Measurement& m, const GmmPrior& prior, const Codec& codec,
                     const SurrogateOperator& surrogate, const SolverConfig& cfg,
                     const NoiseSchedule& sched, const Tensor& phi0,
                     const Image* encode_ref = nullptr);

// K optimizer steps on the operator fitting loss with z0 held fixed. A
// non-finite gradient aborts the round and returns the incoming parameters.
Tensor refine_operator(const Tensor& phi, const Latent& z0t, const Image& y,
                       const SurrogateOperator& surrogate, const Codec& codec, int K,
                       grad::AdamState& adam, double lambda_phi, bool project);

// Full solve: noised-measurement initialization, guided reverse process with
// time-traveling, periodic operator refinement, decode of the final latent.
// fixed_phi supplies the parameters for InitMode::FixedParams.
SolveResult solve(const Measurement& m, const GmmPrior& prior, const Codec& codec,
                  const SurrogateOperator& surrogate, const SolverConfig& cfg,
                  const NoiseSchedule& sched, const Tensor* fixed_phi = nullptr,
                  const Image* encode_ref = nullptr);

// initial parameters implied by cfg.init (runs the batched init when asked)
Tensor initial_params(const Measurement& m, const GmmPrior& prior, const Codec& codec,
                      const SurrogateOperator& surrogate, const SolverConfig& cfg,
                      const NoiseSchedule& sched, const Tensor* fixed_phi = nullptr,
                      const Image* encode_ref = nullptr);

}  // namespace blindrestore
