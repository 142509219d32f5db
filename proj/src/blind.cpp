#include "blindrestore/blind.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace blindrestore {

namespace {

uint64_t fnv1a(const Tensor& t) {
    uint64_t h = 1469598103934665603ULL;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
    size_t n = (size_t)t.numel() * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

// parameter gradient of ||y - A(D(z0))||^2 + lambda_phi ||phi||_1
Tensor phi_gradient(const Tensor& phi, const std::vector<const Latent*>& z0s, const Image& y,
                    const SurrogateOperator& surrogate, const Codec& codec, double lambda_phi,
                    double* loss_out) {
    grad::Tape tape;
    grad::Var p = tape.leaf(phi);
    grad::Var loss = -1;
    for (const Latent* z0 : z0s) {
        grad::Var z = tape.leaf(*z0);
        grad::Var img = tape.decode(z, codec);
        grad::Var pred = surrogate.build(tape, p, img);
        grad::Var resid = tape.sub(pred, tape.leaf(y));
        grad::Var term = tape.sum_squares(resid);
        loss = loss < 0 ? term : tape.add(loss, term);
    }
    if (z0s.size() > 1) loss = tape.scale(loss, 1.0 / (double)z0s.size());
    if (lambda_phi != 0.0) loss = tape.add(loss, tape.scale(tape.sum_abs(p), lambda_phi));
    if (loss_out) *loss_out = tape.val(loss).item();
    return tape.grad(loss, {p})[0];
}

}  // namespace

void SolverConfig::validate(int T) const {
    if (Ts < 1 || Ts > T) throw std::invalid_argument("config: Ts outside [1,T]");
    if (M < 1) throw std::invalid_argument("config: M must be >= 1");
    if (update_period < 1) throw std::invalid_argument("config: update_period must be >= 1");
    if (K < 1) throw std::invalid_argument("config: K must be >= 1");
    if (opinit.iters < 1 || opinit.batch < 1 || opinit.steps < 1)
        throw std::invalid_argument("config: operator-init counts must be >= 1");
    if (opinit.steps > T) throw std::invalid_argument("config: operator-init steps exceed T");
    if (ct < 0.0) throw std::invalid_argument("config: ct must be >= 0");
    if (!(gamma == gamma) || !std::isfinite(gamma))
        throw std::invalid_argument("config: gamma must be finite");
}

Tensor refine_operator(const Tensor& phi, const Latent& z0t, const Image& y,
                       const SurrogateOperator& surrogate, const Codec& codec, int K,
                       grad::AdamState& adam, double lambda_phi, bool project) {
    if (K < 1) throw std::invalid_argument("refine_operator: K must be >= 1");
    Tensor params = phi;
    std::vector<const Latent*> z0s = {&z0t};
    for (int k = 0; k < K; ++k) {
        Tensor g = phi_gradient(params, z0s, y, surrogate, codec, lambda_phi, nullptr);
        if (!all_finite(g)) return phi;  // keep the pre-round parameters
        grad::adam_step(adam, params, g);
    }
    if (project && surrogate.family() == SurrogateFamily::Kernel)
        params = project_kernel(params);
    return params;
}

Tensor init_operator(const Measurement& m, const GmmPrior& prior, const Codec& codec,
                     const SurrogateOperator& surrogate, const SolverConfig& cfg,
                     const NoiseSchedule& sched, const Tensor& phi0, const Image* encode_ref) {
    cfg.validate(sched.T);
    surrogate.check_params(phi0);
    const Image& enc = encode_ref ? *encode_ref : m.y;
    const Condition& cpos = prior.condition(cfg.cond_pos);
    const Condition& cneg = prior.condition(cfg.cond_neg);
    const int Tj = cfg.opinit.steps;
    const int N = cfg.opinit.batch;

    Tensor phi = phi0;
    grad::AdamState adam({phi.numel()}, cfg.adam);
    for (int round = 1; round <= cfg.opinit.iters; ++round) {
        std::vector<Latent> z0_final(N);
        for (int i = 0; i < N; ++i) {
            // one stream per trajectory so batches could run concurrently
            Rng rng = Rng::child(cfg.seed, (uint64_t)(round - 1) * N + i + 1);
            Latent z = sdedit_init(enc, codec, Tj, sched, rng);
            Latent z0;
            for (int t = Tj; t >= 1; --t) {
                NoisePrediction eps_hat = guided_eps(prior, z, t, cpos, cneg, cfg.gamma, sched);
                z0 = estimate_x0(z, eps_hat, t, sched);
                if (round != 1) {
                    double ct = cfg.ct_at(sched.alpha_bar_at(t - 1));
                    GradientDifferenceReg reg;
                    z0 = mpgd_update(z0, m.y, surrogate, phi, codec, ct,
                                     cfg.use_reg ? &reg : nullptr, cfg.lambda_z);
                }
                z = ddim_step(z, z0, eps_hat, t, sched, rng);
            }
            z0_final[i] = std::move(z0);
        }
        std::vector<const Latent*> ptrs;
        for (const Latent& z0 : z0_final) ptrs.push_back(&z0);
        double loss = 0.0;
        for (int k = 0; k < cfg.K; ++k) {
            Tensor g = phi_gradient(phi, ptrs, m.y, surrogate, codec, cfg.lambda_phi, &loss);
            if (!all_finite(g) || !std::isfinite(loss))
                throw SolverError("operator init: non-finite fitting loss in round " +
                                  std::to_string(round));
            grad::adam_step(adam, phi, g);
        }
        if (!std::isfinite(loss))
            throw SolverError("operator init: non-finite loss after round " + std::to_string(round));
    }
    return phi;
}

Tensor initial_params(const Measurement& m, const GmmPrior& prior, const Codec& codec,
                      const SurrogateOperator& surrogate, const SolverConfig& cfg,
                      const NoiseSchedule& sched, const Tensor* fixed_phi,
                      const Image* encode_ref) {
    switch (cfg.init) {
        case InitMode::FixedParams:
            if (!fixed_phi)
                throw std::invalid_argument("initial_params: FixedParams needs explicit parameters");
            return *fixed_phi;
        case InitMode::BroadGaussian:
            return surrogate.init_gaussian(cfg.init_gaussian_std);
        case InitMode::Dirac:
            return surrogate.init_dirac();
        case InitMode::RandomParams:
            return surrogate.init_random(Rng::splitmix64(cfg.seed ^ 0x5EEDFACEULL));
        case InitMode::OperatorInit: {
            Tensor phi0 = surrogate.init_random(Rng::splitmix64(cfg.seed ^ 0x5EEDFACEULL));
            return init_operator(m, prior, codec, surrogate, cfg, sched, phi0, encode_ref);
        }
    }
    throw std::logic_error("unreachable");
}

SolveResult solve(const Measurement& m, const GmmPrior& prior, const Codec& codec,
                  const SurrogateOperator& surrogate, const SolverConfig& cfg,
                  const NoiseSchedule& sched, const Tensor* fixed_phi, const Image* encode_ref) {
    cfg.validate(sched.T);
    const Condition& cpos = prior.condition(cfg.cond_pos);
    const Condition& cneg = prior.condition(cfg.cond_neg);
    const Condition& cuncond = prior.condition("uncond");

    Tensor phi = initial_params(m, prior, codec, surrogate, cfg, sched, fixed_phi, encode_ref);
    surrogate.check_params(phi);

    Rng rng(cfg.seed);
    Latent z = sdedit_init(encode_ref ? *encode_ref : m.y, codec, cfg.Ts, sched, rng);

    grad::AdamState adam({phi.numel()}, cfg.adam);
    GradientDifferenceReg reg;
    SolveResult res;
    int loss_up_streak = 0;
    double prev_round_loss = 0.0;
    bool have_round_loss = false;

    Latent z_prev, z0, z0_pre;
    for (int t = cfg.Ts; t >= 1; --t) {
        double ab_prev = sched.alpha_bar_at(t - 1);
        double ct = cfg.ct_at(ab_prev);
        for (int j = 1; j <= cfg.M; ++j) {
            NoisePrediction eps_hat = guided_eps(prior, z, t, cpos, cneg, cfg.gamma, sched);
            z0 = estimate_x0(z, eps_hat, t, sched);
            z0_pre = z0;
            StepTraceRow row;
            row.t = t;
            row.rep = j;
            if (j % 2 == 0) {
                uint64_t phi_hash = fnv1a(phi);
                z0 = mpgd_update(z0, m.y, surrogate, phi, codec, ct,
                                 cfg.use_reg ? &reg : nullptr, cfg.lambda_z, &row.guidance_loss,
                                 &row.grad_norm);
                row.guided = true;
                if (fnv1a(phi) != phi_hash)
                    throw SolverError("guidance step mutated operator parameters");
                res.final_guidance_loss = row.guidance_loss;
            }
            if (!all_finite(z0))
                throw SolverError("non-finite clean estimate at t=" + std::to_string(t) +
                                  " rep=" + std::to_string(j) + "\n" + res.trace.to_csv());
            const NoisePrediction& dir =
                cfg.ddim_noise == NoiseDirection::Cfg
                    ? eps_hat
                    : exact_epsilon(prior, z, t, cuncond, sched);
            z_prev = ddim_step(z, z0, dir, t, sched, rng);
            z = time_travel(z_prev, t, sched, rng);
            row.draws = rng.draws_consumed();
            if (cfg.collect_trace) res.trace.rows.push_back(row);
        }
        z = z_prev;

        if (cfg.refine && t % cfg.update_period == 0) {
            const Latent& zin = cfg.refine_input == RefineInput::Post ? z0 : z0_pre;
            uint64_t z0_hash = fnv1a(zin);
            phi = refine_operator(phi, zin, m.y, surrogate, codec, cfg.K, adam, cfg.lambda_phi,
                                  cfg.project_kernel_after_round);
            if (fnv1a(zin) != z0_hash)
                throw SolverError("refinement round mutated the clean estimate");
            double round_loss =
                operator_loss(surrogate, phi, zin, codec, m.y, cfg.lambda_phi);
            if (!std::isfinite(round_loss))
                throw SolverError("non-finite operator loss after refinement at t=" +
                                  std::to_string(t));
            if (std::getenv("BLINDRESTORE_DEBUG_REFINE"))
                std::fprintf(stderr, "refine t=%d loss=%.5g lr=%.3g\n", t, round_loss,
                             adam.cfg.lr);
            // back-to-back loss increases shrink the refinement step size
            if (have_round_loss && round_loss > prev_round_loss) {
                if (++loss_up_streak >= 3) {
                    adam.cfg.lr *= 0.5;
                    loss_up_streak = 0;
                }
            } else {
                loss_up_streak = 0;
            }
            prev_round_loss = round_loss;
            have_round_loss = true;
        }
    }

    res.x0 = codec.decode(z);
    res.phi_hat = std::move(phi);
    res.rng_draws = rng.draws_consumed();
    if (cfg.collect_trace) res.trace.check_guidance_parity(cfg.M);
    return res;
}

}  // namespace blindrestore
