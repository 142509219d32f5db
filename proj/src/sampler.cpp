#include "blindrestore/sampler.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace blindrestore {

std::string SamplerTrace::to_csv() const {
    std::ostringstream os;
    os << "t,rep,guided,guidance_loss,grad_norm,draws\n";
    char buf[160];
    for (const StepTraceRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%llu\n", r.t, r.rep, r.guided ? 1 : 0,
                      r.guidance_loss, r.grad_norm, (unsigned long long)r.draws);
        os << buf;
    }
    return os.str();
}

void SamplerTrace::check_guidance_parity(int M) const {
    if (rows.empty()) return;
    int t = rows.front().t;
    int count = 0, guided = 0;
    auto flush = [&](int at_t) {
        if (count != M)
            throw std::logic_error("trace: outer step t=" + std::to_string(at_t) + " has " +
                                   std::to_string(count) + " repetitions, expected " + std::to_string(M));
        if (guided != M / 2)
            throw std::logic_error("trace: outer step t=" + std::to_string(at_t) + " has " +
                                   std::to_string(guided) + " guided repetitions, expected " +
                                   std::to_string(M / 2));
    };
    for (const StepTraceRow& r : rows) {
        if (r.t != t) {
            flush(t);
            t = r.t;
            count = 0;
            guided = 0;
        }
        ++count;
        if (r.guided) ++guided;
    }
    flush(t);
}

Latent sdedit_init(const Image& y, const Codec& codec, int Ts, const NoiseSchedule& s, Rng& rng) {
    if (Ts < 1 || Ts > s.T) throw std::out_of_range("sdedit_init: Ts outside [1,T]");
    Latent ey = codec.encode(y);
    double ab = s.alpha_bar_at(Ts);
    double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    Tensor eps = rng.normal_tensor(ey.shape());
    Latent z(ey.shape());
    for (int64_t i = 0; i < z.numel(); ++i) z[i] = c0 * ey[i] + c1 * eps[i];
    return z;
}

NoisePrediction guided_eps(const GmmPrior& prior, const Latent& z_t, int t,
                           const Condition& cond_pos, const Condition& cond_neg, double gamma,
                           const NoiseSchedule& s) {
    NoisePrediction eps_neg = exact_epsilon(prior, z_t, t, cond_neg, s);
    NoisePrediction eps_pos = exact_epsilon(prior, z_t, t, cond_pos, s);
    return cfg_combine(eps_neg, eps_pos, gamma);
}

Latent mpgd_update(const Latent& z0t, const Image& y, const SurrogateOperator& surrogate,
                   const Tensor& phi, const Codec& codec, double ct, const Regularizer* reg,
                   double lambda_z, double* loss_out, double* grad_norm_out) {
    if (ct < 0.0) throw std::invalid_argument("mpgd_update: ct must be >= 0");
    grad::Tape tape;
    grad::Var z = tape.leaf(z0t);
    grad::Var p = tape.leaf(phi);
    grad::Var img = tape.decode(z, codec);
    grad::Var pred = surrogate.build(tape, p, img);
    grad::Var resid = tape.sub(pred, tape.leaf(y));
    grad::Var loss = tape.sum_squares(resid);
    if (reg && lambda_z != 0.0)
        loss = tape.add(loss, tape.scale(reg->build(tape, img, y), lambda_z));

    double lv = tape.val(loss).item();
    Tensor g = tape.grad(loss, {z})[0];
    if (loss_out) *loss_out = lv;
    if (grad_norm_out) *grad_norm_out = l2_norm(g);
    Latent out = z0t;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= ct * g[i];
    return out;
}

Latent ddim_step(const Latent& z_t, const Latent& z0t, const NoisePrediction& eps_hat, int t,
                 const NoiseSchedule& s, Rng& rng) {
    if (t < 1 || t > s.T) throw std::out_of_range("ddim_step: t outside [1,T]");
    z_t.check_same(z0t);
    z_t.check_same(eps_hat);
    double ab_prev = s.alpha_bar_at(t - 1);
    double sigma = ddim_sigma(s, t);
    double dir = 1.0 - ab_prev - sigma * sigma;
    if (dir < 0.0) dir = 0.0;
    double c0 = std::sqrt(ab_prev), c1 = std::sqrt(dir);
    Tensor eps = rng.normal_tensor(z_t.shape());
    Latent out(z_t.shape());
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = c0 * z0t[i] + c1 * eps_hat[i] + sigma * eps[i];
    return out;
}

Latent time_travel(const Latent& z_prev, int t, const NoiseSchedule& s, Rng& rng) {
    if (t < 1 || t > s.T) throw std::out_of_range("time_travel: t outside [1,T]");
    double r = s.alpha_bar_at(t) / s.alpha_bar_at(t - 1);
    double c0 = std::sqrt(r);
    double q = 1.0 - r;
    if (q < 0.0) q = 0.0;
    double c1 = std::sqrt(q);
    Tensor eps = rng.normal_tensor(z_prev.shape());
    Latent out(z_prev.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = c0 * z_prev[i] + c1 * eps[i];
    return out;
}

}  // namespace blindrestore
