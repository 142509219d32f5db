#include "blindrestore/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace blindrestore {

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > T) throw std::out_of_range("alpha_bar_at: t outside [0,T]");
    return t == 0 ? 1.0 : alpha_bar[t - 1];
}

double NoiseSchedule::beta_at(int t) const {
    if (t < 1 || t > T) throw std::out_of_range("beta_at: t outside [1,T]");
    return beta[t - 1];
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end, double eta) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
        throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("make_schedule: eta outside [0,1]");

    NoiseSchedule s;
    s.T = T;
    s.eta = eta;
    s.beta.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        double frac = T == 1 ? 0.0 : (double)i / (double)(T - 1);
        s.beta[i] = beta_start + (beta_end - beta_start) * frac;
        prod *= 1.0 - s.beta[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

double ddim_sigma(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.T) throw std::out_of_range("ddim_sigma: t outside [1,T]");
    double ab_t = s.alpha_bar_at(t);
    double ab_prev = s.alpha_bar_at(t - 1);
    if (ab_prev >= 1.0) return 0.0;  // t == 1
    double r = (1.0 - ab_prev) / (1.0 - ab_t);
    double q = 1.0 - ab_t / ab_prev;
    if (q < 0.0) q = 0.0;
    return s.eta * std::sqrt(r) * std::sqrt(q);
}

}  // namespace blindrestore
