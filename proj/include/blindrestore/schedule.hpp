#pragma once

#include <vector>

#include "blindrestore/tensor.hpp"

namespace blindrestore {

// Variance-preserving discrete noise schedule. alpha_bar(0) == 1 by
// convention so the last reverse step returns the clean estimate exactly.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta[t-1], t = 1..T
    std::vector<double> alpha_bar;  // alpha_bar[t-1], strictly decreasing
    double eta = 1.0;               // DDIM stochasticity in [0,1]

    double alpha_bar_at(int t) const;  // t in [0, T]
    double beta_at(int t) const;       // t in [1, T]
};

// Linear beta ramp from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end, double eta);

// sigma_t = eta * sqrt((1-ab_{t-1})/(1-ab_t)) * sqrt(1 - ab_t/ab_{t-1});
// guarantees 1 - ab_{t-1} - sigma_t^2 >= 0.
double ddim_sigma(const NoiseSchedule& s, int t);

}  // namespace blindrestore
