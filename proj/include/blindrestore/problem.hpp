#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blindrestore/blind.hpp"
#include "blindrestore/config.hpp"

namespace blindrestore {

// A fully materialized experiment: prior, degradation, truth, measurement.
struct Problem {
    GmmPrior prior;
    GroundTruthOperator op;
    Codec codec = Codec::identity({1, 1});
    Image truth;
    Measurement meas;
    Image encode_ref;  // measurement lifted to image shape (equals meas.y when shapes agree)
    double sigma = 0.0;
    uint64_t seed = 0;
    Config echo;  // resolved problem.* keys
};

// Builds a problem from problem.* config keys. Procedural pattern sets supply
// the sharp component means; degraded companions are the operator applied to
// each sharp mean. Conditions: "sharp", "degraded", "uncond".
Problem build_problem(const Config& cfg);

// sharp means only, for held-out evaluation draws
std::vector<Image> pattern_means(const Config& cfg);

// draws a fresh clean image from the prior's sharp components
Image sample_clean(const GmmPrior& prior, uint64_t seed, bool add_texture = true);

// nearest-neighbor lift of a measurement back to the image shape (factor
// upsample for downsampling operators, channel broadcast for projections)
Image lift_measurement(const Image& y, const Shape& image_shape);

// solver.* keys -> SolverConfig; schedule.* keys -> NoiseSchedule
SolverConfig solver_config(const Config& cfg);
NoiseSchedule schedule_config(const Config& cfg);
SurrogateOperator surrogate_config(const Config& cfg, const Problem& p);

// applies the BLINDRESTORE_SEED override, when present, to problem.seed and
// solver.seed
void apply_seed_override(Config& cfg);

}  // namespace blindrestore
