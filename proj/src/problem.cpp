#include "blindrestore/problem.hpp"

#include "blindrestore/io.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace blindrestore {

namespace {

Image checkerboard(int64_t n, int64_t period, double lo, double hi) {
    Image img({n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
            img.at(i, j) = ((i / period + j / period) % 2 == 0) ? lo : hi;
    return img;
}

Image disk(int64_t n, double lo, double hi) {
    Image img({n, n});
    double c = (double)(n - 1) / 2.0;
    double r2 = (double)(n * n) / 9.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            img.at(i, j) = d2 < r2 ? hi : lo;
        }
    return img;
}

Image block_pattern(int64_t n, int64_t cells, Rng& rng, double lo, double hi) {
    Image img({n, n});
    int64_t b = n / cells;
    std::vector<double> v(cells * cells);
    for (double& x : v) x = (rng.next_u64() & 1) ? hi : lo;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) img.at(i, j) = v[(i / b) * cells + j / b];
    return img;
}

Image stripes(int64_t n, int64_t period, bool vertical, double lo, double hi) {
    Image img({n, n});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            int64_t k = vertical ? j : i;
            img.at(i, j) = (k / period) % 2 == 0 ? lo : hi;
        }
    return img;
}

}  // namespace

std::vector<Image> pattern_means(const Config& cfg) {
    int64_t n = cfg.get_int("problem.image_size", 32);
    std::string set = cfg.get_str("problem.pattern_set", "blocks");
    uint64_t pseed = (uint64_t)cfg.get_int("problem.pattern_seed", 42);
    std::vector<Image> means;
    if (set == "blocks") {
        int64_t count = cfg.get_int("problem.pattern_count", 4);
        int64_t cells = cfg.get_int("problem.pattern_cells", 4);
        if (n % cells != 0) throw ConfigError("config: image_size must divide pattern_cells");
        Rng rng(pseed);
        for (int64_t k = 0; k < count; ++k) means.push_back(block_pattern(n, cells, rng, 0.15, 0.85));
    } else if (set == "checker-disk") {
        int64_t period = cfg.get_int("problem.pattern_period", n / 4);
        means.push_back(checkerboard(n, std::max<int64_t>(1, period), 0.1, 0.9));
        means.push_back(disk(n, 0.15, 0.9));
    } else if (set == "checker-stripes") {
        int64_t period = cfg.get_int("problem.pattern_period", n / 4);
        means.push_back(checkerboard(n, std::max<int64_t>(1, period), 0.1, 0.9));
        means.push_back(stripes(n, std::max<int64_t>(1, period), true, 0.2, 0.8));
    } else if (set == "single-checker") {
        int64_t period = cfg.get_int("problem.pattern_period", n / 4);
        means.push_back(checkerboard(n, std::max<int64_t>(1, period), 0.1, 0.9));
    } else {
        throw ConfigError("config: unknown problem.pattern_set '" + set + "'");
    }
    int64_t channels = cfg.get_int("problem.channels", 1);
    if (channels != 1) {
        // replicate planes; patterns are luminance-like
        for (Image& m : means) {
            Image c({channels, n, n});
            for (int64_t ch = 0; ch < channels; ++ch)
                for (int64_t i = 0; i < n * n; ++i) c[ch * n * n + i] = m[i];
            m = std::move(c);
        }
    }
    return means;
}

namespace {

GroundTruthOperator build_operator(const Config& cfg) {
    std::string kind = cfg.get_str("problem.operator", "conv-gaussian");
    if (kind == "conv-gaussian") {
        int size = (int)cfg.get_int("problem.kernel_size", 9);
        double std = cfg.get_real("problem.kernel_std", 1.5);
        return GroundTruthOperator::conv(gaussian_kernel(size, std));
    }
    if (kind == "conv-dirac" || kind == "identity")
        return GroundTruthOperator::conv(dirac_kernel((int)cfg.get_int("problem.kernel_size", 9)));
    if (kind == "conv-file")
        return GroundTruthOperator::conv(read_kernel_text(cfg.get_str("problem.kernel_file")));
    if (kind == "dct-quantize")
        return GroundTruthOperator::dct_quantize(cfg.get_real("problem.quant_factor", 2.0));
    if (kind == "downsample")
        return GroundTruthOperator::downsample((int)cfg.get_int("problem.downsample_factor", 2));
    if (kind == "gray-project") return GroundTruthOperator::gray_project();
    throw ConfigError("config: unknown problem.operator '" + kind + "'");
}

}  // namespace

Image lift_measurement(const Image& y, const Shape& image_shape) {
    if (y.shape() == image_shape) return y;
    int64_t H = image_shape[image_shape.size() - 2];
    int64_t W = image_shape[image_shape.size() - 1];
    int64_t h = y.dim(-2), w = y.dim(-1);
    if (H % h != 0 || W % w != 0)
        throw std::invalid_argument("lift_measurement: incompatible shapes " + shape_str(y.shape()) +
                                    " -> " + shape_str(image_shape));
    int64_t fy = H / h, fx = W / w;
    int64_t planes_out = shape_numel(image_shape) / (H * W);
    int64_t planes_in = y.numel() / (h * w);
    Image out(image_shape);
    for (int64_t p = 0; p < planes_out; ++p) {
        const double* src = y.data() + (p % planes_in) * h * w;  // broadcast channels
        double* dst = out.data() + p * H * W;
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) dst[i * W + j] = src[(i / fy) * w + j / fx];
    }
    return out;
}

Image sample_clean(const GmmPrior& prior, uint64_t seed, bool add_texture) {
    const Condition& sharp = prior.condition("sharp");
    Rng rng(seed);
    std::vector<double> w = prior.condition_weights(sharp);
    double u = rng.uniform();
    size_t pick = 0;
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u < acc) {
            pick = i;
            break;
        }
        pick = i;
    }
    Image x = prior.means[sharp.components[pick]];
    if (add_texture) {
        Tensor eps = rng.normal_tensor(x.shape());
        for (int64_t i = 0; i < x.numel(); ++i) x[i] += prior.comp_std * eps[i];
    }
    return x;
}

Problem build_problem(const Config& cfg) {
    Problem p;
    p.seed = (uint64_t)cfg.get_int("problem.seed", 1);
    p.sigma = cfg.get_real("problem.noise_sigma", 0.02);
    p.op = build_operator(cfg);

    std::vector<Image> sharp = pattern_means(cfg);
    const int64_t n_sharp = (int64_t)sharp.size();
    std::vector<Image> means = sharp;
    // degraded companions live in the image shape; shape-changing operators
    // get lifted back
    for (const Image& m : sharp)
        means.push_back(lift_measurement(apply_gt(p.op, m), m.shape()));

    double s = cfg.get_real("problem.component_std", 0.1);
    p.prior = make_gmm(std::move(means), s, {});
    Condition cs{"sharp", {}, {}};
    Condition cd{"degraded", {}, {}};
    for (int64_t k = 0; k < n_sharp; ++k) {
        cs.components.push_back((int)k);
        cd.components.push_back((int)(n_sharp + k));
    }
    p.prior.conditions["sharp"] = cs;
    p.prior.conditions["degraded"] = cd;
    p.prior.validate();

    std::string codec = cfg.get_str("solver.codec", "identity");
    const Shape& ishape = p.prior.latent_shape();
    p.codec = codec == "haar" ? Codec::haar(ishape) : Codec::identity(ishape);

    std::string truth_mode = cfg.get_str("problem.truth", "sample");
    int64_t tc = cfg.get_int("problem.truth_component", -1);
    if (tc >= 0) {
        if (tc >= n_sharp) throw ConfigError("config: problem.truth_component out of range");
        p.truth = p.prior.means[tc];
        if (truth_mode == "sample") {
            Rng rng(Rng::splitmix64(p.seed ^ 0xA11CE5ULL));
            Tensor eps = rng.normal_tensor(p.truth.shape());
            for (int64_t i = 0; i < p.truth.numel(); ++i) p.truth[i] += s * eps[i];
        }
    } else {
        p.truth = sample_clean(p.prior, Rng::splitmix64(p.seed ^ 0xA11CE5ULL),
                               truth_mode == "sample");
    }

    p.meas = make_measurement(p.op, p.truth, p.sigma, Rng::splitmix64(p.seed ^ 0x00B5ULL));
    p.encode_ref = lift_measurement(p.meas.y, ishape);

    for (const auto& [k, v] : cfg.entries())
        if (k.rfind("problem.", 0) == 0) p.echo.set(k, v);
    p.echo.set("problem.seed", std::to_string(p.seed));
    return p;
}

SolverConfig solver_config(const Config& cfg) {
    SolverConfig sc;
    sc.Ts = (int)cfg.get_int("solver.Ts", 150);
    sc.M = (int)cfg.get_int("solver.M", 4);
    sc.update_period = (int)cfg.get_int("solver.update_period", 5);
    sc.K = (int)cfg.get_int("solver.K", 50);
    sc.gamma = cfg.get_real("solver.gamma", 2.0);
    sc.ct = cfg.get_real("solver.ct", 0.5);
    std::string cts = cfg.get_str("solver.ct_schedule", "sqrt-alpha");
    if (cts == "flat") sc.ct_schedule = CtSchedule::Flat;
    else if (cts == "sqrt-alpha") sc.ct_schedule = CtSchedule::SqrtAlphaPrev;
    else throw ConfigError("config: unknown solver.ct_schedule '" + cts + "'");
    sc.lambda_z = cfg.get_real("solver.lambda_z", 0.0);
    sc.use_reg = cfg.get_bool("solver.use_reg", false);
    sc.lambda_phi = cfg.get_real("solver.lambda_phi", 2.0);
    sc.refine = cfg.get_bool("solver.refine", true);
    std::string ri = cfg.get_str("solver.refine_input", "pre");
    if (ri == "post") sc.refine_input = RefineInput::Post;
    else if (ri == "pre") sc.refine_input = RefineInput::Pre;
    else throw ConfigError("config: unknown solver.refine_input '" + ri + "'");
    sc.project_kernel_after_round = cfg.get_bool("solver.project_kernel", true);
    std::string nd = cfg.get_str("solver.ddim_noise", "cfg");
    if (nd == "cfg") sc.ddim_noise = NoiseDirection::Cfg;
    else if (nd == "uncond") sc.ddim_noise = NoiseDirection::Uncond;
    else throw ConfigError("config: unknown solver.ddim_noise '" + nd + "'");
    std::string init = cfg.get_str("solver.init", "gaussian");
    if (init == "gaussian") sc.init = InitMode::BroadGaussian;
    else if (init == "dirac") sc.init = InitMode::Dirac;
    else if (init == "random") sc.init = InitMode::RandomParams;
    else if (init == "operator-init") sc.init = InitMode::OperatorInit;
    else if (init == "fixed") sc.init = InitMode::FixedParams;
    else throw ConfigError("config: unknown solver.init '" + init + "'");
    sc.init_gaussian_std = cfg.get_real("solver.init_gaussian_std", 2.5);
    sc.opinit.iters = (int)cfg.get_int("solver.opinit_iters", 8);
    sc.opinit.batch = (int)cfg.get_int("solver.opinit_batch", 4);
    sc.opinit.steps = (int)cfg.get_int("solver.opinit_steps", 60);
    sc.adam.lr = cfg.get_real("solver.adam_lr", 1e-2);
    sc.adam.beta1 = cfg.get_real("solver.adam_beta1", 0.9);
    sc.adam.beta2 = cfg.get_real("solver.adam_beta2", 0.999);
    sc.adam.eps = cfg.get_real("solver.adam_eps", 1e-8);
    sc.cond_pos = cfg.get_str("solver.cond_pos", "sharp");
    sc.cond_neg = cfg.get_str("solver.cond_neg", "uncond");
    sc.seed = (uint64_t)cfg.get_int("solver.seed", 7);
    sc.collect_trace = cfg.get_bool("solver.trace", true);
    return sc;
}

NoiseSchedule schedule_config(const Config& cfg) {
    return make_schedule((int)cfg.get_int("solver.T", 200), cfg.get_real("solver.beta_start", 1e-4),
                         cfg.get_real("solver.beta_end", 0.02), cfg.get_real("solver.eta", 1.0));
}

SurrogateOperator surrogate_config(const Config& cfg, const Problem& p) {
    std::string fam = cfg.get_str("solver.surrogate", "kernel");
    if (fam == "kernel")
        return SurrogateOperator::kernel((int)cfg.get_int("solver.surrogate_kernel_size", 9));
    if (fam == "neural") {
        std::string ws = cfg.get_str("solver.widths", "8,16,32");
        std::vector<int> widths;
        size_t pos = 0;
        while (pos < ws.size()) {
            size_t comma = ws.find(',', pos);
            if (comma == std::string::npos) comma = ws.size();
            widths.push_back(std::stoi(ws.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        int channels = p.prior.latent_shape().size() == 3 ? (int)p.prior.latent_shape()[0] : 1;
        if (p.prior.latent_shape().size() == 2) {
            // rank-2 problems run the net on a single lifted channel
            channels = 1;
        }
        return SurrogateOperator::neural(channels, widths);
    }
    throw ConfigError("config: unknown solver.surrogate '" + fam + "'");
}

void apply_seed_override(Config& cfg) {
    const char* env = std::getenv("BLINDRESTORE_SEED");
    if (!env || !*env) return;
    cfg.set("problem.seed", env);
    cfg.set("solver.seed", env);
}

}  // namespace blindrestore
