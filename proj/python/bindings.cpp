#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blindrestore/blind.hpp"
#include "blindrestore/convolve.hpp"
#include "blindrestore/harness.hpp"
#include "blindrestore/io.hpp"
#include "blindrestore/oracle.hpp"

namespace py = pybind11;
using namespace blindrestore;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    Shape shape(a.ndim());
    for (ssize_t i = 0; i < a.ndim(); ++i) shape[i] = a.shape(i);
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const Tensor& t) {
    std::vector<ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

using NpArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

}  // namespace

PYBIND11_MODULE(_blindrestore, m) {
    m.doc() = "blind inverse problem solving on analytic priors";

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("T", &NoiseSchedule::T)
        .def_readonly("eta", &NoiseSchedule::eta)
        .def("alpha_bar", &NoiseSchedule::alpha_bar_at, py::arg("t"))
        .def("beta", &NoiseSchedule::beta_at, py::arg("t"));
    m.def("make_schedule", &make_schedule, py::arg("T"), py::arg("beta_start"),
          py::arg("beta_end"), py::arg("eta") = 1.0);
    m.def("ddim_sigma", &ddim_sigma, py::arg("schedule"), py::arg("t"));

    py::class_<Condition>(m, "Condition")
        .def_readonly("label", &Condition::label)
        .def_readonly("components", &Condition::components);

    py::class_<GmmPrior>(m, "GmmPrior")
        .def(py::init([](const std::vector<NpArray>& means, double comp_std,
                         const std::vector<double>& weights) {
                 std::vector<Tensor> ms;
                 for (const auto& a : means) ms.push_back(to_tensor(a));
                 return make_gmm(std::move(ms), comp_std, weights);
             }),
             py::arg("means"), py::arg("comp_std") = 0.2,
             py::arg("weights") = std::vector<double>{})
        .def("add_condition",
             [](GmmPrior& p, const std::string& label, const std::vector<int>& comps,
                const std::vector<double>& overrides) {
                 p.conditions[label] = Condition{label, comps, overrides};
                 p.validate();
             },
             py::arg("label"), py::arg("components"),
             py::arg("weight_overrides") = std::vector<double>{})
        .def_readonly("comp_std", &GmmPrior::comp_std)
        .def("mean", [](const GmmPrior& p, int k) { return to_array(p.means.at(k)); });

    m.def("exact_epsilon",
          [](const GmmPrior& prior, const NpArray& z, int t, const std::string& cond,
             const NoiseSchedule& s) {
              return to_array(exact_epsilon(prior, to_tensor(z), t, prior.condition(cond), s));
          },
          py::arg("prior"), py::arg("z_t"), py::arg("t"), py::arg("condition"), py::arg("schedule"));
    m.def("log_marginal",
          [](const GmmPrior& prior, const NpArray& z, int t, const std::string& cond,
             const NoiseSchedule& s) {
              return log_marginal(prior, to_tensor(z), t, prior.condition(cond), s);
          });
    m.def("cfg_combine",
          [](const NpArray& neg, const NpArray& pos, double gamma) {
              return to_array(cfg_combine(to_tensor(neg), to_tensor(pos), gamma));
          },
          py::arg("eps_neg"), py::arg("eps_pos"), py::arg("gamma"));
    m.def("estimate_x0",
          [](const NpArray& z, const NpArray& eps, int t, const NoiseSchedule& s) {
              return to_array(estimate_x0(to_tensor(z), to_tensor(eps), t, s));
          },
          py::arg("z_t"), py::arg("eps_hat"), py::arg("t"), py::arg("schedule"));

    py::class_<Codec>(m, "Codec")
        .def_static("identity", [](const std::vector<int64_t>& s) { return Codec::identity(s); })
        .def_static("haar", [](const std::vector<int64_t>& s) { return Codec::haar(s); })
        .def("encode", [](const Codec& c, const NpArray& x) { return to_array(c.encode(to_tensor(x))); })
        .def("decode", [](const Codec& c, const NpArray& z) { return to_array(c.decode(to_tensor(z))); });

    m.def("gaussian_kernel", [](int n, double s) { return to_array(gaussian_kernel(n, s)); },
          py::arg("size"), py::arg("std"));
    m.def("dirac_kernel", [](int n) { return to_array(dirac_kernel(n)); }, py::arg("size"));
    m.def("conv2d_reflect",
          [](const NpArray& x, const NpArray& k) {
              return to_array(conv2d_reflect(to_tensor(x), to_tensor(k)));
          },
          py::arg("x"), py::arg("kernel"));
    m.def("project_kernel", [](const NpArray& k) { return to_array(project_kernel(to_tensor(k))); });

    py::class_<GroundTruthOperator>(m, "GroundTruthOperator")
        .def_static("conv", [](const NpArray& k) { return GroundTruthOperator::conv(to_tensor(k)); })
        .def_static("dct_quantize", &GroundTruthOperator::dct_quantize, py::arg("quant_factor"))
        .def_static("downsample", &GroundTruthOperator::downsample, py::arg("factor"))
        .def_static("gray_project", &GroundTruthOperator::gray_project)
        .def_property_readonly("kind", &GroundTruthOperator::kind_name)
        .def("apply", [](const GroundTruthOperator& op, const NpArray& x) {
            return to_array(apply_gt(op, to_tensor(x)));
        });
    m.def("make_measurement",
          [](const GroundTruthOperator& op, const NpArray& x, double sigma, uint64_t seed) {
              Measurement ms = make_measurement(op, to_tensor(x), sigma, seed);
              return py::make_tuple(to_array(ms.y), ms.provenance);
          },
          py::arg("op"), py::arg("x"), py::arg("sigma"), py::arg("seed"));

    py::class_<SurrogateOperator>(m, "SurrogateOperator")
        .def_static("kernel", &SurrogateOperator::kernel, py::arg("kernel_size"))
        .def_static("neural",
                    [](int channels, const std::vector<int>& widths) {
                        return SurrogateOperator::neural(channels, widths);
                    },
                    py::arg("channels"), py::arg("widths"))
        .def_property_readonly("param_count", &SurrogateOperator::param_count)
        .def("init_random", [](const SurrogateOperator& s, uint64_t seed) {
            return to_array(s.init_random(seed));
        })
        .def("init_dirac", [](const SurrogateOperator& s) { return to_array(s.init_dirac()); })
        .def("init_gaussian", [](const SurrogateOperator& s, double std) {
            return to_array(s.init_gaussian(std));
        })
        .def("apply", [](const SurrogateOperator& s, const NpArray& phi, const NpArray& x) {
            return to_array(s.apply(to_tensor(phi), to_tensor(x)));
        });

    m.def("operator_loss",
          [](const SurrogateOperator& s, const NpArray& phi, const NpArray& z0, const Codec& c,
             const NpArray& y, double lambda_phi) {
              return operator_loss(s, to_tensor(phi), to_tensor(z0), c, to_tensor(y), lambda_phi);
          },
          py::arg("surrogate"), py::arg("phi"), py::arg("z0"), py::arg("codec"), py::arg("y"),
          py::arg("lambda_phi"));

    m.def("sdedit_init",
          [](const NpArray& y, const Codec& c, int Ts, const NoiseSchedule& s, uint64_t seed) {
              Rng rng(seed);
              return to_array(sdedit_init(to_tensor(y), c, Ts, s, rng));
          },
          py::arg("y"), py::arg("codec"), py::arg("Ts"), py::arg("schedule"), py::arg("seed"));

    m.def("psnr",
          [](const NpArray& a, const NpArray& b, double peak) {
              return oracle::psnr(to_tensor(a), to_tensor(b), peak);
          },
          py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);

    m.def("run_solve",
          [](const std::string& config_text, const std::string& out_dir) {
              Config cfg = Config::parse_string(config_text);
              RunOutcome out = run_solve(cfg, out_dir);
              py::dict d;
              for (const auto& [k, v] : out.report.fields) d[py::str(k)] = v;
              d["restored"] = to_array(out.result.x0);
              return d;
          },
          py::arg("config_text"), py::arg("out_dir") = "");

    m.def("oracle_check", []() {
        std::string log;
        bool ok = run_oracle_checks(&log);
        return py::make_tuple(ok, log);
    });
}
