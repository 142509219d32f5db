#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blindrestore/config.hpp"
#include "blindrestore/problem.hpp"

namespace blindrestore {

// Deterministic run record: config echo, seeds, metrics. Serialization is
// byte-stable for a given config and seed; wall time goes to the console, not
// the file.
struct Report {
    std::map<std::string, std::string> fields;

    void put(const std::string& key, const std::string& v) { fields[key] = v; }
    void put_real(const std::string& key, double v);
    void put_int(const std::string& key, int64_t v);
    std::string serialize() const;
};

uint64_t fnv1a_str(const std::string& s);

struct RunOutcome {
    Report report;
    SolveResult result;
    Problem problem;
};

// full pipeline for one experiment config: build problem, solve, compute
// metrics; writes restored image, parameter dump and report into out_dir when
// non-empty
RunOutcome run_solve(Config cfg, const std::string& out_dir);

// operator initialization only; dumps phi_init.brt + report
Report run_init_operator(Config cfg, const std::string& out_dir);

// emits truth/measurement/operator files for later runs
Report run_generate(Config cfg, const std::string& out_dir);

// sweep one knob across values x seeds, appending rows to a schema-stable csv
Report run_ablate(Config cfg, const std::string& sweep, std::vector<std::string> values,
                  int seeds, const std::string& csv_path);

// self-contained validation of the closed-form and brute-force reference
// machinery; returns true when every check passes, printing one line each
bool run_oracle_checks(std::string* log_out = nullptr);

// mean squared error between a fitted kernel (projected) and the operator
// kernel; requires kernel surrogate + conv operator
double kernel_mse(const Tensor& phi_hat, const GroundTruthOperator& op);

// surrogate-vs-truth output mismatch on held-out clean draws
double heldout_operator_mse(const SurrogateOperator& surrogate, const Tensor& phi,
                            const GroundTruthOperator& op, const GmmPrior& prior, int count,
                            uint64_t seed);

const std::string kAblateHeader = "sweep,value,seed,psnr_restored,psnr_measurement,kernel_mse";

}  // namespace blindrestore
