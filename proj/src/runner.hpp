#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gmnmlab {

// Executes the experiment described by a config file and writes
// metrics.csv, summary.json, params.json and config.txt into its output
// directory. Returns the process exit code: 0 ok, 1 config/parse error,
// 2 missing or bad data, 3 NaN abort (step recorded in summary.json).
int run_experiment(const std::string& config_path);

// Batch mode: independent configs, optionally in parallel. Returns the
// first nonzero exit code, 0 when every run succeeded.
int run_experiments(const std::vector<std::string>& config_paths, int jobs);

struct GradcheckBlock {
  std::string name;
  bool frozen = false;
  double max_rel = 0.0;
  double max_abs = 0.0;
};

struct GradcheckReport {
  std::string kind;
  std::uint64_t seed = 0;
  std::vector<GradcheckBlock> blocks;
  double worst_rel() const;
  bool ok(double tol = 1e-4) const;
  std::string text() const;
};

// Known kinds: gmnm-ridge, gmnm-quadratic, gmnm-minimal, mlp, rbf,
// conv-dense, conv-gmnm, lstm, lstm-gmnm, gmnm-pde, mlp-pinn.
GradcheckReport gradcheck(const std::string& kind, std::uint64_t seed);
std::vector<std::string> gradcheck_kinds();

// Comparison table over finished runs, sorted by min test loss.
std::string report_text(const std::vector<std::string>& run_dirs);
std::string report_csv(const std::vector<std::string>& run_dirs);

}  // namespace gmnmlab
