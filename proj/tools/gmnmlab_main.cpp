// Command-line front end; talks to the core strictly through the C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gmnmlab/gmnmlab.h"

namespace {

int status_to_exit(gml_status s) {
  switch (s) {
    case GML_OK: return 0;
    case GML_ERR_CONFIG: return 1;
    case GML_ERR_DATA: return 2;
    case GML_ERR_NAN: return 3;
    default: return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmnmlab: Gaussian mixture-inspired nonlinear module lab"};
  app.set_version_flag("--version", gml_version());
  app.require_subcommand(1);

  std::vector<std::string> configs;
  int jobs = 1;
  CLI::App* run = app.add_subcommand("run", "run experiment config(s)");
  run->add_option("config", configs, "config file(s)")->required();
  run->add_option("--jobs", jobs, "parallel runs for multiple configs");

  std::string kind;
  std::uint64_t seed = 1;
  CLI::App* gc = app.add_subcommand(
      "gradcheck", "compare tape gradients against finite differences");
  gc->add_option("kind", kind, "model kind (e.g. gmnm-ridge, mlp, lstm-gmnm)")
      ->required();
  gc->add_option("--seed", seed, "random seed");

  std::vector<std::string> dirs;
  std::string csv_path;
  CLI::App* rep = app.add_subcommand("report", "summarize finished runs");
  rep->add_option("dir", dirs, "run output directories")->required();
  rep->add_option("--csv", csv_path, "also write the table as CSV");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    std::vector<const char*> paths;
    paths.reserve(configs.size());
    for (const std::string& c : configs) paths.push_back(c.c_str());
    const gml_status s =
        gml_run_many(paths.data(), static_cast<int>(paths.size()), jobs);
    if (s != GML_OK) std::fprintf(stderr, "%s\n", gml_last_error());
    return status_to_exit(s);
  }

  if (gc->parsed()) {
    char* text = nullptr;
    double worst = 0.0;
    const gml_status s = gml_gradcheck(kind.c_str(), seed, &text, &worst);
    if (text != nullptr) {
      std::fputs(text, stdout);
      gml_string_free(text);
    }
    if (s != GML_OK && s != GML_ERR_RUNTIME)
      std::fprintf(stderr, "%s\n", gml_last_error());
    return status_to_exit(s);
  }

  if (rep->parsed()) {
    std::vector<const char*> cdirs;
    cdirs.reserve(dirs.size());
    for (const std::string& d : dirs) cdirs.push_back(d.c_str());
    char* text = nullptr;
    char* csv = nullptr;
    const gml_status s =
        gml_report(cdirs.data(), static_cast<int>(cdirs.size()), &text,
                   csv_path.empty() ? nullptr : &csv);
    if (s != GML_OK) {
      std::fprintf(stderr, "%s\n", gml_last_error());
      return status_to_exit(s);
    }
    std::fputs(text, stdout);
    gml_string_free(text);
    if (csv != nullptr) {
      FILE* f = std::fopen(csv_path.c_str(), "w");
      if (f == nullptr) {
        std::fprintf(stderr, "cannot write %s\n", csv_path.c_str());
        gml_string_free(csv);
        return 2;
      }
      std::fputs(csv, f);
      std::fclose(f);
      gml_string_free(csv);
    }
    return 0;
  }

  return 1;
}
