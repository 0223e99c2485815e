#include "gmnmlab/gmnmlab.h"

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "model.hpp"
#include "runner.hpp"
#include "snapshot.hpp"
#include "tasks.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

gml_status classify(const std::exception& e) {
  set_error(e.what());
  if (dynamic_cast<const gmnmlab::NanAbort*>(&e)) return GML_ERR_NAN;
  if (dynamic_cast<const gmnmlab::DataError*>(&e)) return GML_ERR_DATA;
  if (dynamic_cast<const gmnmlab::ConfigError*>(&e)) return GML_ERR_CONFIG;
  return GML_ERR_RUNTIME;
}

}  // namespace

struct gml_model {
  std::unique_ptr<gmnmlab::Model> impl;
};

extern "C" {

const char* gml_version(void) { return "0.1.0"; }

const char* gml_last_error(void) { return g_last_error.c_str(); }

void gml_string_free(char* s) { std::free(s); }

gml_status gml_run(const char* config_path) {
  if (config_path == nullptr) {
    set_error("config_path is null");
    return GML_ERR_CONFIG;
  }
  // run_experiment owns the exit-code mapping: 0 ok, 1 config, 2 data, 3 nan
  switch (gmnmlab::run_experiment(config_path)) {
    case 0: return GML_OK;
    case 2: set_error("missing or malformed data"); return GML_ERR_DATA;
    case 3: set_error("training aborted on non-finite loss"); return GML_ERR_NAN;
    default: set_error("config error"); return GML_ERR_CONFIG;
  }
}

gml_status gml_run_many(const char* const* config_paths, int count, int jobs) {
  if (config_paths == nullptr || count < 1) {
    set_error("no config paths");
    return GML_ERR_CONFIG;
  }
  std::vector<std::string> paths(config_paths, config_paths + count);
  switch (gmnmlab::run_experiments(paths, jobs)) {
    case 0: return GML_OK;
    case 2: set_error("missing or malformed data"); return GML_ERR_DATA;
    case 3: set_error("training aborted on non-finite loss"); return GML_ERR_NAN;
    default: set_error("config error"); return GML_ERR_CONFIG;
  }
}

gml_status gml_gradcheck(const char* model_kind, uint64_t seed,
                         char** out_report, double* out_worst_rel) {
  if (model_kind == nullptr) {
    set_error("model_kind is null");
    return GML_ERR_CONFIG;
  }
  try {
    const gmnmlab::GradcheckReport rep = gmnmlab::gradcheck(model_kind, seed);
    if (out_report != nullptr) *out_report = dup_string(rep.text());
    if (out_worst_rel != nullptr) *out_worst_rel = rep.worst_rel();
    if (!rep.ok()) {
      set_error("gradient check exceeded tolerance");
      return GML_ERR_RUNTIME;
    }
    return GML_OK;
  } catch (const std::exception& e) {
    return classify(e);
  }
}

gml_status gml_report(const char* const* run_dirs, int count, char** out_text,
                      char** out_csv) {
  if (run_dirs == nullptr || count < 1) {
    set_error("no run directories");
    return GML_ERR_CONFIG;
  }
  try {
    std::vector<std::string> dirs(run_dirs, run_dirs + count);
    if (out_text != nullptr) *out_text = dup_string(gmnmlab::report_text(dirs));
    if (out_csv != nullptr) *out_csv = dup_string(gmnmlab::report_csv(dirs));
    return GML_OK;
  } catch (const std::exception& e) {
    return classify(e);
  }
}

gml_status gml_model_load(const char* snapshot_path, gml_model** out_model) {
  if (snapshot_path == nullptr || out_model == nullptr) {
    set_error("null argument");
    return GML_ERR_CONFIG;
  }
  try {
    auto handle = std::make_unique<gml_model>();
    handle->impl = gmnmlab::snapshot_load(snapshot_path);
    *out_model = handle.release();
    return GML_OK;
  } catch (const std::exception& e) {
    return classify(e);
  }
}

gml_status gml_model_save(gml_model* model, const char* snapshot_path) {
  if (model == nullptr || snapshot_path == nullptr) {
    set_error("null argument");
    return GML_ERR_CONFIG;
  }
  try {
    gmnmlab::snapshot_save(*model->impl, snapshot_path);
    return GML_OK;
  } catch (const std::exception& e) {
    return classify(e);
  }
}

void gml_model_free(gml_model* model) { delete model; }

int gml_model_input_size(const gml_model* model) {
  if (model == nullptr) return -1;
  return static_cast<int>(gmnmlab::flat_size(model->impl->input_shape()));
}

int gml_model_output_size(const gml_model* model) {
  if (model == nullptr) return -1;
  return model->impl->output_dim();
}

long gml_model_param_count(const gml_model* model, int trainable_only) {
  if (model == nullptr) return -1;
  return model->impl->param_count(trainable_only != 0);
}

gml_status gml_model_forward(gml_model* model, const double* x, int x_len,
                             double* out, int out_len) {
  if (model == nullptr || x == nullptr || out == nullptr) {
    set_error("null argument");
    return GML_ERR_CONFIG;
  }
  try {
    if (x_len != gml_model_input_size(model) ||
        out_len != gml_model_output_size(model))
      throw gmnmlab::ShapeError("model_forward: buffer size mismatch");
    const auto result = model->impl->forward_one(
        std::span<const double>(x, static_cast<std::size_t>(x_len)));
    std::memcpy(out, result.data(), result.size() * sizeof(double));
    return GML_OK;
  } catch (const std::exception& e) {
    return classify(e);
  }
}

gml_status gml_model_laplacian(gml_model* model, const double* x, int x_len,
                               double* out, int out_len) {
  if (model == nullptr || x == nullptr || out == nullptr) {
    set_error("null argument");
    return GML_ERR_CONFIG;
  }
  try {
    if (x_len != gml_model_input_size(model) ||
        out_len != gml_model_output_size(model))
      throw gmnmlab::ShapeError("model_laplacian: buffer size mismatch");
    const auto result = model->impl->laplacian_eval(
        std::span<const double>(x, static_cast<std::size_t>(x_len)));
    std::memcpy(out, result.data(), result.size() * sizeof(double));
    return GML_OK;
  } catch (const std::exception& e) {
    return classify(e);
  }
}

}  // extern "C"
