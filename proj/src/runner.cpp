#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "json.hpp"
#include "nets.hpp"
#include "optim.hpp"
#include "snapshot.hpp"
#include "tasks.hpp"

namespace gmnmlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitSeedSalt = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kTrainSeedSalt = 0x517CC1B727220A95ull;
constexpr std::uint64_t kSynthDigitsSeed = 777;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

GmnmMode parse_mode(const std::string& s) {
  if (s == "ridge") return GmnmMode::ridge;
  if (s == "quadratic") return GmnmMode::quadratic;
  throw ConfigError("unknown gmnm mode: " + s);
}

struct Experiment {
  std::string task;
  std::string model_kind;
  std::uint64_t seed = 1;
  std::string out_dir;
  TrainBudget budget;
  std::string optim = "adam";
  double lr = 0.0;  // 0 = task default
  std::string raw;

  std::unique_ptr<Model> model;
  std::unique_ptr<TrainTask> train_task;
};

GmnmConfig gmnm_cfg_from(KvConfig& kv, const std::string& prefix, int d,
                         int out_dim, std::vector<std::array<double, 2>> box,
                         bool default_trainable_mu, bool default_minimal) {
  GmnmConfig cfg;
  cfg.d = d;
  cfg.out_dim = out_dim;
  cfg.m = static_cast<int>(kv.get_long(prefix + ".m", 100));
  cfg.n = static_cast<int>(kv.get_long(prefix + ".n", 0));
  cfg.mode = parse_mode(kv.get_str(prefix + ".mode", "ridge"));
  cfg.minimal = kv.get_bool(prefix + ".minimal", default_minimal);
  if (cfg.minimal) cfg.n = 1;
  cfg.trainable_mu =
      kv.get_bool(prefix + ".trainable_mu", default_trainable_mu);
  const std::string mu_init = kv.get_str(prefix + ".mu_init", "uniform");
  if (mu_init == "data" || mu_init == "data_sample")
    cfg.mu_init = MuInit::data_sample;
  else if (mu_init == "uniform" || mu_init == "uniform_domain")
    cfg.mu_init = MuInit::uniform_domain;
  else
    throw ConfigError("unknown mu_init: " + mu_init);
  cfg.domain = std::move(box);
  return cfg;
}

// Builds the model and task for one experiment; defaults follow the
// per-task training protocol recorded in the config echo.
Experiment assemble(KvConfig& kv, const std::string& origin) {
  Experiment e;
  e.raw = kv.raw_text();
  e.task = kv.require_str("task");
  e.seed = static_cast<std::uint64_t>(kv.get_long("seed", 1));
  e.out_dir = kv.require_str("out");
  e.optim = kv.get_str("optim", "adam");
  if (e.optim != "adam" && e.optim != "sgd")
    throw ConfigError("unknown optimizer: " + e.optim);

  Rng rng_data(e.seed);
  Rng rng_init(e.seed ^ kInitSeedSalt);
  e.budget.seed = e.seed ^ kTrainSeedSalt;
  e.budget.steps = kv.get_long("steps", 0);
  e.budget.epochs = kv.get_long("epochs", 0);
  e.budget.eval_every = kv.get_long("eval_every", 100);

  if (e.task == "fit2d") {
    FitLevel level;
    const long preset = kv.get_long("fit2d.level", -1);
    if (preset >= 0) {
      if (preset > 3) throw ConfigError("fit2d.level must be 0..3");
      level = standard_fit_levels()[static_cast<std::size_t>(preset)];
    }
    level.a = kv.get_double("fit2d.a", level.a);
    level.b = kv.get_double("fit2d.b", level.b);
    level.c = kv.get_double("fit2d.c", level.c);
    const long n_train = kv.get_long("fit2d.n_train", 2000);
    const long n_test = kv.get_long("fit2d.n_test", 500);
    Dataset ds = sample_fit_dataset(level, n_train, n_test, rng_data);
    e.budget.batch = static_cast<int>(kv.get_long("batch", 0));
    e.lr = kv.get_double("lr", 1e-2);

    e.model_kind = kv.get_str("model", "gmnm");
    std::vector<std::array<double, 2>> box(2, {-4.0, 4.0});
    if (e.model_kind == "gmnm") {
      GmnmConfig cfg = gmnm_cfg_from(kv, "gmnm", 2, 1, box, true, false);
      const Tensor tr = ds.train_inputs();
      e.model = std::make_unique<GmnmModel>(
          cfg, rng_init, cfg.mu_init == MuInit::data_sample ? &tr : nullptr);
    } else if (e.model_kind == "mlp") {
      MlpConfig cfg;
      for (long w : kv.get_longs("mlp.widths", {2, 50, 50, 50, 1}))
        cfg.widths.push_back(static_cast<int>(w));
      cfg.act = act_from_string(kv.get_str("mlp.act", "tanh"));
      if (cfg.widths.front() != 2 || cfg.widths.back() != 1)
        throw ConfigError("fit2d mlp widths must start at 2 and end at 1");
      e.model = std::make_unique<MlpModel>(cfg, rng_init);
    } else if (e.model_kind == "rbf") {
      RbfConfig cfg;
      cfg.d = 2;
      cfg.out_dim = 1;
      cfg.m = static_cast<int>(kv.get_long("rbf.m", 100));
      cfg.domain = box;
      e.model = std::make_unique<RbfModel>(cfg, rng_init);
    } else {
      throw ConfigError("fit2d supports gmnm, mlp or rbf models");
    }
    auto task = std::make_unique<SupervisedTask>(
        ds.train_inputs(), ds.train_targets(), ds.test_inputs(),
        ds.test_targets(), LossKind::mse);
    task->set_batch(e.budget.batch);
    e.train_task = std::move(task);
    return e;
  }

  if (e.task == "pde") {
    PdeConfig cfg;
    cfg.n_interior = static_cast<int>(kv.get_long("pde.n_interior", 1024));
    cfg.n_boundary = static_cast<int>(kv.get_long("pde.n_boundary", 256));
    cfg.grid = static_cast<int>(kv.get_long("pde.grid", 101));
    e.budget.batch = 0;
    e.lr = kv.get_double("lr", 1e-2);

    e.model_kind = kv.get_str("model", "gmnm");
    std::vector<std::array<double, 2>> box(2, {-1.0, 1.0});
    if (e.model_kind == "gmnm") {
      GmnmConfig gcfg = gmnm_cfg_from(kv, "gmnm", 2, 1, box, true, true);
      if (gcfg.mode != GmnmMode::ridge)
        throw ConfigError("the pde task needs a ridge-mode gmnm");
      e.model = std::make_unique<GmnmModel>(gcfg, rng_init);
    } else if (e.model_kind == "mlp") {
      MlpConfig mcfg;
      for (long w : kv.get_longs("mlp.widths", {2, 50, 50, 50, 1}))
        mcfg.widths.push_back(static_cast<int>(w));
      mcfg.act = act_from_string(kv.get_str("mlp.act", "tanh"));
      e.model = std::make_unique<MlpModel>(mcfg, rng_init);
    } else {
      throw ConfigError("pde supports gmnm or mlp models");
    }
    e.train_task = std::make_unique<PdeTask>(cfg, rng_data);
    return e;
  }

  if (e.task == "timeseries") {
    TsConfig cfg;
    const auto av = kv.get_doubles("ts.a", {cfg.a.begin(), cfg.a.end()});
    const auto bv = kv.get_doubles("ts.b", {cfg.b.begin(), cfg.b.end()});
    if (av.size() != 4 || bv.size() != 4)
      throw ConfigError("ts.a and ts.b need four coefficients");
    std::copy(av.begin(), av.end(), cfg.a.begin());
    std::copy(bv.begin(), bv.end(), cfg.b.begin());
    cfg.n_samples = kv.get_long("ts.n", 10000);
    cfg.window = static_cast<int>(kv.get_long("ts.window", 10));
    cfg.dt = kv.get_double("ts.dt", 0.1);
    Dataset ds = ts_generate(cfg, rng_data);
    e.budget.batch = static_cast<int>(kv.get_long("batch", 128));
    e.lr = kv.get_double("lr", 1e-3);

    e.model_kind = "lstm";
    LstmConfig lcfg;
    lcfg.features = 4;
    lcfg.window = cfg.window;
    lcfg.units = static_cast<int>(kv.get_long("lstm.units", 3));
    lcfg.gmnm_head = kv.get_bool("lstm.gmnm", false);
    lcfg.gmnm_m = static_cast<int>(kv.get_long("lstm.gmnm.m", 100));
    lcfg.gmnm_out = static_cast<int>(kv.get_long("lstm.gmnm.out", 0));
    lcfg.gmnm_mode = parse_mode(kv.get_str("lstm.gmnm.mode", "ridge"));
    e.model = std::make_unique<LstmModel>(lcfg, rng_init);

    auto task = std::make_unique<SupervisedTask>(
        ds.train_inputs(), ds.train_targets(), ds.test_inputs(),
        ds.test_targets(), LossKind::mse);
    task->set_batch(e.budget.batch);
    e.train_task = std::move(task);
    return e;
  }

  if (e.task == "mnist") {
    std::string dir = kv.get_str("mnist.dir", "");
    if (dir.empty()) {
      const char* env = std::getenv("GMNM_DATA_DIR");
      if (env != nullptr && *env != '\0') dir = env;
    }
    const bool synthetic = kv.get_bool("mnist.synthetic", false);
    const long train_limit = kv.get_long("mnist.train_limit", 10000);
    const long test_limit = kv.get_long("mnist.test_limit", 10000);
    if (dir.empty()) {
      if (!synthetic)
        throw DataError(
            "mnist task: set mnist.dir or GMNM_DATA_DIR, or enable "
            "mnist.synthetic");
      dir = fs::path(kv.require_str("out")).parent_path() / "digits-synth";
      if (!fs::exists(fs::path(dir) / "train-images-idx3-ubyte"))
        synth_digits_write_idx(dir, 10000, 10000, kSynthDigitsSeed);
    }
    Dataset train = mnist_load(dir + "/train-images-idx3-ubyte",
                               dir + "/train-labels-idx1-ubyte", train_limit);
    Dataset test = mnist_load(dir + "/t10k-images-idx3-ubyte",
                              dir + "/t10k-labels-idx1-ubyte", test_limit);
    e.budget.batch = static_cast<int>(kv.get_long("batch", 64));
    e.lr = kv.get_double("lr", 1e-3);

    e.model_kind = "conv";
    ConvConfig cfg;
    cfg.c1 = static_cast<int>(kv.get_long("conv.c1", 16));
    cfg.c2 = static_cast<int>(kv.get_long("conv.c2", 32));
    cfg.head = kv.get_str("conv.head", "dense") == "gmnm" ? ConvHead::gmnm
                                                          : ConvHead::dense;
    cfg.gmnm_m = static_cast<int>(kv.get_long("conv.gmnm.m", 10));
    cfg.gmnm_n = static_cast<int>(kv.get_long("conv.gmnm.n", 1));
    cfg.gmnm_mode = parse_mode(kv.get_str("conv.gmnm.mode", "ridge"));
    auto conv = std::make_unique<ConvModel>(cfg, rng_init);
    conv->init_head_mu_from(train.inputs, rng_init);
    e.model = std::move(conv);

    auto task = std::make_unique<SupervisedTask>(
        train.inputs, train.targets, test.inputs, test.targets,
        LossKind::mse_onehot);
    task->set_batch(e.budget.batch);
    e.train_task = std::move(task);
    return e;
  }

  throw ConfigError(origin + ": unknown task '" + e.task + "'");
}

void write_artifacts(const Experiment& e, const RunRecord& rec) {
  fs::create_directories(e.out_dir);

  {
    std::ofstream csv(e.out_dir + "/metrics.csv");
    if (!csv) throw DataError("cannot write metrics.csv in " + e.out_dir);
    csv << "step,train_loss,test_loss";
    for (const std::string& name : rec.extra_names) csv << "," << name;
    csv << "\n";
    for (const RunRecord::Row& row : rec.rows) {
      csv << row.step << "," << fmt17(row.train_loss) << ","
          << fmt17(row.test_loss);
      for (double v : row.extras) csv << "," << fmt17(v);
      csv << "\n";
    }
  }

  {
    json j;
    j["task"] = e.task;
    j["model"] = e.model_kind;
    j["seed"] = e.seed;
    j["optim"] = e.optim;
    j["lr"] = e.lr;
    j["batch"] = e.budget.batch;
    j["steps_recorded"] = rec.rows.empty() ? 0 : rec.rows.back().step;
    j["params_trainable"] = rec.trainable_params;
    j["params_total"] = rec.total_params;
    j["min_train_loss"] = rec.min_train_loss;
    j["min_test_loss"] = rec.min_test_loss;
    j["final_train_loss"] = rec.final_train_loss;
    j["final_test_loss"] = rec.final_test_loss;
    j["wall_seconds"] = rec.wall_seconds;
    j["extra_names"] = rec.extra_names;
    j["config"] = e.raw;
    std::ofstream out(e.out_dir + "/summary.json");
    if (!out) throw DataError("cannot write summary.json in " + e.out_dir);
    out << j.dump(1) << "\n";
  }

  snapshot_save(*e.model, e.out_dir + "/params.json");

  {
    std::ofstream out(e.out_dir + "/config.txt");
    out << e.raw;
  }
}

void write_nan_abort(const Experiment& e, long step) {
  fs::create_directories(e.out_dir);
  json j;
  j["task"] = e.task;
  j["model"] = e.model_kind;
  j["seed"] = e.seed;
  j["nan_abort_step"] = step;
  j["config"] = e.raw;
  std::ofstream out(e.out_dir + "/summary.json");
  out << j.dump(1) << "\n";
}

}  // namespace

int run_experiment(const std::string& config_path) {
  std::unique_ptr<Experiment> e;
  try {
    KvConfig kv = KvConfig::parse_file(config_path);
    e = std::make_unique<Experiment>(assemble(kv, config_path));
    kv.finish();
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }

  try {
    std::unique_ptr<Optimizer> opt;
    if (e->optim == "sgd")
      opt = std::make_unique<Sgd>(e->lr);
    else
      opt = std::make_unique<Adam>(AdamConfig{e->lr, 0.9, 0.999, 1e-8});
    const RunRecord rec = train(*e->model, *e->train_task, *opt, e->budget);
    write_artifacts(*e, rec);
    std::cout << e->out_dir << ": min_test=" << fmt17(rec.min_test_loss)
              << " final_test=" << fmt17(rec.final_test_loss) << " wall="
              << static_cast<long>(rec.wall_seconds + 0.5) << "s\n";
    return 0;
  } catch (const NanAbort& err) {
    std::cerr << "error: " << err.what() << "\n";
    write_nan_abort(*e, err.step());
    return 3;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

int run_experiments(const std::vector<std::string>& config_paths, int jobs) {
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || config_paths.size() <= 1) {
    int rc = 0;
    for (const std::string& path : config_paths) {
      const int r = run_experiment(path);
      if (rc == 0) rc = r;
    }
    return rc;
  }
  std::mutex mu;
  std::size_t next = 0;
  int rc = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= config_paths.size()) return;
        idx = next++;
      }
      const int r = run_experiment(config_paths[idx]);
      if (r != 0) {
        std::lock_guard<std::mutex> lk(mu);
        if (rc == 0) rc = r;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
  return rc;
}

// ------------------------------------------------------------ gradcheck ---

namespace {

struct CheckSetup {
  std::unique_ptr<Model> model;
  // builds the scalar loss for the fixed batch captured inside
  std::function<int(Tape&, Model&)> loss;
};

CheckSetup make_check(const std::string& kind, std::uint64_t seed) {
  Rng rng(seed);
  CheckSetup setup;

  auto supervised = [&](std::unique_ptr<Model> model, Tensor x, Tensor y,
                        LossKind lk) {
    setup.model = std::move(model);
    setup.loss = [x = std::move(x), y = std::move(y), lk](Tape& t,
                                                          Model& m) -> int {
      const int out = m.forward_tape(t, t.input(x, false));
      return loss_tape(t, lk, out, y);
    };
  };

  if (kind == "gmnm-ridge" || kind == "gmnm-quadratic" ||
      kind == "gmnm-minimal") {
    GmnmConfig cfg;
    cfg.d = 3;
    cfg.m = 4;
    cfg.n = 2;
    cfg.out_dim = 2;
    cfg.mode = kind == "gmnm-quadratic" ? GmnmMode::quadratic
                                        : GmnmMode::ridge;
    cfg.minimal = kind == "gmnm-minimal";
    if (cfg.minimal) cfg.n = 1;
    cfg.domain.assign(3, {-1.0, 1.0});
    auto model = std::make_unique<GmnmModel>(cfg, rng);
    for (double& v : model->params().Pi.span()) v = rng.uniform(-1, 1);
    for (double& v : model->params().b.span()) v = rng.uniform(-0.4, 0.4);
    Tensor x = rng.uniform_tensor({4, 3}, -1, 1);
    Tensor y = rng.uniform_tensor({4, 2}, -1, 1);
    supervised(std::move(model), std::move(x), std::move(y), LossKind::mse);
    return setup;
  }
  if (kind == "mlp") {
    auto model = std::make_unique<MlpModel>(
        MlpConfig{{3, 8, 6, 2}, Act::tanh}, rng);
    Tensor x = rng.uniform_tensor({4, 3}, -1, 1);
    Tensor y = rng.uniform_tensor({4, 2}, -1, 1);
    supervised(std::move(model), std::move(x), std::move(y), LossKind::mse);
    return setup;
  }
  if (kind == "rbf") {
    RbfConfig cfg{3, 5, 2, {}};
    auto model = std::make_unique<RbfModel>(cfg, rng);
    for (double& v : model->weights().span()) v = rng.uniform(-1, 1);
    Tensor x = rng.uniform_tensor({4, 3}, -1, 1);
    Tensor y = rng.uniform_tensor({4, 2}, -1, 1);
    supervised(std::move(model), std::move(x), std::move(y), LossKind::mse);
    return setup;
  }
  if (kind == "conv-dense" || kind == "conv-gmnm") {
    ConvConfig cfg;
    cfg.h = 10;
    cfg.w = 10;
    cfg.c1 = 2;
    cfg.c2 = 3;
    cfg.classes = 2;
    cfg.head = kind == "conv-gmnm" ? ConvHead::gmnm : ConvHead::dense;
    cfg.gmnm_m = 3;
    cfg.gmnm_n = 1;
    auto model = std::make_unique<ConvModel>(cfg, rng);
    if (cfg.head == ConvHead::gmnm)
      for (double& v : model->head_gmnm()->Pi.span()) v = rng.uniform(-1, 1);
    Tensor x = rng.uniform_tensor({2, 10, 10, 1}, 0, 1);
    Tensor y({2}, {0, 1});
    supervised(std::move(model), std::move(x), std::move(y),
               LossKind::mse_onehot);
    return setup;
  }
  if (kind == "lstm" || kind == "lstm-gmnm") {
    LstmConfig cfg;
    cfg.features = 3;
    cfg.window = 6;
    cfg.units = 3;
    cfg.gmnm_head = kind == "lstm-gmnm";
    cfg.gmnm_m = 4;
    auto model = std::make_unique<LstmModel>(cfg, rng);
    if (cfg.gmnm_head)
      for (double& v : model->head_gmnm()->Pi.span()) v = rng.uniform(-1, 1);
    Tensor x = rng.uniform_tensor({3, 6, 3}, -1, 1);
    Tensor y = rng.uniform_tensor({3, 1}, -1, 1);
    supervised(std::move(model), std::move(x), std::move(y), LossKind::mse);
    return setup;
  }
  if (kind == "gmnm-pde" || kind == "mlp-pinn") {
    if (kind == "gmnm-pde") {
      GmnmConfig cfg;
      cfg.d = 2;
      cfg.m = 6;
      cfg.minimal = true;
      cfg.n = 1;
      cfg.domain.assign(2, {-1.0, 1.0});
      auto model = std::make_unique<GmnmModel>(cfg, rng);
      for (double& v : model->params().Pi.span()) v = rng.uniform(-1, 1);
      setup.model = std::move(model);
    } else {
      setup.model = std::make_unique<MlpModel>(
          MlpConfig{{2, 7, 5, 1}, Act::tanh}, rng);
    }
    Tensor xb = pde_sample_boundary(4, rng);
    Tensor xi = pde_sample_interior(6, rng);
    Tensor both({10, 2});
    for (std::size_t i = 0; i < 8; ++i) both[i] = xb[i];
    for (std::size_t i = 0; i < 12; ++i) both[8 + i] = xi[i];
    Tensor rhs({6, 1});
    for (std::size_t i = 0; i < 6; ++i)
      rhs[i] = pde_rhs(xi[2 * i], xi[2 * i + 1]);
    setup.loss = [both = std::move(both), rhs = std::move(rhs)](
                     Tape& t, Model& m) -> int {
      int lap = -1;
      const int out = m.forward_tape_with_laplacian(t, t.input(both, false),
                                                    &lap);
      const int out_b = t.slice_rows(out, 0, 4);
      const int lap_i = t.slice_rows(lap, 4, 6);
      const int zero = t.input(Tensor({4, 1}), false);
      return t.add(t.mse(out_b, zero), t.mse(lap_i, t.input(rhs, false)));
    };
    return setup;
  }
  throw ConfigError("gradcheck: unknown model kind '" + kind + "'");
}

}  // namespace

std::vector<std::string> gradcheck_kinds() {
  return {"gmnm-ridge", "gmnm-quadratic", "gmnm-minimal", "mlp",
          "rbf",        "conv-dense",     "conv-gmnm",    "lstm",
          "lstm-gmnm",  "gmnm-pde",       "mlp-pinn"};
}

GradcheckReport gradcheck(const std::string& kind, std::uint64_t seed) {
  CheckSetup setup = make_check(kind, seed);
  Model& model = *setup.model;

  Tape t;
  const int loss = setup.loss(t, model);
  t.backward(loss);
  const std::vector<ParamBlock> blocks = model.param_blocks();
  const std::vector<int>& nodes = model.tape_param_nodes();

  GradcheckReport rep;
  rep.kind = kind;
  rep.seed = seed;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    GradcheckBlock rb;
    rb.name = blocks[bi].name;
    if (!blocks[bi].trainable) {
      rb.frozen = true;
      rep.blocks.push_back(rb);
      continue;
    }
    const Tensor grad = t.grad(nodes[bi]);
    Tensor& value = *blocks[bi].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double x0 = value[i];
      const double h = 1e-5 * std::max(1.0, std::abs(x0));
      Tape tp;
      value[i] = x0 + h;
      const double fp = tp.value(setup.loss(tp, model))[0];
      Tape tm;
      value[i] = x0 - h;
      const double fm = tm.value(setup.loss(tm, model))[0];
      value[i] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = grad[i];
      const double err = std::abs(fd - g);
      if (std::max(std::abs(fd), std::abs(g)) < 1e-6)
        rb.max_abs = std::max(rb.max_abs, err);
      else
        rb.max_rel =
            std::max(rb.max_rel, err / std::max(std::abs(fd), std::abs(g)));
    }
    rep.blocks.push_back(rb);
  }
  return rep;
}

double GradcheckReport::worst_rel() const {
  double w = 0.0;
  for (const GradcheckBlock& b : blocks)
    if (!b.frozen) w = std::max(w, b.max_rel);
  return w;
}

bool GradcheckReport::ok(double tol) const {
  for (const GradcheckBlock& b : blocks) {
    if (b.frozen) continue;
    if (b.max_rel > tol || b.max_abs > 1e-8) return false;
  }
  return true;
}

std::string GradcheckReport::text() const {
  std::ostringstream out;
  out << "gradcheck " << kind << " (seed " << seed << ")\n";
  for (const GradcheckBlock& b : blocks) {
    if (b.frozen) {
      out << "  " << b.name << ": frozen, skipped\n";
    } else {
      out << "  " << b.name << ": max_rel=" << fmt17(b.max_rel)
          << " max_abs=" << fmt17(b.max_abs) << "\n";
    }
  }
  out << (ok() ? "  OK" : "  FAIL") << "\n";
  return out.str();
}

// --------------------------------------------------------------- report ---

namespace {

struct ReportRow {
  std::string name;
  long params = 0;
  double min_train = 0.0;
  double min_test = 0.0;
};

std::vector<ReportRow> collect_rows(const std::vector<std::string>& dirs) {
  std::vector<ReportRow> rows;
  for (const std::string& dir : dirs) {
    const std::string path = dir + "/summary.json";
    std::ifstream in(path);
    if (!in) throw DataError("missing summary: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError("corrupt summary " + path + ": " + e.what());
    }
    ReportRow row;
    row.name = fs::path(dir).filename().string();
    if (row.name.empty()) row.name = dir;
    try {
      row.params = j.at("params_trainable").get<long>();
      row.min_train = j.at("min_train_loss").get<double>();
      row.min_test = j.at("min_test_loss").get<double>();
    } catch (const json::exception& e) {
      throw DataError("summary " + path + " lacks fields: " + e.what());
    }
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& a, const ReportRow& b) {
                     return a.min_test < b.min_test;
                   });
  return rows;
}

}  // namespace

std::string report_text(const std::vector<std::string>& run_dirs) {
  const auto rows = collect_rows(run_dirs);
  std::size_t name_w = 4;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream out;
  out << std::left;
  out.width(static_cast<std::streamsize>(name_w));
  out << "name";
  out << "  params      min_train     min_test\n";
  for (const auto& r : rows) {
    out.width(static_cast<std::streamsize>(name_w));
    out << r.name;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "  %8ld  %12.5e  %12.5e", r.params,
                  r.min_train, r.min_test);
    out << buf << "\n";
  }
  return out.str();
}

std::string report_csv(const std::vector<std::string>& run_dirs) {
  const auto rows = collect_rows(run_dirs);
  std::ostringstream out;
  out << "name,params,min_train,min_test\n";
  for (const auto& r : rows)
    out << r.name << "," << r.params << "," << fmt17(r.min_train) << ","
        << fmt17(r.min_test) << "\n";
  return out.str();
}

}  // namespace gmnmlab
