#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "model.hpp"
#include "nets.hpp"
#include "rng.hpp"

namespace gmnmlab {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // blocks and grads are aligned; frozen blocks carry trainable = false and
  // must not be touched.
  virtual void step(const std::vector<ParamBlock>& blocks,
                    const std::vector<Tensor>& grads) = 0;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(const std::vector<ParamBlock>& blocks,
            const std::vector<Tensor>& grads) override;

 private:
  double lr_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam : public Optimizer {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(const std::vector<ParamBlock>& blocks,
            const std::vector<Tensor>& grads) override;
  long step_count() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;  // per-block moments, sized on first step
};

struct TrainBudget {
  long steps = 0;   // either steps or epochs must be set
  long epochs = 0;
  int batch = 0;    // 0 = full batch
  long eval_every = 100;
  std::uint64_t seed = 0;
  void validate() const;
};

struct RunRecord {
  struct Row {
    long step = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    std::vector<double> extras;
  };
  std::vector<std::string> extra_names;
  std::vector<Row> rows;
  double min_train_loss = std::numeric_limits<double>::infinity();
  double min_test_loss = std::numeric_limits<double>::infinity();
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  long trainable_params = 0;
  long total_params = 0;
  double wall_seconds = 0.0;
};

// One experiment's data and loss assembly. build_step_loss constructs the
// scalar loss node for an optimization step (sampling whatever batch it
// needs from the run rng); the loss getters evaluate full train/test losses
// outside the tape.
class TrainTask {
 public:
  virtual ~TrainTask() = default;
  virtual int build_step_loss(Tape& t, Model& model, Rng& rng, long step) = 0;
  virtual double train_loss(Model& model) = 0;
  virtual double test_loss(Model& model) = 0;
  virtual std::vector<std::pair<std::string, double>> extras(Model&) {
    return {};
  }
  virtual long steps_per_epoch(int batch) const;
  virtual long train_size() const { return 0; }
};

// Plain supervised regression/classification over fixed train/test splits.
// Minibatches are drawn by reshuffling the training order every epoch.
class SupervisedTask : public TrainTask {
 public:
  SupervisedTask(Tensor xtr, Tensor ytr, Tensor xte, Tensor yte,
                 LossKind loss);

  int build_step_loss(Tape& t, Model& model, Rng& rng, long step) override;
  double train_loss(Model& model) override;
  double test_loss(Model& model) override;
  long train_size() const override {
    return static_cast<long>(xtr_.dim(0));
  }
  void set_batch(int batch) { batch_ = batch; }

 private:
  double eval_loss(Model& model, const Tensor& x, const Tensor& y);
  Tensor xtr_, ytr_, xte_, yte_;
  LossKind loss_;
  int batch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Runs the optimization loop: rebuilds the tape every step, applies the
// optimizer to trainable blocks only, records losses at the evaluation
// cadence (step 0 and the final step always included), and verifies that
// frozen tensors are bit-identical at the end. A non-finite loss aborts
// with the offending step in a NanAbort.
RunRecord train(Model& model, TrainTask& task, Optimizer& opt,
                const TrainBudget& budget);

// Gathers rows `idx` of a [N,...] tensor into a new tensor.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx);

}  // namespace gmnmlab
