#include "optim.hpp"

#include <chrono>
#include <cmath>

#include "error.hpp"

namespace gmnmlab {

void Sgd::step(const std::vector<ParamBlock>& blocks,
               const std::vector<Tensor>& grads) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].trainable) continue;
    Tensor& p = *blocks[i].value;
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw ShapeError("sgd: misaligned gradient");
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr_ * g[j];
  }
}

void Adam::step(const std::vector<ParamBlock>& blocks,
                const std::vector<Tensor>& grads) {
  if (m_.empty()) {
    m_.resize(blocks.size());
    v_.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      m_[i] = Tensor::zeros_like(*blocks[i].value);
      v_[i] = Tensor::zeros_like(*blocks[i].value);
    }
  }
  if (m_.size() != blocks.size())
    throw ShapeError("adam: block count changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].trainable) continue;
    Tensor& p = *blocks[i].value;
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw ShapeError("adam: misaligned gradient");
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void TrainBudget::validate() const {
  // steps == epochs == 0 is allowed: the run just records initial losses
  if (steps < 0 || epochs < 0)
    throw ConfigError("budget: negative step count");
  if (steps > 0 && epochs > 0)
    throw ConfigError("budget: steps and epochs are exclusive");
  if (batch < 0 || eval_every < 1) throw ConfigError("budget: bad cadence");
}

long TrainTask::steps_per_epoch(int batch) const {
  const long n = train_size();
  if (batch <= 0 || n == 0) return 1;
  return (n + batch - 1) / batch;
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx) {
  std::vector<std::size_t> shape = t.shape();
  shape[0] = idx.size();
  Tensor out(std::move(shape));
  const std::size_t row = t.size() / t.dim(0);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < row; ++j)
      out[i * row + j] = t[idx[i] * row + j];
  return out;
}

SupervisedTask::SupervisedTask(Tensor xtr, Tensor ytr, Tensor xte, Tensor yte,
                               LossKind loss)
    : xtr_(std::move(xtr)),
      ytr_(std::move(ytr)),
      xte_(std::move(xte)),
      yte_(std::move(yte)),
      loss_(loss) {
  if (xtr_.dim(0) != ytr_.dim(0) || xte_.dim(0) != yte_.dim(0))
    throw ShapeError("supervised task: inputs/targets row mismatch");
}

int SupervisedTask::build_step_loss(Tape& t, Model& model, Rng& rng,
                                    long /*step*/) {
  if (batch_ <= 0 || static_cast<std::size_t>(batch_) >= xtr_.dim(0)) {
    const int out = model.forward_tape(t, t.input(xtr_, false));
    return loss_tape(t, loss_, out, ytr_);
  }
  // minibatch: epoch-wise reshuffled order
  if (order_.size() != xtr_.dim(0)) {
    order_.resize(xtr_.dim(0));
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    cursor_ = order_.size();  // trigger first shuffle
  }
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch_));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (cursor_ >= order_.size()) {
      rng.shuffle(order_);
      cursor_ = 0;
    }
    idx[k] = order_[cursor_++];
  }
  const Tensor xb = gather_rows(xtr_, idx);
  const Tensor yb = gather_rows(ytr_, idx);
  const int out = model.forward_tape(t, t.input(xb, false));
  return loss_tape(t, loss_, out, yb);
}

double SupervisedTask::eval_loss(Model& model, const Tensor& x,
                                 const Tensor& y) {
  // chunked so large eval sets do not blow up tape memory
  const std::size_t n = x.dim(0);
  const std::size_t chunk = 1000;
  if (n <= chunk) return loss_value(loss_, model.forward(x), y);
  double acc = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t at = 0; at < n; at += chunk) {
    const std::size_t take = std::min(chunk, n - at);
    idx.resize(take);
    for (std::size_t i = 0; i < take; ++i) idx[i] = at + i;
    const Tensor xb = gather_rows(x, idx);
    const Tensor yb = gather_rows(y, idx);
    acc += loss_value(loss_, model.forward(xb), yb) *
           static_cast<double>(take);
  }
  return acc / static_cast<double>(n);
}

double SupervisedTask::train_loss(Model& model) {
  return eval_loss(model, xtr_, ytr_);
}
double SupervisedTask::test_loss(Model& model) {
  return eval_loss(model, xte_, yte_);
}

RunRecord train(Model& model, TrainTask& task, Optimizer& opt,
                const TrainBudget& budget) {
  budget.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(budget.seed);

  const long total_steps =
      budget.steps > 0 ? budget.steps
                       : budget.epochs * task.steps_per_epoch(budget.batch);

  RunRecord rec;
  rec.trainable_params = model.param_count(true);
  rec.total_params = model.param_count(false);

  // snapshot frozen tensors; they must be bit-identical at the end
  std::vector<std::pair<std::string, Tensor>> frozen;
  for (const ParamBlock& blk : model.param_blocks())
    if (!blk.trainable) frozen.emplace_back(blk.name, *blk.value);

  auto record = [&](long step) {
    RunRecord::Row row;
    row.step = step;
    row.train_loss = task.train_loss(model);
    row.test_loss = task.test_loss(model);
    for (const auto& [name, value] : task.extras(model)) {
      if (rec.rows.empty()) rec.extra_names.push_back(name);
      row.extras.push_back(value);
    }
    if (!std::isfinite(row.train_loss) || !std::isfinite(row.test_loss))
      throw NanAbort(step);
    rec.min_train_loss = std::min(rec.min_train_loss, row.train_loss);
    rec.min_test_loss = std::min(rec.min_test_loss, row.test_loss);
    rec.final_train_loss = row.train_loss;
    rec.final_test_loss = row.test_loss;
    rec.rows.push_back(std::move(row));
  };

  record(0);
  for (long step = 1; step <= total_steps; ++step) {
    try {
      Tape tape;
      const int loss = task.build_step_loss(tape, model, rng, step - 1);
      if (!std::isfinite(tape.value(loss)[0])) throw NanAbort(step);
      tape.backward(loss);
      const std::vector<ParamBlock> blocks = model.param_blocks();
      const std::vector<int>& nodes = model.tape_param_nodes();
      if (nodes.size() != blocks.size())
        throw Error("train: tape nodes misaligned with param blocks");
      std::vector<Tensor> grads(blocks.size());
      for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].trainable) grads[i] = tape.grad(nodes[i]);
      opt.step(blocks, grads);
    } catch (const NonFiniteError&) {
      throw NanAbort(step);
    }
    if (step % budget.eval_every == 0 || step == total_steps) record(step);
  }

  for (const auto& [name, saved] : frozen) {
    bool found = false;
    for (const ParamBlock& blk : model.param_blocks())
      if (blk.name == name) {
        found = true;
        if (!saved.bit_equal(*blk.value))
          throw Error("frozen parameter '" + name + "' changed during training");
      }
    if (!found) throw Error("frozen parameter '" + name + "' disappeared");
  }

  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

}  // namespace gmnmlab
