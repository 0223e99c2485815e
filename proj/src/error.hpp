#pragma once

#include <stdexcept>
#include <string>

namespace gmnmlab {

// Error taxonomy mirrors the CLI exit codes: config/parse problems exit 1,
// missing or malformed data files exit 2, NaN aborts exit 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Raised the moment an op produces a NaN or Inf; carries the producing op.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& op, long node_id)
      : Error("non-finite value produced by op '" + op + "' (node " +
              std::to_string(node_id) + ")"),
        op_(op),
        node_id_(node_id) {}
  const std::string& op() const { return op_; }
  long node_id() const { return node_id_; }

 private:
  std::string op_;
  long node_id_;
};

class NanAbort : public Error {
 public:
  explicit NanAbort(long step)
      : Error("training aborted: non-finite loss at step " +
              std::to_string(step)),
        step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace gmnmlab
