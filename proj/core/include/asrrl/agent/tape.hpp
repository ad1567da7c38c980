#ifndef ASRRL_AGENT_TAPE_HPP_
#define ASRRL_AGENT_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace asrrl::agent {

// Row-major batches: one sample per row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Var {
  int id = -1;
};

// Minimal reverse-mode autodiff over dense matrices. Only the operations the
// policy, value head and PPO loss need are provided. A tape built with
// record = false evaluates forward only and keeps no closures, which is what
// rollout workers use.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Mat value);
  // Gradient flowing into this leaf is accumulated into *sink (which must
  // outlive backward()); sink may be null for a frozen parameter.
  Var param(const Mat& value, Mat* sink);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  // Seeds d(out)/d(out) = 1; out must be 1x1.
  void backward(Var out);

  // elementwise / broadcasting
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var a, Var row);  // a: n x m, row: 1 x m
  Var mul_row(Var a, Var row);
  Var broadcast_rows(Var row, std::size_t n);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var tanh(Var a);
  Var exp(Var a);
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);
  Var min(Var a, Var b);

  // linear algebra and reductions
  Var matmul(Var a, Var b);
  Var sum(Var a);
  Var mean(Var a);
  Var sum_rows(Var a);  // n x m -> n x 1
  Var slice_cols(Var a, std::size_t offset, std::size_t count);

  // Row-wise normalization to zero mean, unit variance (no affine part).
  Var layer_norm(Var a, double eps = 1e-5);
  // tokens[t] is n x h; result is (n*T) x h with row i*T + t.
  Var interleave(const std::vector<Var>& tokens);
  // (n*T) x h -> n x h
  Var mean_pool(Var a, std::size_t tokens);
  // Single-head scaled dot-product attention within each group of
  // `tokens` consecutive rows.
  Var attention(Var q, Var k, Var v, std::size_t tokens);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, const Mat&)> back;
  };

  Var push(Mat value, std::function<void(Tape&, const Mat&)> back);
  void accumulate(int id, const Mat& g);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace asrrl::agent

#endif  // ASRRL_AGENT_TAPE_HPP_
