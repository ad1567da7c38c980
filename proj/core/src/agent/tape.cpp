#include "asrrl/agent/tape.hpp"

#include <cmath>
#include <utility>

#include "asrrl/core/error.hpp"

namespace asrrl::agent {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::push(Mat value, std::function<void(Tape&, const Mat&)> back) {
  Node node;
  node.value = std::move(value);
  if (record_) node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Mat& g) {
  Mat& dst = nodes_[id].grad;
  if (dst.size() == 0) {
    dst = g;
  } else {
    dst += g;
  }
}

Var Tape::constant(Mat value) { return push(std::move(value), nullptr); }

Var Tape::param(const Mat& value, Mat* sink) {
  if (sink == nullptr) return push(value, nullptr);
  return push(value, [sink](Tape&, const Mat& g) {
    if (sink->size() == 0) {
      *sink = g;
    } else {
      *sink += g;
    }
  });
}

void Tape::backward(Var out) {
  if (!record_) throw Error("Tape::backward on a non-recording tape");
  const Mat& v = value(out);
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("Tape::backward: output must be a scalar");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[out.id].grad = Mat::Ones(1, 1);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) {
      // the closure may accumulate into earlier nodes only
      const Mat g = n.grad;
      n.back(*this, g);
    }
  }
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, -g);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.cwiseProduct(t.value(b)));
    t.accumulate(b.id, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::add_row(Var a, Var row) {
  const Mat& av = value(a);
  const Mat& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: row must be 1x" + std::to_string(av.cols()));
  }
  Mat out = av.rowwise() + rv.row(0);
  return push(std::move(out), [a, row](Tape& t, const Mat& g) {
    t.accumulate(a.id, g);
    t.accumulate(row.id, g.colwise().sum());
  });
}

Var Tape::mul_row(Var a, Var row) {
  const Mat& av = value(a);
  const Mat& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("mul_row: row must be 1x" + std::to_string(av.cols()));
  }
  Mat out = av.array().rowwise() * rv.row(0).array();
  return push(std::move(out), [a, row](Tape& t, const Mat& g) {
    const Mat& r = t.value(row);
    Mat ga = g.array().rowwise() * r.row(0).array();
    t.accumulate(a.id, ga);
    t.accumulate(row.id, g.cwiseProduct(t.value(a)).colwise().sum());
  });
}

Var Tape::broadcast_rows(Var row, std::size_t n) {
  const Mat& rv = value(row);
  if (rv.rows() != 1) throw DimensionError("broadcast_rows: expected 1 row");
  Mat out = rv.replicate(static_cast<Eigen::Index>(n), 1);
  return push(std::move(out), [row](Tape& t, const Mat& g) {
    t.accumulate(row.id, g.colwise().sum());
  });
}

Var Tape::scale(Var a, double c) {
  return push(value(a) * c,
              [a, c](Tape& t, const Mat& g) { t.accumulate(a.id, g * c); });
}

Var Tape::add_scalar(Var a, double c) {
  Mat out = value(a).array() + c;
  return push(std::move(out),
              [a](Tape& t, const Mat& g) { t.accumulate(a.id, g); });
}

Var Tape::tanh(Var a) {
  Mat out = value(a).array().tanh();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, self](Tape& t, const Mat& g) {
    const Mat& y = t.nodes_[self].value;
    Mat ga = g.array() * (1.0 - y.array().square());
    t.accumulate(a.id, ga);
  });
}

Var Tape::exp(Var a) {
  Mat out = value(a).array().exp();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, self](Tape& t, const Mat& g) {
    t.accumulate(a.id, g.cwiseProduct(t.nodes_[self].value));
  });
}

Var Tape::square(Var a) {
  Mat out = value(a).array().square();
  return push(std::move(out), [a](Tape& t, const Mat& g) {
    t.accumulate(a.id, 2.0 * g.cwiseProduct(t.value(a)));
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Mat out = value(a).cwiseMax(lo).cwiseMin(hi);
  return push(std::move(out), [a, lo, hi](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    Mat ga = (x.array() >= lo && x.array() <= hi).select(g, 0.0);
    t.accumulate(a.id, ga);
  });
}

Var Tape::min(Var a, Var b) {
  require_same_shape(value(a), value(b), "min");
  Mat out = value(a).cwiseMin(value(b));
  return push(std::move(out), [a, b](Tape& t, const Mat& g) {
    // ties route the gradient to the first argument
    const auto pick_a = (t.value(a).array() <= t.value(b).array());
    t.accumulate(a.id, pick_a.select(g, 0.0));
    t.accumulate(b.id, pick_a.select(Mat::Zero(g.rows(), g.cols()), g));
  });
}

Var Tape::matmul(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions " +
                         std::to_string(av.cols()) + " vs " +
                         std::to_string(bv.rows()));
  }
  Mat out = av * bv;
  return push(std::move(out), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a.id, g * t.value(b).transpose());
    t.accumulate(b.id, t.value(a).transpose() * g);
  });
}

Var Tape::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), [a](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    t.accumulate(a.id, Mat::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var Tape::mean(Var a) {
  const Mat& x = value(a);
  if (x.size() == 0) throw DimensionError("mean: empty input");
  const double n = static_cast<double>(x.size());
  Mat out(1, 1);
  out(0, 0) = x.sum() / n;
  return push(std::move(out), [a, n](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    t.accumulate(a.id, Mat::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Var Tape::sum_rows(Var a) {
  Mat out = value(a).rowwise().sum();
  return push(std::move(out), [a](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    t.accumulate(a.id, g.replicate(1, x.cols()));
  });
}

Var Tape::slice_cols(Var a, std::size_t offset, std::size_t count) {
  const Mat& x = value(a);
  if (offset + count > static_cast<std::size_t>(x.cols())) {
    throw DimensionError("slice_cols: range past the last column");
  }
  const auto off = static_cast<Eigen::Index>(offset);
  const auto cnt = static_cast<Eigen::Index>(count);
  Mat out = x.middleCols(off, cnt);
  return push(std::move(out), [a, off, cnt](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    Mat ga = Mat::Zero(x.rows(), x.cols());
    ga.middleCols(off, cnt) = g;
    t.accumulate(a.id, ga);
  });
}

Var Tape::layer_norm(Var a, double eps) {
  const Mat& x = value(a);
  const auto m = static_cast<double>(x.cols());
  Eigen::VectorXd mu = x.rowwise().mean();
  Mat centered = x.colwise() - mu;
  Eigen::VectorXd inv =
      ((centered.array().square().rowwise().sum() / m) + eps).rsqrt();
  Mat y = centered.array().colwise() * inv.array();
  return push(y, [a, y, inv, m](Tape& t, const Mat& g) {
    // dx = inv * (g - mean(g) - y * mean(g . y))
    Eigen::VectorXd gm = g.rowwise().mean();
    Eigen::VectorXd gy = g.cwiseProduct(y).rowwise().sum() / m;
    Mat dx = g.colwise() - gm;
    dx -= (y.array().colwise() * gy.array()).matrix();
    dx = dx.array().colwise() * inv.array();
    t.accumulate(a.id, dx);
  });
}

namespace {

using Strided = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
using ConstStrided = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

// Rows t, t + T, t + 2T, ... of a (n*T) x h matrix.
ConstStrided token_rows(const Mat& m, Eigen::Index t, Eigen::Index T) {
  return ConstStrided(m.data() + t * m.cols(), m.rows() / T, m.cols(),
                      Eigen::OuterStride<>(T * m.cols()));
}
Strided token_rows(Mat& m, Eigen::Index t, Eigen::Index T) {
  return Strided(m.data() + t * m.cols(), m.rows() / T, m.cols(),
                 Eigen::OuterStride<>(T * m.cols()));
}

}  // namespace

Var Tape::interleave(const std::vector<Var>& tokens) {
  if (tokens.empty()) throw DimensionError("interleave: no tokens");
  const Mat& first = value(tokens.front());
  const Eigen::Index n = first.rows();
  const Eigen::Index h = first.cols();
  const auto count = static_cast<Eigen::Index>(tokens.size());
  Mat out(n * count, h);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Mat& tk = value(tokens[k]);
    require_same_shape(first, tk, "interleave");
    token_rows(out, k, count) = tk;
  }
  return push(std::move(out), [tokens, count](Tape& t, const Mat& g) {
    for (Eigen::Index k = 0; k < count; ++k) {
      t.accumulate(tokens[k].id, Mat(token_rows(g, k, count)));
    }
  });
}

Var Tape::mean_pool(Var a, std::size_t tokens) {
  const Mat& x = value(a);
  const auto count = static_cast<Eigen::Index>(tokens);
  if (count == 0 || x.rows() % count != 0) {
    throw DimensionError("mean_pool: rows not a multiple of token count");
  }
  const Eigen::Index n = x.rows() / count;
  const double w = 1.0 / static_cast<double>(count);
  Mat out = Mat::Zero(n, x.cols());
  for (Eigen::Index k = 0; k < count; ++k) out += token_rows(x, k, count);
  out *= w;
  return push(std::move(out), [a, count, w](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    Mat ga(x.rows(), x.cols());
    for (Eigen::Index k = 0; k < count; ++k) token_rows(ga, k, count) = g * w;
    t.accumulate(a.id, ga);
  });
}

Var Tape::attention(Var q, Var k, Var v, std::size_t tokens) {
  const Mat& Q = value(q);
  const Mat& K = value(k);
  const Mat& V = value(v);
  require_same_shape(Q, K, "attention");
  require_same_shape(Q, V, "attention");
  const auto T = static_cast<Eigen::Index>(tokens);
  if (T == 0 || Q.rows() % T != 0) {
    throw DimensionError("attention: rows not a multiple of token count");
  }
  const Eigen::Index n = Q.rows() / T;
  const double s = 1.0 / std::sqrt(static_cast<double>(Q.cols()));

  // The token count is tiny (one per state segment), so the work is laid out
  // as T*T batched row-wise dot products rather than n small matmuls.
  // probs column a*T + b holds softmax_b(q_a . k_b) for every sample.
  Mat probs(n, T * T);
  for (Eigen::Index a = 0; a < T; ++a) {
    for (Eigen::Index b = 0; b < T; ++b) {
      probs.col(a * T + b) =
          token_rows(Q, a, T).cwiseProduct(token_rows(K, b, T)).rowwise().sum() * s;
    }
    auto block = probs.middleCols(a * T, T);
    Eigen::VectorXd top = block.rowwise().maxCoeff();
    block = (block.colwise() - top).array().exp().matrix();
    Eigen::VectorXd total = block.rowwise().sum();
    block = block.array().colwise() / total.array();
  }
  Mat out = Mat::Zero(Q.rows(), Q.cols());
  for (Eigen::Index a = 0; a < T; ++a) {
    auto oa = token_rows(out, a, T);
    for (Eigen::Index b = 0; b < T; ++b) {
      oa += (token_rows(V, b, T).array().colwise() *
             probs.col(a * T + b).array()).matrix();
    }
  }
  return push(std::move(out), [q, k, v, probs, T, s](Tape& t, const Mat& g) {
    const Mat& Q = t.value(q);
    const Mat& K = t.value(k);
    const Mat& V = t.value(v);
    const Eigen::Index n = probs.rows();
    Mat dQ = Mat::Zero(Q.rows(), Q.cols());
    Mat dK = Mat::Zero(K.rows(), K.cols());
    Mat dV = Mat::Zero(V.rows(), V.cols());
    Mat dS(n, T * T);
    for (Eigen::Index a = 0; a < T; ++a) {
      const auto ga = token_rows(g, a, T);
      for (Eigen::Index b = 0; b < T; ++b) {
        const auto p = probs.col(a * T + b);
        token_rows(dV, b, T) += (ga.array().colwise() * p.array()).matrix();
        dS.col(a * T + b) = ga.cwiseProduct(token_rows(V, b, T)).rowwise().sum();
      }
      // softmax backward within the row block
      auto dp = dS.middleCols(a * T, T);
      const auto pa = probs.middleCols(a * T, T);
      Eigen::VectorXd inner = dp.cwiseProduct(pa).rowwise().sum();
      dp = pa.cwiseProduct(Mat(dp.colwise() - inner)) * s;
      for (Eigen::Index b = 0; b < T; ++b) {
        const auto ds = dS.col(a * T + b);
        token_rows(dQ, a, T) +=
            (token_rows(K, b, T).array().colwise() * ds.array()).matrix();
        token_rows(dK, b, T) +=
            (token_rows(Q, a, T).array().colwise() * ds.array()).matrix();
      }
    }
    t.accumulate(q.id, dQ);
    t.accumulate(k.id, dK);
    t.accumulate(v.id, dV);
  });
}

}  // namespace asrrl::agent
