/* Copyright 2026 The lowres-tts Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "autograd.hpp"

#include <algorithm>
#include <limits>

namespace lrtts::ad {

void Node::Accumulate(const Mat& g) {
  if (!needs_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Tape::Constant(Mat value) {
  nodes_.emplace_back();
  nodes_.back().value = std::move(value);
  return Var(this, &nodes_.back());
}

Var Tape::Leaf(Mat value) {
  nodes_.emplace_back();
  nodes_.back().value = std::move(value);
  nodes_.back().needs_grad = true;
  return Var(this, &nodes_.back());
}

Var Tape::Make(Mat value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward) {
  return Make(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::Make(Mat value, const std::vector<Var>& inputs, std::function<void(Node&)> backward) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.needs_grad(); });
  if (n.needs_grad) n.backward = std::move(backward);
  return Var(this, &n);
}

void Tape::Backward(const Var& loss) {
  Require(loss.rows() == 1 && loss.cols() == 1, "Backward expects a scalar loss");
  if (!loss.needs_grad()) return;
  loss.node()->grad = Mat::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (n.backward && n.grad.size() != 0) n.backward(n);
  }
}

Bound::Bound(Tape& tape, const std::map<std::string, Mat>& params, bool trainable) : tape_(&tape) {
  for (const auto& [name, value] : params) {
    vars_.emplace(name, trainable ? tape.Leaf(value) : tape.Constant(value));
  }
}

const Var& Bound::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) Fail(ErrorKind::kShape, "missing parameter '" + name + "'");
  return it->second;
}

std::map<std::string, Mat> Bound::Gradients() const {
  std::map<std::string, Mat> out;
  for (const auto& [name, v] : vars_) {
    if (v.grad().size() != 0) {
      out.emplace(name, v.grad());
    } else {
      out.emplace(name, Mat::Zero(v.rows(), v.cols()));
    }
  }
  return out;
}

namespace {

Tape* TapeOf(const Var& a) { return a.tape(); }

void CheckSame(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    Fail(ErrorKind::kShape, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

}  // namespace

Var MatMul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) Fail(ErrorKind::kShape, "MatMul: inner dimension mismatch");
  Node* na = a.node();
  Node* nb = b.node();
  return TapeOf(a)->Make(a.value() * b.value(), {a, b}, [na, nb](Node& n) {
    if (na->needs_grad) na->Accumulate(n.grad * nb->value.transpose());
    if (nb->needs_grad) nb->Accumulate(na->value.transpose() * n.grad);
  });
}

Var Add(const Var& a, const Var& b) {
  CheckSame(a, b, "Add");
  Node* na = a.node();
  Node* nb = b.node();
  return TapeOf(a)->Make(a.value() + b.value(), {a, b}, [na, nb](Node& n) {
    na->Accumulate(n.grad);
    nb->Accumulate(n.grad);
  });
}

Var Sub(const Var& a, const Var& b) {
  CheckSame(a, b, "Sub");
  Node* na = a.node();
  Node* nb = b.node();
  return TapeOf(a)->Make(a.value() - b.value(), {a, b}, [na, nb](Node& n) {
    na->Accumulate(n.grad);
    if (nb->needs_grad) nb->Accumulate(-n.grad);
  });
}

Var Mul(const Var& a, const Var& b) {
  CheckSame(a, b, "Mul");
  Node* na = a.node();
  Node* nb = b.node();
  return TapeOf(a)->Make(a.value().cwiseProduct(b.value()), {a, b}, [na, nb](Node& n) {
    if (na->needs_grad) na->Accumulate(n.grad.cwiseProduct(nb->value));
    if (nb->needs_grad) nb->Accumulate(n.grad.cwiseProduct(na->value));
  });
}

Var Scale(const Var& a, double s) {
  Node* na = a.node();
  return TapeOf(a)->Make(a.value() * s, {a}, [na, s](Node& n) { na->Accumulate(n.grad * s); });
}

Var AddRow(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) Fail(ErrorKind::kShape, "AddRow: bias shape mismatch");
  Node* na = a.node();
  Node* nr = row.node();
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return TapeOf(a)->Make(std::move(out), {a, row}, [na, nr](Node& n) {
    na->Accumulate(n.grad);
    if (nr->needs_grad) nr->Accumulate(n.grad.colwise().sum());
  });
}

Var MulConst(const Var& a, const Mat& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) Fail(ErrorKind::kShape, "MulConst: shape mismatch");
  Node* na = a.node();
  return TapeOf(a)->Make(a.value().cwiseProduct(c), {a},
                         [na, c](Node& n) { na->Accumulate(n.grad.cwiseProduct(c)); });
}

Var MulColConst(const Var& a, const Mat& col) {
  if (col.rows() != a.rows() || col.cols() != 1) Fail(ErrorKind::kShape, "MulColConst: shape mismatch");
  Node* na = a.node();
  Mat out = a.value().array().colwise() * col.col(0).array();
  return TapeOf(a)->Make(std::move(out), {a}, [na, col](Node& n) {
    Mat g = n.grad.array().colwise() * col.col(0).array();
    na->Accumulate(g);
  });
}

Var Tanh(const Var& a) {
  Node* na = a.node();
  Mat out = a.value().array().tanh();
  return TapeOf(a)->Make(std::move(out), {a}, [na](Node& n) {
    Mat g = n.grad.array() * (1.0 - n.value.array().square());
    na->Accumulate(g);
  });
}

Var Sigmoid(const Var& a) {
  Node* na = a.node();
  Mat out = (1.0 + (-a.value().array()).exp()).inverse();
  return TapeOf(a)->Make(std::move(out), {a}, [na](Node& n) {
    Mat g = n.grad.array() * n.value.array() * (1.0 - n.value.array());
    na->Accumulate(g);
  });
}

Var Relu(const Var& a) {
  Node* na = a.node();
  Mat out = a.value().cwiseMax(0.0);
  return TapeOf(a)->Make(std::move(out), {a}, [na](Node& n) {
    Mat g = (na->value.array() > 0.0).select(n.grad, 0.0);
    na->Accumulate(g);
  });
}

Var ConcatCols(const std::vector<Var>& parts) {
  Require(!parts.empty(), "ConcatCols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) Fail(ErrorKind::kShape, "ConcatCols: row mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  std::vector<Node*> nodes;
  std::vector<Index> offsets;
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    nodes.push_back(p.node());
    offsets.push_back(c);
    c += p.cols();
  }
  return TapeOf(parts.front())->Make(std::move(out), parts, [nodes, offsets](Node& n) {
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->needs_grad) nodes[i]->Accumulate(n.grad.middleCols(offsets[i], nodes[i]->value.cols()));
    }
  });
}

Var SliceCols(const Var& a, Index begin, Index count) {
  if (begin < 0 || begin + count > a.cols()) Fail(ErrorKind::kShape, "SliceCols: out of range");
  Node* na = a.node();
  Mat out = a.value().middleCols(begin, count);
  return TapeOf(a)->Make(std::move(out), {a}, [na, begin, count](Node& n) {
    Mat g = Mat::Zero(na->value.rows(), na->value.cols());
    g.middleCols(begin, count) = n.grad;
    na->Accumulate(g);
  });
}

Var Reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.rows() * a.cols()) Fail(ErrorKind::kShape, "Reshape: element count mismatch");
  Node* na = a.node();
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return TapeOf(a)->Make(std::move(out), {a}, [na](Node& n) {
    Mat g = Eigen::Map<const Mat>(n.grad.data(), na->value.rows(), na->value.cols());
    na->Accumulate(g);
  });
}

Var GatherRows(const Var& table, const std::vector<int>& ids) {
  Node* nt = table.node();
  Mat out(static_cast<Index>(ids.size()), table.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      Fail(ErrorKind::kOutOfVocabulary, "token id " + std::to_string(ids[i]) + " outside table of " +
                                            std::to_string(table.rows()) + " rows");
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  return TapeOf(table)->Make(std::move(out), {table}, [nt, ids](Node& n) {
    Mat g = Mat::Zero(nt->value.rows(), nt->value.cols());
    for (size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += n.grad.row(static_cast<Index>(i));
    nt->Accumulate(g);
  });
}

Var RepeatRows(const Var& a, Index times) {
  Node* na = a.node();
  Mat out(a.rows() * times, a.cols());
  for (Index r = 0; r < a.rows(); ++r) out.middleRows(r * times, times).rowwise() = a.value().row(r);
  return TapeOf(a)->Make(std::move(out), {a}, [na, times](Node& n) {
    Mat g(na->value.rows(), na->value.cols());
    for (Index r = 0; r < g.rows(); ++r) g.row(r) = n.grad.middleRows(r * times, times).colwise().sum();
    na->Accumulate(g);
  });
}

Var StackTime(const std::vector<Var>& steps) {
  Require(!steps.empty(), "StackTime: no steps");
  const Index batch = steps.front().rows();
  const Index cols = steps.front().cols();
  const Index T = static_cast<Index>(steps.size());
  Mat out(batch * T, cols);
  std::vector<Node*> nodes;
  for (Index t = 0; t < T; ++t) {
    const Mat& v = steps[t].value();
    if (v.rows() != batch || v.cols() != cols) Fail(ErrorKind::kShape, "StackTime: inconsistent step shape");
    for (Index b = 0; b < batch; ++b) out.row(b * T + t) = v.row(b);
    nodes.push_back(steps[t].node());
  }
  return TapeOf(steps.front())->Make(std::move(out), steps, [nodes, batch, T](Node& n) {
    for (Index t = 0; t < T; ++t) {
      if (!nodes[t]->needs_grad) continue;
      Mat g(batch, n.grad.cols());
      for (Index b = 0; b < batch; ++b) g.row(b) = n.grad.row(b * T + t);
      nodes[t]->Accumulate(g);
    }
  });
}

Var TimeSlice(const Var& stacked, Index batch, Index steps, Index t) {
  if (stacked.rows() != batch * steps) Fail(ErrorKind::kShape, "TimeSlice: row count mismatch");
  Node* ns = stacked.node();
  Mat out(batch, stacked.cols());
  for (Index b = 0; b < batch; ++b) out.row(b) = stacked.value().row(b * steps + t);
  return TapeOf(stacked)->Make(std::move(out), {stacked}, [ns, batch, steps, t](Node& n) {
    Mat g = Mat::Zero(ns->value.rows(), ns->value.cols());
    for (Index b = 0; b < batch; ++b) g.row(b * steps + t) = n.grad.row(b);
    ns->Accumulate(g);
  });
}

Var Conv1d(const Var& x, const Var& weight, const Var& bias, Index batch, Index length, int kernel,
           int dilation, int pad_left) {
  const Index cin = x.cols();
  if (x.rows() != batch * length) Fail(ErrorKind::kShape, "Conv1d: rows != batch * length");
  if (weight.rows() != kernel * cin) Fail(ErrorKind::kShape, "Conv1d: weight rows != kernel * Cin");
  const Index cout = weight.cols();
  if (bias.rows() != 1 || bias.cols() != cout) Fail(ErrorKind::kShape, "Conv1d: bias shape mismatch");

  // im2col: row (b, t) holds the K input rows feeding output (b, t).
  Mat cols = Mat::Zero(batch * length, kernel * cin);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < length; ++t) {
      for (int j = 0; j < kernel; ++j) {
        const Index src = t + static_cast<Index>(j) * dilation - pad_left;
        if (src < 0 || src >= length) continue;
        cols.block(b * length + t, j * cin, 1, cin) = x.value().row(b * length + src);
      }
    }
  }
  Mat out = cols * weight.value();
  out.rowwise() += bias.value().row(0);
  Node* nx = x.node();
  Node* nw = weight.node();
  Node* nb = bias.node();
  return TapeOf(x)->Make(std::move(out), {x, weight, bias},
                         [nx, nw, nb, cols = std::move(cols), batch, length, kernel, dilation, pad_left,
                          cin](Node& n) {
                           if (nw->needs_grad) nw->Accumulate(cols.transpose() * n.grad);
                           if (nb->needs_grad) nb->Accumulate(n.grad.colwise().sum());
                           if (!nx->needs_grad) return;
                           Mat dcols = n.grad * nw->value.transpose();
                           Mat g = Mat::Zero(nx->value.rows(), cin);
                           for (Index b = 0; b < batch; ++b) {
                             for (Index t = 0; t < length; ++t) {
                               for (int j = 0; j < kernel; ++j) {
                                 const Index src = t + static_cast<Index>(j) * dilation - pad_left;
                                 if (src < 0 || src >= length) continue;
                                 g.row(b * length + src) += dcols.block(b * length + t, j * cin, 1, cin);
                               }
                             }
                           }
                           nx->Accumulate(g);
                         });
}

Var RowConv(const Var& rows, const Var& weight) {
  const Index B = rows.rows();
  const Index L = rows.cols();
  const Index K = weight.rows();
  const Index pad = (K - 1) / 2;
  Mat cols = Mat::Zero(B * L, K);
  for (Index b = 0; b < B; ++b) {
    for (Index l = 0; l < L; ++l) {
      for (Index j = 0; j < K; ++j) {
        const Index src = l + j - pad;
        if (src >= 0 && src < L) cols(b * L + l, j) = rows.value()(b, src);
      }
    }
  }
  Mat out = cols * weight.value();
  Node* nr = rows.node();
  Node* nw = weight.node();
  return TapeOf(rows)->Make(std::move(out), {rows, weight}, [nr, nw, cols = std::move(cols), B, L, K, pad](Node& n) {
    if (nw->needs_grad) nw->Accumulate(cols.transpose() * n.grad);
    if (!nr->needs_grad) return;
    Mat dcols = n.grad * nw->value.transpose();
    Mat g = Mat::Zero(B, L);
    for (Index b = 0; b < B; ++b) {
      for (Index l = 0; l < L; ++l) {
        for (Index j = 0; j < K; ++j) {
          const Index src = l + j - pad;
          if (src >= 0 && src < L) g(b, src) += dcols(b * L + l, j);
        }
      }
    }
    nr->Accumulate(g);
  });
}

Var MaskedSoftmaxRows(const Var& scores, const Mat& mask) {
  if (mask.rows() != scores.rows() || mask.cols() != scores.cols()) {
    Fail(ErrorKind::kShape, "MaskedSoftmaxRows: mask shape mismatch");
  }
  Mat out = Mat::Zero(scores.rows(), scores.cols());
  for (Index r = 0; r < scores.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < scores.cols(); ++c) {
      if (mask(r, c) != 0.0) mx = std::max(mx, scores.value()(r, c));
    }
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Index c = 0; c < scores.cols(); ++c) {
      if (mask(r, c) == 0.0) continue;
      out(r, c) = std::exp(scores.value()(r, c) - mx);
      z += out(r, c);
    }
    out.row(r) /= z;
  }
  Node* ns = scores.node();
  return TapeOf(scores)->Make(std::move(out), {scores}, [ns](Node& n) {
    // dS = P * (dP - sum(dP * P)); masked entries have P = 0.
    Mat g(n.value.rows(), n.value.cols());
    for (Index r = 0; r < g.rows(); ++r) {
      const double dot = n.grad.row(r).dot(n.value.row(r));
      g.row(r) = n.value.row(r).cwiseProduct((n.grad.row(r).array() - dot).matrix());
    }
    ns->Accumulate(g);
  });
}

Var BatchedContext(const Var& align, const Var& memory) {
  const Index B = align.rows();
  const Index L = align.cols();
  if (memory.rows() != B * L) Fail(ErrorKind::kShape, "BatchedContext: memory rows != B * L");
  Mat out(B, memory.cols());
  for (Index b = 0; b < B; ++b) out.row(b) = align.value().row(b) * memory.value().middleRows(b * L, L);
  Node* na = align.node();
  Node* nm = memory.node();
  return TapeOf(align)->Make(std::move(out), {align, memory}, [na, nm, B, L](Node& n) {
    if (na->needs_grad) {
      Mat g(B, L);
      for (Index b = 0; b < B; ++b) g.row(b) = n.grad.row(b) * nm->value.middleRows(b * L, L).transpose();
      na->Accumulate(g);
    }
    if (nm->needs_grad) {
      Mat g(B * L, nm->value.cols());
      for (Index b = 0; b < B; ++b) g.middleRows(b * L, L) = na->value.row(b).transpose() * n.grad.row(b);
      nm->Accumulate(g);
    }
  });
}

Var Sum(const Var& a) {
  Node* na = a.node();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return TapeOf(a)->Make(std::move(out), {a}, [na](Node& n) {
    na->Accumulate(Mat::Constant(na->value.rows(), na->value.cols(), n.grad(0, 0)));
  });
}

Var MaskedMse(const Var& pred, const Mat& target, const Mat& row_mask) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) Fail(ErrorKind::kShape, "MaskedMse: target shape");
  if (row_mask.rows() != pred.rows()) Fail(ErrorKind::kShape, "MaskedMse: mask rows");
  const double active = row_mask.sum();
  const double denom = std::max(active, 1.0) * static_cast<double>(pred.cols());
  Mat diff = (pred.value() - target).array().colwise() * row_mask.col(0).array();
  Mat out(1, 1);
  out(0, 0) = diff.squaredNorm() / denom;
  Node* np = pred.node();
  return TapeOf(pred)->Make(std::move(out), {pred}, [np, diff = std::move(diff), denom](Node& n) {
    np->Accumulate(diff * (2.0 * n.grad(0, 0) / denom));
  });
}

Var MaskedBceWithLogits(const Var& logits, const Mat& target, const Mat& row_mask) {
  if (logits.cols() != 1 || target.rows() != logits.rows() || row_mask.rows() != logits.rows()) {
    Fail(ErrorKind::kShape, "MaskedBceWithLogits: expects column vectors of equal length");
  }
  const double denom = std::max(row_mask.sum(), 1.0);
  double total = 0.0;
  Mat g = Mat::Zero(logits.rows(), 1);
  for (Index r = 0; r < logits.rows(); ++r) {
    if (row_mask(r, 0) == 0.0) continue;
    const double x = logits.value()(r, 0);
    const double y = target(r, 0);
    // max(x,0) - x*y + log(1 + exp(-|x|))
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    g(r, 0) = 1.0 / (1.0 + std::exp(-x)) - y;
  }
  Mat out(1, 1);
  out(0, 0) = total / denom;
  Node* nl = logits.node();
  return TapeOf(logits)->Make(std::move(out), {logits}, [nl, g = std::move(g), denom](Node& n) {
    nl->Accumulate(g * (n.grad(0, 0) / denom));
  });
}

}  // namespace lrtts::ad
