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
#pragma once

// Minimal reverse-mode differentiation over dense matrices. A Tape owns
// every node created during a forward pass; Backward() walks them in reverse
// creation order. Nodes built only from constants carry no closure, so an
// inference pass over constant parameters records values and nothing else.

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace lrtts::ad {

struct Node {
  Mat value;
  Mat grad;
  bool needs_grad = false;
  std::function<void(Node&)> backward;

  void Accumulate(const Mat& g);
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, Node* node) : tape_(tape), node_(node) {}

  const Mat& value() const { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool needs_grad() const { return node_->needs_grad; }
  Node* node() const { return node_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return node_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  Node* node_ = nullptr;
};

class Tape {
 public:
  Var Constant(Mat value);
  Var Leaf(Mat value);
  // `backward` receives the finished node; it must push node.grad into the
  // parents it captured. Dropped when no input needs a gradient.
  Var Make(Mat value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward);
  Var Make(Mat value, const std::vector<Var>& inputs, std::function<void(Node&)> backward);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and runs every closure.
  void Backward(const Var& loss);
  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// Named parameters bound as leaves of one tape (or as constants for inference).
class Bound {
 public:
  Bound(Tape& tape, const std::map<std::string, Mat>& params, bool trainable);
  const Var& operator[](const std::string& name) const;
  std::map<std::string, Mat> Gradients() const;
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

// ---- elementwise and linear algebra ----
Var MatMul(const Var& a, const Var& b);
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
Var AddRow(const Var& a, const Var& row);  // broadcast a 1 x C row over every row of a
Var MulConst(const Var& a, const Mat& c);  // elementwise by a constant of the same shape
Var MulColConst(const Var& a, const Mat& col);  // scales row r by col(r, 0)
Var Tanh(const Var& a);
Var Sigmoid(const Var& a);
Var Relu(const Var& a);

// ---- shape ----
Var ConcatCols(const std::vector<Var>& parts);
Var SliceCols(const Var& a, Index begin, Index count);
Var Reshape(const Var& a, Index rows, Index cols);
Var GatherRows(const Var& table, const std::vector<int>& ids);
Var RepeatRows(const Var& a, Index times);  // row r -> rows r*times .. r*times+times-1
// Interleaves T matrices of B x C into (B*T) x C with row b*T + t = steps[t].row(b).
Var StackTime(const std::vector<Var>& steps);
// Inverse view of StackTime for one time index: rows b*T + t for every b.
Var TimeSlice(const Var& stacked, Index batch, Index steps, Index t);

// ---- sequence ops ----
// Convolution along time applied independently to `batch` blocks of `length`
// rows. weight is (kernel*Cin) x Cout, tap j reads x[t + j*dilation - pad_left]
// with zero padding outside the block.
Var Conv1d(const Var& x, const Var& weight, const Var& bias, Index batch, Index length,
           int kernel, int dilation, int pad_left);
// 1-channel convolution over each row of a B x L matrix; weight is K x F.
// Returns (B*L) x F with zero padding and centred taps.
Var RowConv(const Var& rows, const Var& weight);
// Row-wise softmax, entries where mask == 0 get probability 0.
Var MaskedSoftmaxRows(const Var& scores, const Mat& mask);
// context.row(b) = sum_l align(b, l) * memory.row(b*L + l).
Var BatchedContext(const Var& align, const Var& memory);

// ---- reductions / losses ----
Var Sum(const Var& a);
// sum over rows with row_mask(r)=1 of squared error, divided by (active rows * cols).
Var MaskedMse(const Var& pred, const Mat& target, const Mat& row_mask);
// Binary cross-entropy on logits, averaged over active rows.
Var MaskedBceWithLogits(const Var& logits, const Mat& target, const Mat& row_mask);

}  // namespace lrtts::ad
