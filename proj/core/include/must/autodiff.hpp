// Copyright 2026 The MUST Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MUST_AUTODIFF_HPP
#define MUST_AUTODIFF_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "must/tensor.hpp"

namespace must::ad {

using NodeId = std::size_t;

/// Reverse-mode tape over dense 2-D tensors. The operation set is the
/// minimal closed family needed by the recurrent models and losses in this
/// toolkit: matrix product, element-wise arithmetic, tanh/sigmoid, softmax
/// and log-softmax over rows, log, row/full reductions, concatenation and
/// row selection, plus a CTC loss node with an analytic gradient.
enum class Op {
  kConstant,
  kInput,
  kParam,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kAddRowVec,   // (T x d) + (1 x d), row broadcast
  kScalarMul,   // multiply by a compile-time scalar attribute
  kTanh,
  kSigmoid,
  kLog,         // arguments floored at 1e-12
  kSoftmaxRows,
  kLogSoftmaxRows,
  kSumAll,      // -> 1x1
  kMeanAll,     // -> 1x1
  kRowSum,      // (T x d) -> (T x 1)
  kConcatCols,
  kStackRows,   // N inputs of (1 x w) -> (N x w)
  kRow,         // select one row -> (1 x w)
  kCtcLoss,     // -> 1x1, targets attached to the node
};

struct Node {
  Op op = Op::kConstant;
  std::vector<NodeId> inputs;
  Tensor value;
  Tensor grad;
  bool has_value = false;

  std::string name;             // kParam / kInput
  double scalar = 0.0;          // kScalarMul
  std::size_t row_index = 0;    // kRow
  std::vector<int> targets;     // kCtcLoss
  std::vector<std::size_t> declared_shape;  // kInput
  Tensor cached_ctc_grad;       // filled during kCtcLoss forward
};

/// A single-writer computation graph. Build nodes, run forward(), then
/// backward(); values are cached on the nodes. Nodes are appended in
/// topological order by construction. Distinct graphs are independent and
/// may be evaluated on distinct threads.
class Graph {
 public:
  // ---- leaves ----
  NodeId constant(Tensor value);
  /// Named placeholder; bound via the map passed to forward().
  NodeId input(const std::string& name, std::vector<std::size_t> shape);
  /// Trainable leaf. Gradients are returned by backward() under this name.
  NodeId param(const std::string& name, Tensor value);

  // ---- operations ----
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_row_vec(NodeId a, NodeId v);
  NodeId scalar_mul(NodeId a, double c);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId log(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId log_softmax_rows(NodeId a);
  NodeId sum_all(NodeId a);
  NodeId mean_all(NodeId a);
  NodeId row_sum(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId stack_rows(const std::vector<NodeId>& rows);
  NodeId row(NodeId a, std::size_t r);
  /// Negative log probability of `targets` under the CTC alignment model,
  /// taking pre-softmax logits (T x d) with the blank as the last class.
  NodeId ctc_loss(NodeId logits, std::vector<int> targets);

  /// Evaluates every node in order and returns the value of `output`.
  /// Named inputs are bound from `inputs` first. Rejects shape mismatches
  /// and non-finite intermediates, naming the offending node.
  const Tensor& forward(NodeId output,
                        const std::map<std::string, Tensor>& inputs = {});

  /// Accumulates gradients of the designated output (contracted against
  /// `seed`) into every trainable leaf and returns them by parameter name.
  /// Must follow a completed forward().
  std::map<std::string, Tensor> backward(const Tensor& seed);
  /// Convenience: seed = 1 for a scalar output.
  std::map<std::string, Tensor> backward();

  const Tensor& value(NodeId id) const;
  /// Overwrites a leaf's value (parameters between update steps).
  void set_value(NodeId id, Tensor value);

  std::size_t node_count() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_[id]; }

 private:
  NodeId push(Node n);
  void eval(NodeId id);
  void check_finite(NodeId id) const;

  std::vector<Node> nodes_;
  NodeId output_ = 0;
  bool forward_done_ = false;
};

/// Maximum relative error between reverse-mode gradients and central finite
/// differences over every parameter entry of a scalar-valued graph.
/// `point` binds the graph's named inputs.
double grad_check(Graph& g, NodeId output,
                  const std::map<std::string, Tensor>& point, double step);

}  // namespace must::ad

#endif  // MUST_AUTODIFF_HPP
