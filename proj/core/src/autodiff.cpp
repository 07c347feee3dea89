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

#include "must/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "must/ctc.hpp"
#include "must/errors.hpp"

namespace must::ad {

namespace {

constexpr double kLogFloor = 1e-12;

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAddRowVec: return "add_row_vec";
    case Op::kScalarMul: return "scalar_mul";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kSoftmaxRows: return "softmax_rows";
    case Op::kLogSoftmaxRows: return "log_softmax_rows";
    case Op::kSumAll: return "sum_all";
    case Op::kMeanAll: return "mean_all";
    case Op::kRowSum: return "row_sum";
    case Op::kConcatCols: return "concat_cols";
    case Op::kStackRows: return "stack_rows";
    case Op::kRow: return "row";
    case Op::kCtcLoss: return "ctc_loss";
  }
  return "?";
}

[[noreturn]] void fail(NodeId id, Op op, const std::string& what) {
  throw NumericalError(std::string(op_name(op)) + " at node " +
                       std::to_string(id) + ": " + what);
}

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_dims(NodeId id, Op op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(id, op, "operand shapes differ, " + dims(a) + " vs " + dims(b));
  }
}

}  // namespace

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  n.has_value = true;
  return push(std::move(n));
}

NodeId Graph::input(const std::string& name, std::vector<std::size_t> shape) {
  for (const Node& m : nodes_) {
    if (m.op == Op::kInput && m.name == name) {
      throw NumericalError("duplicate input name '" + name + "'");
    }
  }
  Node n;
  n.op = Op::kInput;
  n.name = name;
  n.declared_shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::param(const std::string& name, Tensor value) {
  for (const Node& m : nodes_) {
    if (m.op == Op::kParam && m.name == name) {
      throw NumericalError("duplicate parameter name '" + name + "'");
    }
  }
  Node n;
  n.op = Op::kParam;
  n.name = name;
  n.value = std::move(value);
  n.has_value = true;
  return push(std::move(n));
}

namespace {
void require_ids(const std::vector<Node>& nodes, std::initializer_list<NodeId> ids,
                 const char* where) {
  for (NodeId id : ids) {
    if (id >= nodes.size()) {
      throw NumericalError(std::string(where) + ": node id " +
                           std::to_string(id) + " does not exist");
    }
  }
}
}  // namespace

NodeId Graph::matmul(NodeId a, NodeId b) {
  require_ids(nodes_, {a, b}, "matmul");
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
  require_ids(nodes_, {a}, "transpose");
  Node n;
  n.op = Op::kTranspose;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  require_ids(nodes_, {a, b}, "add");
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  require_ids(nodes_, {a, b}, "sub");
  Node n;
  n.op = Op::kSub;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  require_ids(nodes_, {a, b}, "mul");
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::add_row_vec(NodeId a, NodeId v) {
  require_ids(nodes_, {a, v}, "add_row_vec");
  Node n;
  n.op = Op::kAddRowVec;
  n.inputs = {a, v};
  return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId a, double c) {
  require_ids(nodes_, {a}, "scalar_mul");
  Node n;
  n.op = Op::kScalarMul;
  n.inputs = {a};
  n.scalar = c;
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  require_ids(nodes_, {a}, "tanh");
  Node n;
  n.op = Op::kTanh;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
  require_ids(nodes_, {a}, "sigmoid");
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::log(NodeId a) {
  require_ids(nodes_, {a}, "log");
  Node n;
  n.op = Op::kLog;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
  require_ids(nodes_, {a}, "softmax_rows");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::log_softmax_rows(NodeId a) {
  require_ids(nodes_, {a}, "log_softmax_rows");
  Node n;
  n.op = Op::kLogSoftmaxRows;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
  require_ids(nodes_, {a}, "sum_all");
  Node n;
  n.op = Op::kSumAll;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::mean_all(NodeId a) {
  require_ids(nodes_, {a}, "mean_all");
  Node n;
  n.op = Op::kMeanAll;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::row_sum(NodeId a) {
  require_ids(nodes_, {a}, "row_sum");
  Node n;
  n.op = Op::kRowSum;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  require_ids(nodes_, {a, b}, "concat_cols");
  Node n;
  n.op = Op::kConcatCols;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::stack_rows(const std::vector<NodeId>& rows) {
  if (rows.empty()) throw NumericalError("stack_rows: no rows given");
  for (NodeId id : rows) require_ids(nodes_, {id}, "stack_rows");
  Node n;
  n.op = Op::kStackRows;
  n.inputs = rows;
  return push(std::move(n));
}

NodeId Graph::row(NodeId a, std::size_t r) {
  require_ids(nodes_, {a}, "row");
  Node n;
  n.op = Op::kRow;
  n.inputs = {a};
  n.row_index = r;
  return push(std::move(n));
}

NodeId Graph::ctc_loss(NodeId logits, std::vector<int> targets) {
  require_ids(nodes_, {logits}, "ctc_loss");
  Node n;
  n.op = Op::kCtcLoss;
  n.inputs = {logits};
  n.targets = std::move(targets);
  return push(std::move(n));
}

void Graph::check_finite(NodeId id) const {
  const Node& n = nodes_[id];
  if (!n.value.all_finite()) {
    fail(id, n.op, "non-finite value");
  }
}

void Graph::eval(NodeId id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t i) -> const Tensor& {
    return nodes_[n.inputs[i]].value;
  };
  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      break;
    case Op::kInput:
      if (!n.has_value) {
        fail(id, n.op, "input '" + n.name + "' not bound");
      }
      break;
    case Op::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows()) {
        fail(id, n.op, "inner dimensions differ, " + dims(a) + " times " + dims(b));
      }
      const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
      Tensor out = Tensor::zeros({m, p});
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          const double av = a.at(r, j);
          if (av == 0.0) continue;
          for (std::size_t c = 0; c < p; ++c) {
            out.at(r, c) += av * b.at(j, c);
          }
        }
      }
      n.value = std::move(out);
      break;
    }
    case Op::kTranspose: {
      const Tensor& a = in(0);
      Tensor out = Tensor::zeros({a.cols(), a.rows()});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.at(r, c);
      }
      n.value = std::move(out);
      break;
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same_dims(id, n.op, a, b);
      Tensor out = Tensor::zeros({a.rows(), a.cols()});
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.data[i], y = b.data[i];
        out.data[i] = (n.op == Op::kAdd) ? x + y
                     : (n.op == Op::kSub) ? x - y
                                          : x * y;
      }
      n.value = std::move(out);
      break;
    }
    case Op::kAddRowVec: {
      const Tensor& a = in(0);
      const Tensor& v = in(1);
      if (v.rows() != 1 || v.cols() != a.cols()) {
        fail(id, n.op, "expected a 1x" + std::to_string(a.cols()) +
                           " row vector, got " + dims(v));
      }
      Tensor out = Tensor::zeros({a.rows(), a.cols()});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
          out.at(r, c) = a.at(r, c) + v.at(0, c);
        }
      }
      n.value = std::move(out);
      break;
    }
    case Op::kScalarMul: {
      const Tensor& a = in(0);
      Tensor out = a;
      out.shape = {a.rows(), a.cols()};
      for (double& x : out.data) x *= n.scalar;
      n.value = std::move(out);
      break;
    }
    case Op::kTanh:
    case Op::kSigmoid: {
      const Tensor& a = in(0);
      Tensor out = Tensor::zeros({a.rows(), a.cols()});
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = (n.op == Op::kTanh)
                          ? std::tanh(a.data[i])
                          : 1.0 / (1.0 + std::exp(-a.data[i]));
      }
      n.value = std::move(out);
      break;
    }
    case Op::kLog: {
      const Tensor& a = in(0);
      Tensor out = Tensor::zeros({a.rows(), a.cols()});
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = std::log(std::max(a.data[i], kLogFloor));
      }
      n.value = std::move(out);
      break;
    }
    case Op::kSoftmaxRows:
    case Op::kLogSoftmaxRows: {
      const Tensor& a = in(0);
      if (a.cols() == 0) fail(id, n.op, "empty rows");
      Tensor out = Tensor::zeros({a.rows(), a.cols()});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double mx = a.at(r, 0);
        for (std::size_t c = 1; c < a.cols(); ++c) mx = std::max(mx, a.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) z += std::exp(a.at(r, c) - mx);
        const double lz = mx + std::log(z);
        for (std::size_t c = 0; c < a.cols(); ++c) {
          const double l = a.at(r, c) - lz;
          out.at(r, c) = (n.op == Op::kSoftmaxRows) ? std::exp(l) : l;
        }
      }
      n.value = std::move(out);
      break;
    }
    case Op::kSumAll:
    case Op::kMeanAll: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (double x : a.data) s += x;
      if (n.op == Op::kMeanAll) {
        if (a.size() == 0) fail(id, n.op, "empty tensor");
        s /= static_cast<double>(a.size());
      }
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::kRowSum: {
      const Tensor& a = in(0);
      Tensor out = Tensor::zeros({a.rows(), 1});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(r, c);
        out.at(r, 0) = s;
      }
      n.value = std::move(out);
      break;
    }
    case Op::kConcatCols: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rows() != b.rows()) {
        fail(id, n.op, "row counts differ, " + dims(a) + " vs " + dims(b));
      }
      Tensor out = Tensor::zeros({a.rows(), a.cols() + b.cols()});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c);
        for (std::size_t c = 0; c < b.cols(); ++c) {
          out.at(r, a.cols() + c) = b.at(r, c);
        }
      }
      n.value = std::move(out);
      break;
    }
    case Op::kStackRows: {
      const std::size_t w = in(0).cols();
      Tensor out = Tensor::zeros({n.inputs.size(), w});
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const Tensor& r = in(i);
        if (r.rows() != 1 || r.cols() != w) {
          fail(id, n.op, "row " + std::to_string(i) + " has shape " + dims(r) +
                             ", expected 1x" + std::to_string(w));
        }
        for (std::size_t c = 0; c < w; ++c) out.at(i, c) = r.at(0, c);
      }
      n.value = std::move(out);
      break;
    }
    case Op::kRow: {
      const Tensor& a = in(0);
      if (n.row_index >= a.rows()) {
        fail(id, n.op, "row " + std::to_string(n.row_index) +
                           " out of range for " + dims(a));
      }
      Tensor out = Tensor::zeros({1, a.cols()});
      for (std::size_t c = 0; c < a.cols(); ++c) {
        out.at(0, c) = a.at(n.row_index, c);
      }
      n.value = std::move(out);
      break;
    }
    case Op::kCtcLoss: {
      const Tensor& logits = in(0);
      ctc::CtcResult res = ctc::ctc_loss(logits, n.targets);
      n.value = Tensor::scalar(res.loss);
      n.cached_ctc_grad = std::move(res.grad);
      break;
    }
  }
  n.has_value = true;
  check_finite(id);
}

const Tensor& Graph::forward(NodeId output,
                             const std::map<std::string, Tensor>& inputs) {
  if (output >= nodes_.size()) {
    throw NumericalError("forward: node id " + std::to_string(output) +
                         " does not exist");
  }
  std::set<std::string> used;
  for (Node& n : nodes_) {
    if (n.op != Op::kInput) continue;
    auto it = inputs.find(n.name);
    if (it == inputs.end()) {
      n.has_value = false;
      continue;
    }
    const Tensor& v = it->second;
    if (v.shape != n.declared_shape) {
      throw NumericalError("forward: input '" + n.name + "' has shape " +
                           v.shape_str() + ", declared " +
                           Tensor::zeros(n.declared_shape).shape_str());
    }
    n.value = v;
    n.has_value = true;
    used.insert(n.name);
  }
  for (const auto& [name, v] : inputs) {
    if (!used.count(name)) {
      throw NumericalError("forward: unknown input '" + name + "'");
    }
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) eval(id);
  output_ = output;
  forward_done_ = true;
  return nodes_[output].value;
}

std::map<std::string, Tensor> Graph::backward(const Tensor& seed) {
  if (!forward_done_) {
    throw NumericalError("backward requires a completed forward pass");
  }
  const Tensor& out = nodes_[output_].value;
  if (seed.rows() != out.rows() || seed.cols() != out.cols()) {
    throw NumericalError("backward: seed shape " + seed.shape_str() +
                         " does not match output " + out.shape_str());
  }
  for (Node& n : nodes_) {
    n.grad = Tensor::zeros(n.value.shape);
  }
  nodes_[output_].grad.data = seed.data;

  for (NodeId id = output_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    if (!g.all_finite()) fail(id, n.op, "non-finite gradient");
    auto gin = [&](std::size_t i) -> Tensor& { return nodes_[n.inputs[i]].grad; };
    auto vin = [&](std::size_t i) -> const Tensor& {
      return nodes_[n.inputs[i]].value;
    };
    switch (n.op) {
      case Op::kConstant:
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kMatMul: {
        const Tensor& a = vin(0);
        const Tensor& b = vin(1);
        Tensor& da = gin(0);
        Tensor& db = gin(1);
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t j = 0; j < b.cols(); ++j) {
            const double gv = g.at(r, j);
            if (gv == 0.0) continue;
            for (std::size_t c = 0; c < a.cols(); ++c) {
              da.at(r, c) += gv * b.at(c, j);
              db.at(c, j) += a.at(r, c) * gv;
            }
          }
        }
        break;
      }
      case Op::kTranspose: {
        Tensor& da = gin(0);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) da.at(c, r) += g.at(r, c);
        }
        break;
      }
      case Op::kAdd:
        for (std::size_t i = 0; i < g.size(); ++i) gin(0).data[i] += g.data[i];
        for (std::size_t i = 0; i < g.size(); ++i) gin(1).data[i] += g.data[i];
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < g.size(); ++i) gin(0).data[i] += g.data[i];
        for (std::size_t i = 0; i < g.size(); ++i) gin(1).data[i] -= g.data[i];
        break;
      case Op::kMul: {
        const Tensor& a = vin(0);
        const Tensor& b = vin(1);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gin(0).data[i] += g.data[i] * b.data[i];
          gin(1).data[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Op::kAddRowVec: {
        Tensor& da = gin(0);
        Tensor& dv = gin(1);
        for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i];
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) dv.at(0, c) += g.at(r, c);
        }
        break;
      }
      case Op::kScalarMul:
        for (std::size_t i = 0; i < g.size(); ++i) {
          gin(0).data[i] += n.scalar * g.data[i];
        }
        break;
      case Op::kTanh:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          gin(0).data[i] += g.data[i] * (1.0 - y * y);
        }
        break;
      case Op::kSigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          gin(0).data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      case Op::kLog: {
        const Tensor& a = vin(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a.data[i] >= kLogFloor) {
            gin(0).data[i] += g.data[i] / a.data[i];
          }
        }
        break;
      }
      case Op::kSoftmaxRows: {
        Tensor& da = gin(0);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) {
            dot += g.at(r, c) * n.value.at(r, c);
          }
          for (std::size_t c = 0; c < g.cols(); ++c) {
            da.at(r, c) += n.value.at(r, c) * (g.at(r, c) - dot);
          }
        }
        break;
      }
      case Op::kLogSoftmaxRows: {
        Tensor& da = gin(0);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double gsum = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) gsum += g.at(r, c);
          for (std::size_t c = 0; c < g.cols(); ++c) {
            da.at(r, c) += g.at(r, c) - std::exp(n.value.at(r, c)) * gsum;
          }
        }
        break;
      }
      case Op::kSumAll: {
        const double gv = g.data[0];
        for (double& x : gin(0).data) x += gv;
        break;
      }
      case Op::kMeanAll: {
        const double gv = g.data[0] / static_cast<double>(vin(0).size());
        for (double& x : gin(0).data) x += gv;
        break;
      }
      case Op::kRowSum: {
        Tensor& da = gin(0);
        for (std::size_t r = 0; r < da.rows(); ++r) {
          const double gv = g.at(r, 0);
          for (std::size_t c = 0; c < da.cols(); ++c) da.at(r, c) += gv;
        }
        break;
      }
      case Op::kConcatCols: {
        Tensor& da = gin(0);
        Tensor& db = gin(1);
        const std::size_t p = vin(0).cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < p; ++c) da.at(r, c) += g.at(r, c);
          for (std::size_t c = 0; c < db.cols(); ++c) {
            db.at(r, c) += g.at(r, p + c);
          }
        }
        break;
      }
      case Op::kStackRows:
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          Tensor& dr = gin(i);
          for (std::size_t c = 0; c < g.cols(); ++c) dr.at(0, c) += g.at(i, c);
        }
        break;
      case Op::kRow: {
        Tensor& da = gin(0);
        for (std::size_t c = 0; c < g.cols(); ++c) {
          da.at(n.row_index, c) += g.at(0, c);
        }
        break;
      }
      case Op::kCtcLoss: {
        Tensor& da = gin(0);
        const double gv = g.data[0];
        for (std::size_t i = 0; i < da.size(); ++i) {
          da.data[i] += gv * n.cached_ctc_grad.data[i];
        }
        break;
      }
    }
  }

  std::map<std::string, Tensor> grads;
  for (const Node& n : nodes_) {
    if (n.op != Op::kParam) continue;
    if (!n.grad.all_finite()) {
      throw NumericalError("backward: non-finite gradient for parameter '" +
                           n.name + "'");
    }
    grads[n.name] = n.grad;
  }
  return grads;
}

std::map<std::string, Tensor> Graph::backward() {
  if (!forward_done_) {
    throw NumericalError("backward requires a completed forward pass");
  }
  if (nodes_[output_].value.size() != 1) {
    throw NumericalError("backward without a seed requires a scalar output, got " +
                         nodes_[output_].value.shape_str());
  }
  Tensor seed = nodes_[output_].value;
  seed.data[0] = 1.0;
  return backward(seed);
}

const Tensor& Graph::value(NodeId id) const {
  if (id >= nodes_.size()) {
    throw NumericalError("value: node id " + std::to_string(id) +
                         " does not exist");
  }
  if (!nodes_[id].has_value) {
    throw NumericalError("value: node " + std::to_string(id) +
                         " has not been evaluated");
  }
  return nodes_[id].value;
}

void Graph::set_value(NodeId id, Tensor value) {
  if (id >= nodes_.size()) {
    throw NumericalError("set_value: node id " + std::to_string(id) +
                         " does not exist");
  }
  Node& n = nodes_[id];
  if (n.op != Op::kParam && n.op != Op::kConstant) {
    fail(id, n.op, "set_value only applies to parameters and constants");
  }
  if (value.shape != n.value.shape) {
    fail(id, n.op, "set_value shape " + value.shape_str() +
                       " does not match " + n.value.shape_str());
  }
  n.value = std::move(value);
  forward_done_ = false;
}

double grad_check(Graph& g, NodeId output,
                  const std::map<std::string, Tensor>& point, double step) {
  if (!(step > 0.0)) {
    throw NumericalError("grad_check: step must be positive");
  }
  g.forward(output, point);
  if (g.value(output).size() != 1) {
    throw NumericalError("grad_check: output must be scalar, got " +
                         g.value(output).shape_str());
  }
  const std::map<std::string, Tensor> analytic = g.backward();

  double worst = 0.0;
  for (NodeId id = 0; id < g.node_count(); ++id) {
    if (g.node(id).op != Op::kParam) continue;
    const std::string name = g.node(id).name;
    const Tensor base = g.node(id).value;
    const Tensor& ga = analytic.at(name);
    Tensor pert = base;
    for (std::size_t i = 0; i < base.size(); ++i) {
      pert.data[i] = base.data[i] + step;
      g.set_value(id, pert);
      const double fp = g.forward(output, point).data[0];
      pert.data[i] = base.data[i] - step;
      g.set_value(id, pert);
      const double fm = g.forward(output, point).data[0];
      pert.data[i] = base.data[i];
      const double numeric = (fp - fm) / (2.0 * step);
      const double rel = std::abs(ga.data[i] - numeric) /
                         std::max({1.0, std::abs(ga.data[i]), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
    g.set_value(id, base);
  }
  g.forward(output, point);
  return worst;
}

}  // namespace must::ad
