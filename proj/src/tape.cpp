// Copyright 2026 The mlcl Authors.
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

#include "mlcl/tape.hpp"

#include <cmath>
#include <numeric>

#include "mlcl/errors.hpp"

namespace mlcl::grad {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::string_view op_name(OpTag op) {
  switch (op) {
    case OpTag::kConstant: return "constant";
    case OpTag::kParameter: return "parameter";
    case OpTag::kMatmul: return "matmul";
    case OpTag::kMatmulTransposed: return "matmul_transposed";
    case OpTag::kRowL2Normalize: return "row_l2_normalize";
    case OpTag::kAffine: return "affine";
    case OpTag::kTanh: return "tanh";
    case OpTag::kGatherRows: return "gather_rows";
    case OpTag::kMeanPoolRows: return "mean_pool_rows";
    case OpTag::kScaleByExp: return "scale_by_exp";
    case OpTag::kSum: return "sum";
    case OpTag::kCustom: return "custom";
  }
  return "unknown";
}

const Matrix& GradientMap::at(NodeRef param) const {
  auto it = grads_.find(param.id);
  if (it == grads_.end()) {
    throw IndexError("no gradient for node " + std::to_string(param.id));
  }
  return it->second;
}

const Tape::Node& Tape::node(NodeRef n) const {
  if (n.id >= nodes_.size()) {
    throw IndexError("node " + std::to_string(n.id) + " is not on this tape");
  }
  return nodes_[n.id];
}

NodeRef Tape::push(Node n) {
  for (std::size_t in : n.inputs) {
    if (in >= nodes_.size()) {
      throw IndexError("input node " + std::to_string(in) +
                       " is not on this tape");
    }
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return NodeRef{nodes_.size() - 1};
}

NodeRef Tape::constant(Matrix value) {
  Node n;
  n.op = OpTag::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeRef Tape::parameter(Matrix value) {
  Node n;
  n.op = OpTag::kParameter;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

std::vector<NodeRef> Tape::parameters() const {
  std::vector<NodeRef> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == OpTag::kParameter) out.push_back(NodeRef{i});
  }
  return out;
}

NodeRef Tape::matmul(NodeRef a, NodeRef b) {
  Node n;
  n.op = OpTag::kMatmul;
  n.value = mlcl::matmul(value(a), value(b));
  n.inputs = {a.id, b.id};
  return push(std::move(n));
}

NodeRef Tape::matmul_transposed(NodeRef a, NodeRef b) {
  Node n;
  n.op = OpTag::kMatmulTransposed;
  n.value = mlcl::matmul_transposed(value(a), value(b));
  n.inputs = {a.id, b.id};
  return push(std::move(n));
}

NodeRef Tape::row_l2_normalize(NodeRef a) {
  const Matrix& v = value(a);
  Node n;
  n.op = OpTag::kRowL2Normalize;
  n.value = Matrix(v.rows(), v.cols());
  n.real_aux.resize(v.rows());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    auto src = v.row(r);
    const double norm =
        std::sqrt(std::inner_product(src.begin(), src.end(), src.begin(), 0.0));
    if (!(norm >= kEpsilonNorm)) {
      throw NumericError("row_l2_normalize: row " + std::to_string(r) +
                         " has norm " + std::to_string(norm) +
                         " below epsilon");
    }
    n.real_aux[r] = norm;
    auto dst = n.value.row(r);
    for (std::size_t c = 0; c < v.cols(); ++c) dst[c] = src[c] / norm;
  }
  n.inputs = {a.id};
  return push(std::move(n));
}

NodeRef Tape::affine(NodeRef x, NodeRef w, NodeRef b) {
  const Matrix& bias = value(b);
  Matrix out = mlcl::matmul(value(x), value(w));
  if (bias.rows() != 1 || bias.cols() != out.cols()) {
    throw DimensionError("affine: bias " + shape(bias) + " for output " +
                         shape(out));
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) dst[c] += bias[c];
  }
  Node n;
  n.op = OpTag::kAffine;
  n.value = std::move(out);
  n.inputs = {x.id, w.id, b.id};
  return push(std::move(n));
}

NodeRef Tape::tanh_act(NodeRef x) {
  Matrix out = value(x);
  for (double& v : out.data()) v = std::tanh(v);
  Node n;
  n.op = OpTag::kTanh;
  n.value = std::move(out);
  n.inputs = {x.id};
  return push(std::move(n));
}

NodeRef Tape::gather_rows(NodeRef table, std::vector<std::size_t> indices) {
  Node n;
  n.op = OpTag::kGatherRows;
  n.value = value(table).select_rows(indices);
  n.index_aux = std::move(indices);
  n.inputs = {table.id};
  return push(std::move(n));
}

NodeRef Tape::mean_pool_rows(NodeRef x,
                             std::vector<std::size_t> segment_lengths) {
  const Matrix& v = value(x);
  const std::size_t total = std::accumulate(
      segment_lengths.begin(), segment_lengths.end(), std::size_t{0});
  if (total != v.rows()) {
    throw DimensionError("mean_pool_rows: segments cover " +
                         std::to_string(total) + " rows, input has " +
                         std::to_string(v.rows()));
  }
  Matrix out(segment_lengths.size(), v.cols());
  std::size_t start = 0;
  for (std::size_t s = 0; s < segment_lengths.size(); ++s) {
    const std::size_t len = segment_lengths[s];
    if (len == 0) {
      throw NumericError("mean_pool_rows: segment " + std::to_string(s) +
                         " is empty");
    }
    auto dst = out.row(s);
    for (std::size_t r = start; r < start + len; ++r) {
      auto src = v.row(r);
      for (std::size_t c = 0; c < v.cols(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(len);
    for (double& d : dst) d *= inv;
    start += len;
  }
  Node n;
  n.op = OpTag::kMeanPoolRows;
  n.value = std::move(out);
  n.index_aux = std::move(segment_lengths);
  n.inputs = {x.id};
  return push(std::move(n));
}

NodeRef Tape::scale_by_exp(NodeRef x, NodeRef s) {
  const double factor = std::exp(value(s).item());
  Matrix out = value(x);
  out *= factor;
  Node n;
  n.op = OpTag::kScaleByExp;
  n.value = std::move(out);
  n.real_aux = {factor};
  n.inputs = {x.id, s.id};
  return push(std::move(n));
}

NodeRef Tape::sum(NodeRef x) {
  Node n;
  n.op = OpTag::kSum;
  n.value = Matrix::scalar(mlcl::sum(value(x)));
  n.inputs = {x.id};
  return push(std::move(n));
}

NodeRef Tape::custom(std::string name, std::vector<NodeRef> inputs,
                     Matrix value, BackwardFn backward) {
  Node n;
  n.op = OpTag::kCustom;
  n.custom_name = std::move(name);
  n.value = std::move(value);
  n.custom_backward = std::move(backward);
  for (NodeRef in : inputs) n.inputs.push_back(in.id);
  return push(std::move(n));
}

Matrix* Tape::grad_slot(std::size_t input_id) {
  Node& in = nodes_[input_id];
  return in.requires_grad ? &in.grad : nullptr;
}

GradientMap Tape::backward(NodeRef loss) {
  const Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " +
                         shape(root.value));
  }
  for (Node& n : nodes_) {
    n.grad = n.requires_grad ? Matrix(n.value.rows(), n.value.cols())
                             : Matrix();
  }
  if (nodes_[loss.id].requires_grad) {
    nodes_[loss.id].grad = Matrix::scalar(1.0);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      if (nodes_[id].requires_grad) backprop_node(id);
    }
  }
  GradientMap out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op == OpTag::kParameter) out.set(NodeRef{id}, nodes_[id].grad);
  }
  return out;
}

void Tape::backprop_node(std::size_t id) {
  const Node& n = nodes_[id];
  const Matrix& g = n.grad;
  switch (n.op) {
    case OpTag::kConstant:
    case OpTag::kParameter:
      return;
    case OpTag::kMatmul: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      const Matrix& b = nodes_[n.inputs[1]].value;
      if (Matrix* ga = grad_slot(n.inputs[0])) *ga += mlcl::matmul_transposed(g, b);
      if (Matrix* gb = grad_slot(n.inputs[1])) *gb += transposed_matmul(a, g);
      return;
    }
    case OpTag::kMatmulTransposed: {
      // out = a b^T: da = g b, db = g^T a.
      const Matrix& a = nodes_[n.inputs[0]].value;
      const Matrix& b = nodes_[n.inputs[1]].value;
      if (Matrix* ga = grad_slot(n.inputs[0])) *ga += mlcl::matmul(g, b);
      if (Matrix* gb = grad_slot(n.inputs[1])) *gb += transposed_matmul(g, a);
      return;
    }
    case OpTag::kRowL2Normalize: {
      Matrix* gv = grad_slot(n.inputs[0]);
      if (gv == nullptr) return;
      // dv = (I - u u^T) g / |v| per row.
      for (std::size_t r = 0; r < n.value.rows(); ++r) {
        auto u = n.value.row(r);
        auto gr = g.row(r);
        const double ug = std::inner_product(u.begin(), u.end(), gr.begin(), 0.0);
        const double inv_norm = 1.0 / n.real_aux[r];
        auto dst = gv->row(r);
        for (std::size_t c = 0; c < u.size(); ++c) {
          dst[c] += (gr[c] - u[c] * ug) * inv_norm;
        }
      }
      return;
    }
    case OpTag::kAffine: {
      const Matrix& x = nodes_[n.inputs[0]].value;
      const Matrix& w = nodes_[n.inputs[1]].value;
      if (Matrix* gx = grad_slot(n.inputs[0])) *gx += mlcl::matmul_transposed(g, w);
      if (Matrix* gw = grad_slot(n.inputs[1])) *gw += transposed_matmul(x, g);
      if (Matrix* gb = grad_slot(n.inputs[2])) {
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto gr = g.row(r);
          for (std::size_t c = 0; c < g.cols(); ++c) (*gb)[c] += gr[c];
        }
      }
      return;
    }
    case OpTag::kTanh: {
      Matrix* gx = grad_slot(n.inputs[0]);
      if (gx == nullptr) return;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = n.value[i];
        (*gx)[i] += g[i] * (1.0 - t * t);
      }
      return;
    }
    case OpTag::kGatherRows: {
      Matrix* gt = grad_slot(n.inputs[0]);
      if (gt == nullptr) return;
      for (std::size_t k = 0; k < n.index_aux.size(); ++k) {
        auto src = g.row(k);
        auto dst = gt->row(n.index_aux[k]);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
      return;
    }
    case OpTag::kMeanPoolRows: {
      Matrix* gx = grad_slot(n.inputs[0]);
      if (gx == nullptr) return;
      std::size_t start = 0;
      for (std::size_t s = 0; s < n.index_aux.size(); ++s) {
        const std::size_t len = n.index_aux[s];
        const double inv = 1.0 / static_cast<double>(len);
        auto src = g.row(s);
        for (std::size_t r = start; r < start + len; ++r) {
          auto dst = gx->row(r);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c] * inv;
        }
        start += len;
      }
      return;
    }
    case OpTag::kScaleByExp: {
      const double factor = n.real_aux[0];
      if (Matrix* gx = grad_slot(n.inputs[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * factor;
      }
      if (Matrix* gs = grad_slot(n.inputs[1])) {
        // d/ds [x e^s] = x e^s, the output itself.
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * n.value[i];
        (*gs)[0] += acc;
      }
      return;
    }
    case OpTag::kSum: {
      Matrix* gx = grad_slot(n.inputs[0]);
      if (gx == nullptr) return;
      const double g0 = g[0];
      for (double& v : gx->data()) v += g0;
      return;
    }
    case OpTag::kCustom: {
      std::vector<Matrix*> slots;
      slots.reserve(n.inputs.size());
      for (std::size_t in : n.inputs) slots.push_back(grad_slot(in));
      n.custom_backward(g, slots);
      return;
    }
  }
}

}  // namespace mlcl::grad
