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

// Define-by-run reverse-mode differentiation over dense double matrices.
//
// Every op evaluates eagerly and appends one node to the tape; node inputs
// always refer to earlier nodes, so the tape is topologically ordered and
// backward() is a single reverse sweep. A tape is built per batch and thrown
// away afterwards.

#ifndef MLCL_TAPE_HPP_
#define MLCL_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlcl/matrix.hpp"

namespace mlcl::grad {

// Rows with a smaller Euclidean norm are rejected by row_l2_normalize.
inline constexpr double kEpsilonNorm = 1e-10;

// Handle to a node on a particular tape.
struct NodeRef {
  std::size_t id = 0;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

enum class OpTag {
  kConstant,
  kParameter,
  kMatmul,
  kMatmulTransposed,
  kRowL2Normalize,
  kAffine,
  kTanh,
  kGatherRows,
  kMeanPoolRows,
  kScaleByExp,
  kSum,
  kCustom,
};

std::string_view op_name(OpTag op);

// d(loss)/d(parameter) for every parameter node on a tape.
class GradientMap {
 public:
  const Matrix& at(NodeRef param) const;
  bool contains(NodeRef param) const { return grads_.count(param.id) != 0; }
  std::size_t size() const { return grads_.size(); }
  void set(NodeRef param, Matrix g) { grads_[param.id] = std::move(g); }

 private:
  std::map<std::size_t, Matrix> grads_;
};

class Tape {
 public:
  // Backward rule for ops defined outside this file. Receives the gradient
  // flowing into the node and must accumulate (+=) into each input grad.
  // Input grads of inputs that do not depend on any parameter are nullptr.
  using BackwardFn = std::function<void(const Matrix& out_grad,
                                        std::span<Matrix* const> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeRef constant(Matrix value);
  NodeRef parameter(Matrix value);

  // value = a * b.
  NodeRef matmul(NodeRef a, NodeRef b);
  // value = a * b^T.
  NodeRef matmul_transposed(NodeRef a, NodeRef b);
  // Scales each row to unit Euclidean norm. Rows with norm below
  // kEpsilonNorm raise NumericError.
  NodeRef row_l2_normalize(NodeRef a);
  // value = x * w + b, with the 1-row bias broadcast over rows.
  NodeRef affine(NodeRef x, NodeRef w, NodeRef b);
  NodeRef tanh_act(NodeRef x);
  // Output row k is table row indices[k]. Backward scatter-adds.
  NodeRef gather_rows(NodeRef table, std::vector<std::size_t> indices);
  // One output row per consecutive segment of x, holding the segment mean.
  NodeRef mean_pool_rows(NodeRef x, std::vector<std::size_t> segment_lengths);
  // value = x * exp(s) for a 1x1 node s.
  NodeRef scale_by_exp(NodeRef x, NodeRef s);
  // 1x1 sum of all entries.
  NodeRef sum(NodeRef x);

  NodeRef custom(std::string name, std::vector<NodeRef> inputs, Matrix value,
                 BackwardFn backward);

  // Fills node gradients in strict reverse tape order and returns the
  // gradients of all parameter nodes. Throws DimensionError unless loss is
  // 1x1. Parameters the loss does not depend on get all-zero gradients.
  GradientMap backward(NodeRef loss);

  const Matrix& value(NodeRef n) const { return node(n).value; }
  // Gradient from the most recent backward(); empty for nodes the loss
  // cannot depend on.
  const Matrix& grad(NodeRef n) const { return node(n).grad; }
  OpTag op(NodeRef n) const { return node(n).op; }
  const std::vector<std::size_t>& inputs(NodeRef n) const {
    return node(n).inputs;
  }
  bool is_parameter(NodeRef n) const { return node(n).op == OpTag::kParameter; }
  bool requires_grad(NodeRef n) const { return node(n).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  std::vector<NodeRef> parameters() const;

 private:
  struct Node {
    OpTag op = OpTag::kConstant;
    std::string custom_name;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    // Op-specific saved state: gather indices, segment lengths, row norms.
    std::vector<std::size_t> index_aux;
    std::vector<double> real_aux;
    BackwardFn custom_backward;
  };

  const Node& node(NodeRef n) const;
  NodeRef push(Node n);
  void backprop_node(std::size_t id);
  Matrix* grad_slot(std::size_t input_id);

  std::vector<Node> nodes_;
};

}  // namespace mlcl::grad

#endif  // MLCL_TAPE_HPP_
