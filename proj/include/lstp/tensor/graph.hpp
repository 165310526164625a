#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lstp/tensor/array.hpp"

namespace lstp::tensor {

/// Handle to a node in a Graph. Only meaningful for the graph that issued it.
struct Var {
  std::uint32_t id = 0;
};

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kMatMul,
  kBatchMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kElu,
  kExp,
  kSoftmaxLast,
  kConcat,
  kSlice,
  kReshape,
  kSum,
  kMean,
  kClamp,
  kMinimum,
  kMaximum,
  kGaussianLogProb,
  kGaussianEntropy,
};

std::string_view op_name(Op op);

/// Define-by-run tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so insertion order is a valid
/// topological order and backward() walks it in reverse. Parameter nodes refer
/// to caller-owned arrays, which must outlive the graph and stay unmodified
/// until backward() returns.
///
/// Broadcasting is limited to a rank-1 right operand of add/sub whose length
/// equals the last dimension of the left operand (bias over leading rows).
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  Var constant(Array<T> value);
  /// Leaf bound to gradient slot `slot`; `value` is referenced, not copied.
  Var parameter(const Array<T>& value, std::size_t slot);

  /// a: [..., k], b: [k, n] -> [..., n]. Leading dimensions of `a` are flattened into rows.
  Var matmul(Var a, Var b);
  /// a: [B, m, k], b: [B, k, n] (or [B, n, k] with transpose_b) -> [B, m, n].
  Var bmm(Var a, Var b, bool transpose_b = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var sigmoid(Var a);
  Var tanh(Var a);
  /// ELU with alpha = 1.
  Var elu(Var a);
  Var exp(Var a);
  Var softmax_last(Var a);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length);
  Var reshape(Var a, Shape shape);
  Var sum(Var a);
  Var mean(Var a);
  Var clamp(Var a, T lo, T hi);
  Var minimum(Var a, Var b);
  Var maximum(Var a, Var b);
  /// Diagonal Gaussian log density. x, mu: [B, D]; log_sigma: [D] -> [B].
  Var gaussian_log_prob(Var x, Var mu, Var log_sigma);
  /// Entropy of a diagonal Gaussian with the given log std-devs: [D] -> scalar.
  Var gaussian_entropy(Var log_sigma);

  const Array<T>& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id).op; }

  /// Gradients of scalar `loss` with respect to every parameter slot in
  /// [0, slot_count). Slots the loss does not depend on receive zeros of the
  /// bound parameter's shape (or an empty array if never bound).
  std::vector<Array<T>> backward(Var loss, std::size_t slot_count) const;

 private:
  struct Node {
    Op op = Op::kConstant;
    std::uint32_t in0 = 0;
    std::uint32_t in1 = 0;
    std::uint32_t in2 = 0;
    std::vector<std::uint32_t> extra_inputs;  // concat
    Array<T> own;
    const Array<T>* external = nullptr;
    std::size_t slot = 0;
    std::size_t axis = 0;
    std::size_t start = 0;
    std::size_t length = 0;
    T lo = T(0);
    T hi = T(0);
    bool flag = false;

    const Array<T>& value() const { return external ? *external : own; }
  };

  Var push(Node node);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace lstp::tensor
