#include "lstp/tensor/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lstp::tensor {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kMatMul: return "matmul";
    case Op::kBatchMatMul: return "bmm";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kElu: return "elu";
    case Op::kExp: return "exp";
    case Op::kSoftmaxLast: return "softmax_last";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kReshape: return "reshape";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kClamp: return "clamp";
    case Op::kMinimum: return "minimum";
    case Op::kMaximum: return "maximum";
    case Op::kGaussianLogProb: return "gaussian_log_prob";
    case Op::kGaussianEntropy: return "gaussian_entropy";
  }
  return "unknown";
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
constexpr T kHalfLog2Pi = T(0.91893853320467274178032973640562);  // 0.5 * ln(2*pi)

// Splits `shape` around `axis` into (outer, axis_len, inner).
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

bool is_bias_broadcast(const Shape& a, const Shape& b) {
  return b.size() == 1 && !a.empty() && a.back() == b[0] && a != b;
}

template <typename T>
void add_into(Array<T>& dst, std::span<const T> src) {
  auto d = dst.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

}  // namespace

template <typename T>
Var Graph<T>::push(Node n) {
  if (!n.external && !n.own.all_finite()) {
    throw NumericError("non-finite output from " + std::string(op_name(n.op)) + " node #" +
                       std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  return nodes_[v.id];
}

template <typename T>
const Array<T>& Graph<T>::value(Var v) const {
  return node(v).value();
}

template <typename T>
Var Graph<T>::constant(Array<T> value) {
  Node n;
  n.op = Op::kConstant;
  n.own = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::parameter(const Array<T>& value, std::size_t slot) {
  if (!value.all_finite()) throw NumericError("parameter slot " + std::to_string(slot) + " is not finite");
  Node n;
  n.op = Op::kParameter;
  n.external = &value;
  n.slot = slot;
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.rank() < 1 || bv.rank() != 2 || av.shape().back() != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  const std::size_t k = bv.dim(0);
  const std::size_t ncols = bv.dim(1);
  const std::size_t rows = av.size() / k;
  Shape out_shape = av.shape();
  out_shape.back() = ncols;
  Array<T> out(out_shape);
  MapMat<T>(out.raw(), rows, ncols).noalias() =
      ConstMapMat<T>(av.raw(), rows, k) * ConstMapMat<T>(bv.raw(), k, ncols);
  Node n;
  n.op = Op::kMatMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::bmm(Var a, Var b, bool transpose_b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0)) {
    throw DimensionError("bmm: expected rank-3 operands with equal batch, got " +
                         shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
  const std::size_t bk = transpose_b ? bv.dim(2) : bv.dim(1);
  const std::size_t ncols = transpose_b ? bv.dim(1) : bv.dim(2);
  if (bk != k) {
    throw DimensionError("bmm: inner dimensions differ: " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  }
  Array<T> out(Shape{batch, m, ncols});
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMapMat<T> am(av.raw() + i * m * k, m, k);
    MapMat<T> om(out.raw() + i * m * ncols, m, ncols);
    if (transpose_b) {
      om.noalias() = am * ConstMapMat<T>(bv.raw() + i * ncols * k, ncols, k).transpose();
    } else {
      om.noalias() = am * ConstMapMat<T>(bv.raw() + i * k * ncols, k, ncols);
    }
  }
  Node n;
  n.op = Op::kBatchMatMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.flag = transpose_b;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  const bool bias = is_bias_broadcast(av.shape(), bv.shape());
  if (!bias && av.shape() != bv.shape()) {
    throw DimensionError("add: shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  Array<T> out(av.shape());
  const std::size_t nb = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[bias ? i % nb : i];
  Node n;
  n.op = Op::kAdd;
  n.in0 = a.id;
  n.in1 = b.id;
  n.flag = bias;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  const bool bias = is_bias_broadcast(av.shape(), bv.shape());
  if (!bias && av.shape() != bv.shape()) {
    throw DimensionError("sub: shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  Array<T> out(av.shape());
  const std::size_t nb = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[bias ? i % nb : i];
  Node n;
  n.op = Op::kSub;
  n.in0 = a.id;
  n.in1 = b.id;
  n.flag = bias;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.shape() != bv.shape()) {
    throw DimensionError("mul: shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Node n;
  n.op = Op::kMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  const auto& av = value(a);
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  Node n;
  n.op = Op::kScale;
  n.in0 = a.id;
  n.lo = factor;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::sigmoid(Var a) {
  const auto& av = value(a);
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = av[i];
    // Branching keeps exp() from overflowing for large |x|.
    if (x >= 0) {
      out[i] = T(1) / (T(1) + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out[i] = e / (T(1) + e);
    }
  }
  Node n;
  n.op = Op::kSigmoid;
  n.in0 = a.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::tanh(Var a) {
  const auto& av = value(a);
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  Node n;
  n.op = Op::kTanh;
  n.in0 = a.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::elu(Var a) {
  const auto& av = value(a);
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = av[i];
    out[i] = x >= 0 ? x : std::expm1(x);
  }
  Node n;
  n.op = Op::kElu;
  n.in0 = a.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::exp(Var a) {
  const auto& av = value(a);
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  Node n;
  n.op = Op::kExp;
  n.in0 = a.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::softmax_last(Var a) {
  const auto& av = value(a);
  if (av.rank() == 0) throw DimensionError("softmax_last: input has no axis");
  const std::size_t len = av.shape().back();
  const std::size_t rows = av.size() / len;
  Array<T> out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.raw() + r * len;
    T* y = out.raw() + r * len;
    const T mx = *std::max_element(x, x + len);
    T total = 0;
    for (std::size_t j = 0; j < len; ++j) {
      y[j] = std::exp(x[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < len; ++j) y[j] /= total;
  }
  Node n;
  n.op = Op::kSoftmaxLast;
  n.in0 = a.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = shape(parts[0]);
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = shape(p);
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: shapes " + shape_string(first) + " and " + shape_string(s));
      }
    }
    out_shape[axis] += s[axis];
  }
  Array<T> out(out_shape);
  const auto os = split_axis(out_shape, axis);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto& pv = value(p);
    const std::size_t len = pv.shape()[axis];
    for (std::size_t o = 0; o < os.outer; ++o) {
      const T* src = pv.raw() + o * len * os.inner;
      T* dst = out.raw() + (o * os.len + offset) * os.inner;
      std::copy(src, src + len * os.inner, dst);
    }
    offset += len;
  }
  Node n;
  n.op = Op::kConcat;
  n.axis = axis;
  for (const Var& p : parts) n.extra_inputs.push_back(p.id);
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto& av = value(a);
  if (axis >= av.rank() || length == 0 || start + length > av.dim(axis)) {
    throw DimensionError("slice: [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") on axis " + std::to_string(axis) + " of " + shape_string(av.shape()));
  }
  Shape out_shape = av.shape();
  out_shape[axis] = length;
  Array<T> out(out_shape);
  const auto s = split_axis(av.shape(), axis);
  for (std::size_t o = 0; o < s.outer; ++o) {
    const T* src = av.raw() + (o * s.len + start) * s.inner;
    std::copy(src, src + length * s.inner, out.raw() + o * length * s.inner);
  }
  Node n;
  n.op = Op::kSlice;
  n.in0 = a.id;
  n.axis = axis;
  n.start = start;
  n.length = length;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::reshape(Var a, Shape new_shape) {
  Node n;
  n.op = Op::kReshape;
  n.in0 = a.id;
  n.own = value(a).reshaped(std::move(new_shape));
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::sum(Var a) {
  const auto& av = value(a);
  T total = 0;
  for (auto x : av.data()) total += x;
  Node n;
  n.op = Op::kSum;
  n.in0 = a.id;
  n.own = Array<T>::scalar(total);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::mean(Var a) {
  const auto& av = value(a);
  T total = 0;
  for (auto x : av.data()) total += x;
  Node n;
  n.op = Op::kMean;
  n.in0 = a.id;
  n.own = Array<T>::scalar(total / static_cast<T>(av.size()));
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::clamp(Var a, T lo, T hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  const auto& av = value(a);
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(av[i], lo, hi);
  Node n;
  n.op = Op::kClamp;
  n.in0 = a.id;
  n.lo = lo;
  n.hi = hi;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::minimum(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.shape() != bv.shape()) throw DimensionError("minimum: shape mismatch");
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bv[i] < av[i] ? bv[i] : av[i];
  Node n;
  n.op = Op::kMinimum;
  n.in0 = a.id;
  n.in1 = b.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::maximum(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.shape() != bv.shape()) throw DimensionError("maximum: shape mismatch");
  Array<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bv[i] > av[i] ? bv[i] : av[i];
  Node n;
  n.op = Op::kMaximum;
  n.in0 = a.id;
  n.in1 = b.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::gaussian_log_prob(Var x, Var mu, Var log_sigma) {
  const auto& xv = value(x);
  const auto& mv = value(mu);
  const auto& lv = value(log_sigma);
  if (xv.rank() != 2 || xv.shape() != mv.shape() || lv.rank() != 1 || lv.dim(0) != xv.dim(1)) {
    throw DimensionError("gaussian_log_prob: x " + shape_string(xv.shape()) + ", mu " +
                         shape_string(mv.shape()) + ", log_sigma " + shape_string(lv.shape()));
  }
  const std::size_t batch = xv.dim(0), d = xv.dim(1);
  Array<T> out(Shape{batch});
  for (std::size_t b = 0; b < batch; ++b) {
    T acc = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T z = (xv[b * d + j] - mv[b * d + j]) * std::exp(-lv[j]);
      acc -= T(0.5) * z * z + lv[j] + kHalfLog2Pi<T>;
    }
    out[b] = acc;
  }
  Node n;
  n.op = Op::kGaussianLogProb;
  n.in0 = x.id;
  n.in1 = mu.id;
  n.in2 = log_sigma.id;
  n.own = std::move(out);
  return push(std::move(n));
}

template <typename T>
Var Graph<T>::gaussian_entropy(Var log_sigma) {
  const auto& lv = value(log_sigma);
  if (lv.rank() != 1) throw DimensionError("gaussian_entropy: expected rank-1 log_sigma");
  T acc = 0;
  for (auto ls : lv.data()) acc += T(0.5) + kHalfLog2Pi<T> + ls;
  Node n;
  n.op = Op::kGaussianEntropy;
  n.in0 = log_sigma.id;
  n.own = Array<T>::scalar(acc);
  return push(std::move(n));
}

template <typename T>
std::vector<Array<T>> Graph<T>::backward(Var loss, std::size_t slot_count) const {
  const Node& ln = node(loss);
  if (ln.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(ln.value().shape()));
  }

  // Which nodes lie on a path from a parameter; others never need a gradient.
  std::vector<char> live(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::kConstant: break;
      case Op::kParameter: live[i] = 1; break;
      case Op::kConcat:
        for (auto id : n.extra_inputs) live[i] |= live[id];
        break;
      case Op::kGaussianLogProb: live[i] = live[n.in0] | live[n.in1] | live[n.in2]; break;
      case Op::kMatMul:
      case Op::kBatchMatMul:
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kMinimum:
      case Op::kMaximum: live[i] = live[n.in0] | live[n.in1]; break;
      default: live[i] = live[n.in0]; break;
    }
  }

  std::vector<Array<T>> grads(loss.id + 1);
  auto grad_of = [&](std::uint32_t id) -> Array<T>& {
    if (grads[id].empty()) grads[id] = Array<T>(nodes_[id].value().shape());
    return grads[id];
  };

  std::vector<Array<T>> out(slot_count);
  for (const Node& n : nodes_) {
    if (n.op == Op::kParameter && n.slot < slot_count && out[n.slot].empty()) {
      out[n.slot] = Array<T>(n.value().shape());
    }
  }
  if (!live[loss.id]) return out;
  grads[loss.id] = Array<T>::filled(ln.value().shape(), T(1));

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    if (!live[idx] || grads[idx].empty()) continue;
    const Node& n = nodes_[idx];
    const Array<T>& g = grads[idx];
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient at " + std::string(op_name(n.op)) + " node #" +
                         std::to_string(idx));
    }
    const Array<T>& y = n.value();

    switch (n.op) {
      case Op::kConstant: break;
      case Op::kParameter:
        if (n.slot < slot_count) add_into(out[n.slot], g.data());
        break;
      case Op::kMatMul: {
        const auto& av = nodes_[n.in0].value();
        const auto& bv = nodes_[n.in1].value();
        const std::size_t k = bv.dim(0), ncols = bv.dim(1), rows = av.size() / k;
        ConstMapMat<T> gm(g.raw(), rows, ncols);
        if (live[n.in0]) {
          MapMat<T>(grad_of(n.in0).raw(), rows, k).noalias() +=
              gm * ConstMapMat<T>(bv.raw(), k, ncols).transpose();
        }
        if (live[n.in1]) {
          MapMat<T>(grad_of(n.in1).raw(), k, ncols).noalias() +=
              ConstMapMat<T>(av.raw(), rows, k).transpose() * gm;
        }
        break;
      }
      case Op::kBatchMatMul: {
        const auto& av = nodes_[n.in0].value();
        const auto& bv = nodes_[n.in1].value();
        const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
        const std::size_t ncols = y.dim(2);
        T* ga = live[n.in0] ? grad_of(n.in0).raw() : nullptr;
        T* gb = live[n.in1] ? grad_of(n.in1).raw() : nullptr;
        for (std::size_t i = 0; i < batch; ++i) {
          ConstMapMat<T> gm(g.raw() + i * m * ncols, m, ncols);
          ConstMapMat<T> am(av.raw() + i * m * k, m, k);
          if (n.flag) {
            ConstMapMat<T> bm(bv.raw() + i * ncols * k, ncols, k);  // y = a * b^T
            if (ga) MapMat<T>(ga + i * m * k, m, k).noalias() += gm * bm;
            if (gb) MapMat<T>(gb + i * ncols * k, ncols, k).noalias() += gm.transpose() * am;
          } else {
            ConstMapMat<T> bm(bv.raw() + i * k * ncols, k, ncols);
            if (ga) MapMat<T>(ga + i * m * k, m, k).noalias() += gm * bm.transpose();
            if (gb) MapMat<T>(gb + i * k * ncols, k, ncols).noalias() += am.transpose() * gm;
          }
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub: {
        const T sign = n.op == Op::kAdd ? T(1) : T(-1);
        if (live[n.in0]) add_into(grad_of(n.in0), g.data());
        if (live[n.in1]) {
          auto& gb = grad_of(n.in1);
          const std::size_t nb = gb.size();
          for (std::size_t i = 0; i < g.size(); ++i) gb[n.flag ? i % nb : i] += sign * g[i];
        }
        break;
      }
      case Op::kMul: {
        const auto& av = nodes_[n.in0].value();
        const auto& bv = nodes_[n.in1].value();
        if (live[n.in0]) {
          auto& ga = grad_of(n.in0);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (live[n.in1]) {
          auto& gb = grad_of(n.in1);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::kScale: {
        auto& ga = grad_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.lo;
        break;
      }
      case Op::kSigmoid: {
        auto& ga = grad_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
        break;
      }
      case Op::kTanh: {
        auto& ga = grad_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
        break;
      }
      case Op::kElu: {
        const auto& av = nodes_[n.in0].value();
        auto& ga = grad_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += av[i] >= 0 ? g[i] : g[i] * (y[i] + T(1));
        break;
      }
      case Op::kExp: {
        auto& ga = grad_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        break;
      }
      case Op::kSoftmaxLast: {
        auto& ga = grad_of(n.in0);
        const std::size_t len = y.shape().back();
        const std::size_t rows = y.size() / len;
        for (std::size_t r = 0; r < rows; ++r) {
          const T* yr = y.raw() + r * len;
          const T* gr = g.raw() + r * len;
          T dot = 0;
          for (std::size_t j = 0; j < len; ++j) dot += gr[j] * yr[j];
          T* dst = ga.raw() + r * len;
          for (std::size_t j = 0; j < len; ++j) dst[j] += yr[j] * (gr[j] - dot);
        }
        break;
      }
      case Op::kConcat: {
        const auto os = split_axis(y.shape(), n.axis);
        std::size_t offset = 0;
        for (auto id : n.extra_inputs) {
          const std::size_t len = nodes_[id].value().shape()[n.axis];
          if (live[id]) {
            auto& gp = grad_of(id);
            for (std::size_t o = 0; o < os.outer; ++o) {
              const T* src = g.raw() + (o * os.len + offset) * os.inner;
              T* dst = gp.raw() + o * len * os.inner;
              for (std::size_t i = 0; i < len * os.inner; ++i) dst[i] += src[i];
            }
          }
          offset += len;
        }
        break;
      }
      case Op::kSlice: {
        auto& ga = grad_of(n.in0);
        const auto s = split_axis(ga.shape(), n.axis);
        for (std::size_t o = 0; o < s.outer; ++o) {
          T* dst = ga.raw() + (o * s.len + n.start) * s.inner;
          const T* src = g.raw() + o * n.length * s.inner;
          for (std::size_t i = 0; i < n.length * s.inner; ++i) dst[i] += src[i];
        }
        break;
      }
      case Op::kReshape:
        add_into(grad_of(n.in0), g.data());
        break;
      case Op::kSum: {
        auto& ga = grad_of(n.in0);
        const T gs = g[0];
        for (auto& x : ga.data()) x += gs;
        break;
      }
      case Op::kMean: {
        auto& ga = grad_of(n.in0);
        const T gs = g[0] / static_cast<T>(ga.size());
        for (auto& x : ga.data()) x += gs;
        break;
      }
      case Op::kClamp: {
        const auto& av = nodes_[n.in0].value();
        auto& ga = grad_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (av[i] >= n.lo && av[i] <= n.hi) ga[i] += g[i];
        }
        break;
      }
      case Op::kMinimum:
      case Op::kMaximum: {
        const auto& av = nodes_[n.in0].value();
        const auto& bv = nodes_[n.in1].value();
        const bool is_min = n.op == Op::kMinimum;
        for (std::size_t i = 0; i < g.size(); ++i) {
          // Ties route the gradient to the first operand.
          const bool pick_b = is_min ? bv[i] < av[i] : bv[i] > av[i];
          const std::uint32_t target = pick_b ? n.in1 : n.in0;
          if (live[target]) grad_of(target)[i] += g[i];
        }
        break;
      }
      case Op::kGaussianLogProb: {
        const auto& xv = nodes_[n.in0].value();
        const auto& mv = nodes_[n.in1].value();
        const auto& lv = nodes_[n.in2].value();
        const std::size_t batch = xv.dim(0), d = xv.dim(1);
        T* gx = live[n.in0] ? grad_of(n.in0).raw() : nullptr;
        T* gm = live[n.in1] ? grad_of(n.in1).raw() : nullptr;
        T* gl = live[n.in2] ? grad_of(n.in2).raw() : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t j = 0; j < d; ++j) {
            const T inv_var = std::exp(T(-2) * lv[j]);
            const T diff = xv[b * d + j] - mv[b * d + j];
            if (gx) gx[b * d + j] -= g[b] * diff * inv_var;
            if (gm) gm[b * d + j] += g[b] * diff * inv_var;
            if (gl) gl[j] += g[b] * (diff * diff * inv_var - T(1));
          }
        }
        break;
      }
      case Op::kGaussianEntropy: {
        auto& ga = grad_of(n.in0);
        for (auto& x : ga.data()) x += g[0];
        break;
      }
    }
  }

  for (std::size_t s = 0; s < out.size(); ++s) {
    if (!out[s].all_finite()) throw NumericError("non-finite gradient for parameter slot " + std::to_string(s));
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace lstp::tensor
