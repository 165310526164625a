#include "lstp/tensor/adam.hpp"

#include <cmath>

namespace lstp::tensor {

template <typename T>
void Adam<T>::step(std::span<Array<T>> params, std::span<const Array<T>> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }
  if (m_.size() != params.size()) throw DimensionError("adam: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || m_[i].shape() != params[i].shape()) {
      throw DimensionError("adam: shape mismatch at parameter " + std::to_string(i) + ": param " +
                           shape_string(params[i].shape()) + ", grad " + shape_string(grads[i].shape()));
    }
  }

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step_size = config_.lr / c1;
  const double sqrt_c2 = std::sqrt(c2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].raw();
    const T* g = grads[i].raw();
    T* m = m_[i].raw();
    T* v = v_[i].raw();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      // m_hat / (sqrt(v_hat) + eps) with both corrections folded in.
      p[j] = static_cast<T>(p[j] - step_size * mj / (std::sqrt(vj) / sqrt_c2 + config_.eps));
    }
  }
}

template <typename T>
void Adam<T>::restore(std::int64_t t, std::vector<Array<T>> m, std::vector<Array<T>> v) {
  if (t < 0 || m.size() != v.size()) throw ContractError("adam: inconsistent restored state");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace lstp::tensor
