#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lstp/tensor/array.hpp"

namespace lstp::tensor {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily on the first
/// step and must keep matching the parameter shapes afterwards.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(std::span<Array<T>> params, std::span<const Array<T>> grads);

  const AdamConfig& config() const noexcept { return config_; }
  AdamConfig& config() noexcept { return config_; }
  std::int64_t steps() const noexcept { return t_; }
  const std::vector<Array<T>>& first_moment() const noexcept { return m_; }
  const std::vector<Array<T>>& second_moment() const noexcept { return v_; }

  /// Restores saved state; shapes are validated on the next step().
  void restore(std::int64_t t, std::vector<Array<T>> m, std::vector<Array<T>> v);

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Array<T>> m_;
  std::vector<Array<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace lstp::tensor
