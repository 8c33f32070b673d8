#pragma once

#include <cmath>
#include <span>

namespace pnr::detail {

// Neumaier's variant of Kahan summation.
template <typename Real>
class BasicNeumaierSum {
 public:
  void add(Real x) noexcept {
    const Real t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  Real value() const noexcept { return sum_ + comp_; }

 private:
  Real sum_ = 0;
  Real comp_ = 0;
};

using NeumaierSum = BasicNeumaierSum<double>;

inline double compensated_sum(std::span<const double> xs) noexcept {
  NeumaierSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

}  // namespace pnr::detail
