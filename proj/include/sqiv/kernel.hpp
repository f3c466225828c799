#pragma once

#include <memory>
#include <string>
#include <vector>

namespace sqiv {

/// Smoothed indicator Ĩ(u) approximating 1{u >= 0}, together with its
/// derivative Ĩ'(u), a symmetric kernel supported on [-1, 1].
///
/// Ĩ is exactly 0 below -1 and exactly 1 above +1. Inside the support it may
/// leave [0, 1] (higher-order kernels take negative values), but stays within
/// [-1, 2].
class SmoothKernel {
 public:
  virtual ~SmoothKernel() = default;
  virtual double indicator(double u) const = 0;
  virtual double derivative(double u) const = 0;
  /// Number of the first non-vanishing moment of Ĩ'.
  virtual int order() const = 0;
  virtual std::string name() const = 0;
  /// ∫_{-1}^{1} u^k Ĩ'(u) du.
  virtual double moment(int k) const = 0;
};

/// Kernel whose derivative is c * Σ_j a_j u^{2j} on [-1, 1]. Both built-in
/// kernels are of this form, which makes their moments exact rationals.
class PolynomialKernel final : public SmoothKernel {
 public:
  PolynomialKernel(std::string name, int order, double scale,
                   std::vector<double> even_coefficients);

  double indicator(double u) const override;
  double derivative(double u) const override;
  int order() const override { return order_; }
  std::string name() const override { return name_; }
  double moment(int k) const override;

 private:
  std::string name_;
  int order_;
  double scale_;
  std::vector<double> coef_;  // coefficient of u^{2j}
};

/// Fourth-order kernel: Ĩ(u) = 0.5 + (105/64)(u - 5u³/3 + 7u⁵/5 - 3u⁷/7) on [-1, 1].
std::shared_ptr<const SmoothKernel> default_kernel();
/// Second-order (integrated Epanechnikov) kernel; mostly useful for comparisons.
std::shared_ptr<const SmoothKernel> epanechnikov_kernel();
/// Look up a registered kernel by name ("poly4", "epanechnikov").
std::shared_ptr<const SmoothKernel> kernel_by_name(const std::string& name);

// Free functions on the default kernel. Non-finite input throws InvalidArgument.
double smoothed_indicator(double u);
double smoothed_indicator_deriv(double u);
/// Exact for 0 <= k <= 8.
double kernel_moment(int k);

}  // namespace sqiv
