#include "sqiv/kernel.hpp"

#include <cmath>

#include "sqiv/error.hpp"

namespace sqiv {

namespace {

void require_finite(double u) {
  if (!std::isfinite(u)) throw InvalidArgument("kernel argument must be finite");
}

}  // namespace

PolynomialKernel::PolynomialKernel(std::string name, int order, double scale,
                                   std::vector<double> even_coefficients)
    : name_(std::move(name)), order_(order), scale_(scale), coef_(std::move(even_coefficients)) {
  if (coef_.empty()) throw InvalidArgument("polynomial kernel needs coefficients");
}

double PolynomialKernel::derivative(double u) const {
  require_finite(u);
  if (u < -1.0 || u > 1.0) return 0.0;
  if (u == -1.0 || u == 1.0) return 0.0;
  const double u2 = u * u;
  double acc = 0.0;
  for (auto it = coef_.rbegin(); it != coef_.rend(); ++it) acc = acc * u2 + *it;
  return scale_ * acc;
}

double PolynomialKernel::indicator(double u) const {
  require_finite(u);
  if (u < -1.0) return 0.0;
  if (u > 1.0) return 1.0;
  // Antiderivative of the even polynomial: Σ a_j u^{2j+1} / (2j+1).
  const double u2 = u * u;
  double acc = 0.0;
  for (std::size_t j = coef_.size(); j-- > 0;)
    acc = acc * u2 + coef_[j] / static_cast<double>(2 * j + 1);
  return 0.5 + scale_ * u * acc;
}

double PolynomialKernel::moment(int k) const {
  if (k < 0) throw InvalidArgument("kernel moment order must be non-negative");
  if (k % 2 == 1) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < coef_.size(); ++j) {
    const int power = k + 2 * static_cast<int>(j);
    acc += coef_[j] * 2.0 / static_cast<double>(power + 1);
  }
  return scale_ * acc;
}

std::shared_ptr<const SmoothKernel> default_kernel() {
  static const auto k = std::make_shared<const PolynomialKernel>(
      "poly4", 4, 105.0 / 64.0, std::vector<double>{1.0, -5.0, 7.0, -3.0});
  return k;
}

std::shared_ptr<const SmoothKernel> epanechnikov_kernel() {
  static const auto k = std::make_shared<const PolynomialKernel>(
      "epanechnikov", 2, 0.75, std::vector<double>{1.0, -1.0});
  return k;
}

std::shared_ptr<const SmoothKernel> kernel_by_name(const std::string& name) {
  if (name == "poly4" || name == "default") return default_kernel();
  if (name == "epanechnikov") return epanechnikov_kernel();
  throw InvalidArgument("unknown kernel '" + name + "'");
}

double smoothed_indicator(double u) { return default_kernel()->indicator(u); }
double smoothed_indicator_deriv(double u) { return default_kernel()->derivative(u); }

double kernel_moment(int k) {
  if (k > 8) throw InvalidArgument("kernel_moment supports k <= 8");
  return default_kernel()->moment(k);
}

}  // namespace sqiv
