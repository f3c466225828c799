#include "sqiv/covariance.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sqiv/error.hpp"

namespace sqiv {

std::string to_string(HacKernel k) {
  return k == HacKernel::bartlett ? "bartlett" : "qs";
}

std::string CovarianceSpec::describe() const {
  std::ostringstream s;
  if (mode == CovarianceMode::iid) return "iid";
  s << "hac:" << to_string(hac_kernel) << ':';
  if (hac_bandwidth)
    s << *hac_bandwidth;
  else
    s << "auto";
  return s.str();
}

CovarianceSpec parse_covariance(const std::string& mode, const std::string& kernel,
                                const std::string& bandwidth) {
  CovarianceSpec spec;
  if (mode == "iid")
    spec.mode = CovarianceMode::iid;
  else if (mode == "hac")
    spec.mode = CovarianceMode::hac;
  else
    throw ConfigError("covariance mode must be 'iid' or 'hac', got '" + mode + "'");
  if (kernel == "bartlett")
    spec.hac_kernel = HacKernel::bartlett;
  else if (kernel == "qs" || kernel == "quadratic_spectral")
    spec.hac_kernel = HacKernel::quadratic_spectral;
  else
    throw ConfigError("HAC kernel must be 'bartlett' or 'qs', got '" + kernel + "'");
  if (bandwidth.empty() || bandwidth == "auto") {
    spec.hac_bandwidth.reset();
  } else {
    try {
      std::size_t used = 0;
      const double s = std::stod(bandwidth, &used);
      if (used != bandwidth.size() || !(s > 0.0)) throw std::invalid_argument("bad");
      spec.hac_bandwidth = s;
    } catch (const std::exception&) {
      throw ConfigError("HAC bandwidth must be 'auto' or a positive number, got '" + bandwidth + "'");
    }
  }
  return spec;
}

double hac_weight(HacKernel kernel, double x) {
  x = std::abs(x);
  if (kernel == HacKernel::bartlett) return std::max(0.0, 1.0 - x);
  if (x == 0.0) return 1.0;
  const double z = 6.0 * std::numbers::pi * x / 5.0;
  return 25.0 / (12.0 * std::numbers::pi * std::numbers::pi * x * x) *
         (std::sin(z) / z - std::cos(z));
}

Matrix lag_autocovariance(const Matrix& g, Index lag) {
  const Index n = g.rows();
  if (lag < 0 || lag >= n) throw InvalidArgument("lag out of range");
  const Index m = n - lag;
  return g.bottomRows(m).transpose() * g.topRows(m) / static_cast<double>(n);
}

double andrews_bandwidth(const Matrix& g, HacKernel kernel) {
  const Index n = g.rows();
  if (n < 3) throw InvalidArgument("automatic HAC bandwidth needs at least 3 observations");
  double num = 0.0, den = 0.0;
  for (Index a = 0; a < g.cols(); ++a) {
    const Vector lead = g.col(a).tail(n - 1);
    const Vector lagged = g.col(a).head(n - 1);
    const double sxx = lagged.squaredNorm();
    if (sxx <= 0.0) continue;
    double rho = lagged.dot(lead) / sxx;
    rho = std::clamp(rho, -0.97, 0.97);
    const double sigma2 = (lead - rho * lagged).squaredNorm() / static_cast<double>(n - 1);
    if (sigma2 <= 0.0) continue;
    const double s4 = sigma2 * sigma2;
    const double r2 = rho * rho;
    if (kernel == HacKernel::bartlett)
      num += 4.0 * r2 * s4 / (std::pow(1.0 - rho, 6) * std::pow(1.0 + rho, 2));
    else
      num += 4.0 * r2 * s4 / std::pow(1.0 - rho, 8);
    den += s4 / std::pow(1.0 - rho, 4);
  }
  if (den <= 0.0) return 1.0;
  const double alpha = num / den;
  const double nn = static_cast<double>(n);
  const double s = kernel == HacKernel::bartlett ? 1.1447 * std::pow(alpha * nn, 1.0 / 3.0)
                                                 : 1.3221 * std::pow(alpha * nn, 1.0 / 5.0);
  return std::max(s, 1e-8);
}

Matrix hac_from_contributions(const Matrix& g, const CovarianceSpec& spec) {
  const Index n = g.rows();
  Matrix out = lag_autocovariance(g, 0);
  const double s = spec.hac_bandwidth ? *spec.hac_bandwidth : andrews_bandwidth(g, spec.hac_kernel);
  if (!(s > 0.0)) throw InvalidArgument("HAC bandwidth must be positive");
  Index max_lag = n - 1;
  if (spec.hac_kernel == HacKernel::bartlett) {
    max_lag = static_cast<Index>(std::ceil(s)) - 1;
    if (max_lag > 0 && n < 2 * max_lag)
      throw InvalidArgument("HAC needs at least " + std::to_string(2 * max_lag) +
                            " observations for bandwidth " + std::to_string(s));
  }
  for (Index j = 1; j <= max_lag; ++j) {
    const double w = hac_weight(spec.hac_kernel, static_cast<double>(j) / s);
    if (w == 0.0) continue;
    const Matrix gamma = lag_autocovariance(g, j);
    out += w * (gamma + gamma.transpose());
  }
  return symmetrize(out);
}

Matrix omega_iid(const MomentContext& ctx, const Vector& beta) {
  return symmetrize(lag_autocovariance(moment_contributions(ctx, beta), 0));
}

Matrix omega_hac(const MomentContext& ctx, const Vector& beta, const CovarianceSpec& spec) {
  return hac_from_contributions(moment_contributions(ctx, beta), spec);
}

Matrix omega(const MomentContext& ctx, const Vector& beta, const CovarianceSpec& spec) {
  return spec.mode == CovarianceMode::iid ? omega_iid(ctx, beta) : omega_hac(ctx, beta, spec);
}

Matrix sigma_iid_quantile(const Dataset& data, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  const Matrix& z = data.Z();
  return symmetrize(tau * (1.0 - tau) * (z.transpose() * z) / static_cast<double>(data.n()));
}

namespace {

Matrix checked_spd_inverse(const Matrix& a, const char* what) {
  Eigen::LDLT<Matrix> ldlt(symmetrize(a));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw IdentificationError(std::string(what) + " is not positive definite");
  const Vector d = ldlt.vectorD();
  if (d.minCoeff() <= 1e-14 * std::max(1.0, d.cwiseAbs().maxCoeff()))
    throw IdentificationError(std::string(what) + " is singular");
  return symmetrize(ldlt.solve(Matrix::Identity(a.rows(), a.cols())));
}

void check_shapes(const Matrix& g, const Matrix& sigma, Index n) {
  if (n < 1) throw InvalidArgument("sample size must be positive");
  if (sigma.rows() != g.rows() || sigma.cols() != g.rows())
    throw InvalidArgument("Sigma must be d_Z x d_Z matching G");
  if (g.cols() > g.rows()) throw IdentificationError("more parameters than moments");
  if (!g.allFinite() || !sigma.allFinite()) throw NumericalError("non-finite G or Sigma");
}

}  // namespace

Matrix asym_cov_mm(const Matrix& g, const Matrix& sigma, Index n, double rel_eigen_floor) {
  check_shapes(g, sigma, n);
  if (numerical_rank(g) < g.cols())
    throw IdentificationError("G does not have full column rank; beta is not locally identified");
  const Matrix sigma_inv = floored_spd_inverse(sigma, rel_eigen_floor);
  const Matrix info = g.transpose() * sigma_inv * g;
  return checked_spd_inverse(info, "G' Sigma^-1 G") / static_cast<double>(n);
}

Matrix asym_cov_gmm(const Matrix& g, const Matrix& w, const Matrix& sigma, Index n) {
  check_shapes(g, sigma, n);
  if (w.rows() != g.rows() || w.cols() != g.rows()) throw InvalidArgument("W must be d_Z x d_Z");
  const Matrix bread = checked_spd_inverse(g.transpose() * w * g, "G' W G");
  const Matrix meat = g.transpose() * w * sigma * w * g;
  return symmetrize(bread * meat * bread) / static_cast<double>(n);
}

}  // namespace sqiv
