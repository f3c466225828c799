#pragma once

#include <optional>
#include <string>

#include "sqiv/moments.hpp"

namespace sqiv {

enum class CovarianceMode { iid, hac };
enum class HacKernel { bartlett, quadratic_spectral };

/// How the long-run variance of the moment contributions is estimated.
/// An empty hac_bandwidth selects Andrews' AR(1) plug-in rule.
struct CovarianceSpec {
  CovarianceMode mode = CovarianceMode::iid;
  HacKernel hac_kernel = HacKernel::quadratic_spectral;
  std::optional<double> hac_bandwidth;
  double rel_eigen_floor = 1e-10;

  std::string describe() const;
};

CovarianceSpec parse_covariance(const std::string& mode, const std::string& kernel,
                                const std::string& bandwidth);
std::string to_string(HacKernel k);

/// Lag weight w(x) of the HAC kernel at x = j / S.
double hac_weight(HacKernel kernel, double x);

/// Γ̂_j = (1/n) Σ_{t>=j} g_t g_{t-j}ᵀ for the rows of `contributions`.
Matrix lag_autocovariance(const Matrix& contributions, Index lag);

/// Andrews (1991) automatic bandwidth from coordinate-wise AR(1) fits.
double andrews_bandwidth(const Matrix& contributions, HacKernel kernel);

/// Γ̂_0 + Σ_j w(j/S)(Γ̂_j + Γ̂_jᵀ), symmetrized. Throws InvalidArgument when
/// the Bartlett lag window needs more than n/2 lags.
Matrix hac_from_contributions(const Matrix& contributions, const CovarianceSpec& spec);

/// Ω̄ = (1/n) Σ g_ni g_niᵀ.
Matrix omega_iid(const MomentContext& ctx, const Vector& beta);
Matrix omega_hac(const MomentContext& ctx, const Vector& beta, const CovarianceSpec& spec);
/// Dispatch on spec.mode.
Matrix omega(const MomentContext& ctx, const Vector& beta, const CovarianceSpec& spec);

/// τ(1-τ) (1/n) Σ Z_i Z_iᵀ, the iid long-run variance under a correct quantile restriction.
Matrix sigma_iid_quantile(const Dataset& data, double tau);

/// (Gᵀ Σ⁻¹ G)⁻¹ / n. Throws IdentificationError when G lacks full column rank.
Matrix asym_cov_mm(const Matrix& g, const Matrix& sigma, Index n, double rel_eigen_floor = 1e-10);

/// (GᵀWG)⁻¹ GᵀWΣWG (GᵀWG)⁻¹ / n.
Matrix asym_cov_gmm(const Matrix& g, const Matrix& w, const Matrix& sigma, Index n);

}  // namespace sqiv
