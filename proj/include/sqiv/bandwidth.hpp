#pragma once

#include <optional>
#include <string>

#include "sqiv/model.hpp"

namespace sqiv {

/// Smoothing bandwidth rule.
///  - fixed:h        → h
///  - rate:c,e       → c · n^e (default exponent -1/7, the n^{-1/(2r-1)} rate for r = 4)
///  - plugin         → (IQR/1.349 of pilot residuals) · n^{-1/7}. This is a scale
///                     rule of thumb standing in for a full plug-in formula; the
///                     chosen value is always reported.
struct BandwidthPolicy {
  enum class Kind { fixed, rate, plugin };
  Kind kind = Kind::fixed;
  double value = 0.1;
  double c = 1.0;
  double exponent = -1.0 / 7.0;
  double floor = 1e-10;

  static BandwidthPolicy fixed(double h);
  static BandwidthPolicy rate(double c, double exponent = -1.0 / 7.0);
  static BandwidthPolicy plugin();
  /// "fixed:0.1" | "rate:c,e" | "rate:c" | "plugin"
  static BandwidthPolicy parse(const std::string& text);
  std::string describe() const;
};

/// Positive bandwidth for this sample. `pilot` defaults to model.initial_guess(data).
double select_bandwidth(const BandwidthPolicy& policy, const Dataset& data,
                        const ResidualModel& model, double tau,
                        const std::optional<Vector>& pilot = std::nullopt);

}  // namespace sqiv
