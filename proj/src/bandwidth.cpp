#include "sqiv/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sqiv/error.hpp"

namespace sqiv {

BandwidthPolicy BandwidthPolicy::fixed(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("fixed bandwidth must be positive");
  BandwidthPolicy p;
  p.kind = Kind::fixed;
  p.value = h;
  return p;
}

BandwidthPolicy BandwidthPolicy::rate(double c, double exponent) {
  if (!(c > 0.0) || !std::isfinite(exponent)) throw ConfigError("rate bandwidth needs c > 0");
  BandwidthPolicy p;
  p.kind = Kind::rate;
  p.c = c;
  p.exponent = exponent;
  return p;
}

BandwidthPolicy BandwidthPolicy::plugin() {
  BandwidthPolicy p;
  p.kind = Kind::plugin;
  return p;
}

namespace {
double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in bandwidth policy '" + context + "'");
  }
}
}  // namespace

BandwidthPolicy BandwidthPolicy::parse(const std::string& text) {
  if (text == "plugin") return plugin();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("bandwidth policy must be fixed:h, rate:c,e or plugin");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "fixed") return fixed(parse_number(rest, text));
  if (kind == "rate") {
    const auto comma = rest.find(',');
    if (comma == std::string::npos) return rate(parse_number(rest, text));
    return rate(parse_number(rest.substr(0, comma), text), parse_number(rest.substr(comma + 1), text));
  }
  throw ConfigError("unknown bandwidth policy '" + kind + "'");
}

std::string BandwidthPolicy::describe() const {
  std::ostringstream s;
  s.precision(17);
  switch (kind) {
    case Kind::fixed: s << "fixed:" << value; break;
    case Kind::rate: s << "rate:" << c << ',' << exponent; break;
    case Kind::plugin: s << "plugin"; break;
  }
  return s.str();
}

double select_bandwidth(const BandwidthPolicy& policy, const Dataset& data,
                        const ResidualModel& model, double tau, const std::optional<Vector>& pilot) {
  if (data.n() < 2) throw InvalidArgument("bandwidth selection needs n >= 2");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  const double n = static_cast<double>(data.n());
  double h = 0.0;
  switch (policy.kind) {
    case BandwidthPolicy::Kind::fixed: h = policy.value; break;
    case BandwidthPolicy::Kind::rate: h = policy.c * std::pow(n, policy.exponent); break;
    case BandwidthPolicy::Kind::plugin: {
      const Vector beta = pilot ? *pilot : model.initial_guess(data);
      Vector r = model.residuals(data, beta);
      std::sort(r.data(), r.data() + r.size());
      double scale = (sorted_quantile(r, 0.75) - sorted_quantile(r, 0.25)) / 1.349;
      if (!(scale > 0.0)) {
        const double mean = r.mean();
        scale = std::sqrt((r.array() - mean).square().sum() / (n - 1.0));
      }
      h = scale * std::pow(n, -1.0 / 7.0);
      break;
    }
  }
  return std::max(h, policy.floor);
}

}  // namespace sqiv
