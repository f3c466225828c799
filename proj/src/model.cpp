#include "sqiv/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sqiv/error.hpp"

namespace sqiv {

Box Box::uniform(Index dim, double bound) {
  return Box{Vector::Constant(dim, -bound), Vector::Constant(dim, bound)};
}

bool Box::contains(const Vector& x) const {
  if (x.size() != dim()) return false;
  return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
}

Vector Box::project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

namespace {

std::vector<std::string> default_names(const std::string& prefix, Index count,
                                       std::vector<std::string> names) {
  if (names.empty()) {
    for (Index j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j));
  }
  if (static_cast<Index>(names.size()) != count)
    throw InvalidArgument("column name count does not match column count for " + prefix);
  return names;
}

}  // namespace

Dataset::Dataset(Matrix y, Matrix x, Matrix z, std::vector<Index> x_in_z,
                 std::vector<std::string> y_names, std::vector<std::string> x_names,
                 std::vector<std::string> z_names)
    : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)), x_in_z_(std::move(x_in_z)) {
  const Index n = y_.rows();
  if (x_.rows() != n || z_.rows() != n)
    throw InvalidArgument("Y, X and Z must share the row count");
  if (n < 1) throw InvalidArgument("dataset must have at least one row");
  if (!y_.allFinite() || !x_.allFinite() || !z_.allFinite())
    throw InvalidArgument("dataset contains non-finite values");
  if (static_cast<Index>(x_in_z_.size()) != x_.cols())
    throw InvalidArgument("x_in_z must map every X column into Z");
  for (Index c : x_in_z_)
    if (c < 0 || c >= z_.cols()) throw InvalidArgument("x_in_z index out of range");
  y_names_ = default_names("y", y_.cols(), std::move(y_names));
  x_names_ = default_names("x", x_.cols(), std::move(x_names));
  z_names_ = default_names("z", z_.cols(), std::move(z_names));
}

Dataset Dataset::with_instruments(Matrix z, std::vector<Index> x_in_z,
                                  std::vector<std::string> z_names) const {
  return Dataset(y_, x_, std::move(z), std::move(x_in_z), y_names_, x_names_, std::move(z_names));
}

// ---------------------------------------------------------------------------

void ResidualModel::set_box(Box box) {
  if (box.lower.size() != dim() || box.upper.size() != dim())
    throw InvalidArgument("parameter box dimension mismatch");
  if ((box.lower.array() > box.upper.array()).any())
    throw InvalidArgument("parameter box lower bound exceeds upper bound");
  box_ = std::move(box);
}

Vector ResidualModel::residuals(const Dataset& data, const Vector& beta) const {
  Vector out(data.n());
  for (Index i = 0; i < data.n(); ++i) out[i] = evaluate(data.Y().row(i), data.X().row(i), beta);
  return out;
}

Matrix ResidualModel::gradients(const Dataset& data, const Vector& beta) const {
  Matrix out(data.n(), dim());
  for (Index i = 0; i < data.n(); ++i)
    out.row(i) = gradient(data.Y().row(i), data.X().row(i), beta).transpose();
  return out;
}

// ---------------------------------------------------------------------------

LinearResidualModel::LinearResidualModel(Index outcome_col, std::vector<Index> endog_cols,
                                         std::vector<Index> exog_cols, double bound)
    : ResidualModel(Box::uniform(static_cast<Index>(endog_cols.size() + exog_cols.size()), bound)),
      outcome_(outcome_col),
      endog_(std::move(endog_cols)),
      exog_(std::move(exog_cols)) {
  if (outcome_ < 0) throw InvalidArgument("outcome column must be non-negative");
  std::set<Index> y_cols{outcome_};
  for (Index c : endog_) {
    if (c < 0) throw InvalidArgument("endogenous column must be non-negative");
    if (!y_cols.insert(c).second) throw InvalidArgument("outcome and endogenous columns must be distinct");
  }
  std::set<Index> x_cols;
  for (Index c : exog_) {
    if (c < 0) throw InvalidArgument("exogenous column must be non-negative");
    if (!x_cols.insert(c).second) throw InvalidArgument("exogenous columns must be distinct");
  }
  if (dim() == 0) throw InvalidArgument("linear model needs at least one coefficient");
}

double LinearResidualModel::evaluate(const RowView& y, const RowView& x, const Vector& beta) const {
  double v = y[outcome_];
  Index k = 0;
  for (Index c : endog_) v -= y[c] * beta[k++];
  for (Index c : exog_) v -= x[c] * beta[k++];
  return v;
}

Vector LinearResidualModel::gradient(const RowView& y, const RowView& x, const Vector&) const {
  Vector g(dim());
  Index k = 0;
  for (Index c : endog_) g[k++] = -y[c];
  for (Index c : exog_) g[k++] = -x[c];
  return g;
}

Matrix LinearResidualModel::regressors(const Dataset& data) const {
  Matrix r(data.n(), dim());
  Index k = 0;
  for (Index c : endog_) r.col(k++) = data.Y().col(c);
  for (Index c : exog_) r.col(k++) = data.X().col(c);
  return r;
}

Vector LinearResidualModel::outcome(const Dataset& data) const { return data.Y().col(outcome_); }

Vector LinearResidualModel::residuals(const Dataset& data, const Vector& beta) const {
  return outcome(data) - regressors(data) * beta;
}

Matrix LinearResidualModel::gradients(const Dataset& data, const Vector&) const {
  return -regressors(data);
}

void LinearResidualModel::validate(const Dataset& data) const {
  if (outcome_ >= data.Y().cols()) throw InvalidArgument("outcome column out of range");
  for (Index c : endog_)
    if (c >= data.Y().cols()) throw InvalidArgument("endogenous column out of range");
  for (Index c : exog_)
    if (c >= data.X().cols()) throw InvalidArgument("exogenous column out of range");
}

Vector LinearResidualModel::initial_guess(const Dataset& data) const {
  validate(data);
  return box().project(two_stage_least_squares(outcome(data), regressors(data), data.Z()));
}

// ---------------------------------------------------------------------------

namespace {
Box euler_default_box() {
  Box b;
  b.lower = Vector(2);
  b.upper = Vector(2);
  b.lower << 1e-4, -1000.0;
  b.upper << 10.0, 1000.0;
  return b;
}
}  // namespace

EulerResidualModel::EulerResidualModel(Index cons_ratio_col, Index gross_return_col)
    : EulerResidualModel(cons_ratio_col, gross_return_col, euler_default_box()) {}

EulerResidualModel::EulerResidualModel(Index cons_ratio_col, Index gross_return_col, Box box)
    : ResidualModel(std::move(box)), ratio_col_(cons_ratio_col), return_col_(gross_return_col) {
  if (ratio_col_ < 0 || return_col_ < 0 || ratio_col_ == return_col_)
    throw InvalidArgument("Euler model needs two distinct non-negative columns");
  set_box(ResidualModel::box());
}

double EulerResidualModel::evaluate(const RowView& y, const RowView&, const Vector& beta) const {
  return beta[0] * y[return_col_] * std::pow(y[ratio_col_], -beta[1]) - 1.0;
}

Vector EulerResidualModel::gradient(const RowView& y, const RowView&, const Vector& beta) const {
  const double ratio = y[ratio_col_];
  const double discounted = y[return_col_] * std::pow(ratio, -beta[1]);
  Vector g(2);
  g[0] = discounted;
  g[1] = -beta[0] * discounted * std::log(ratio);
  return g;
}

void EulerResidualModel::validate(const Dataset& data) const {
  if (std::max(ratio_col_, return_col_) >= data.Y().cols())
    throw InvalidArgument("Euler model column out of range");
  if ((data.Y().col(ratio_col_).array() <= 0.0).any())
    throw InvalidArgument("consumption ratios must be strictly positive");
  if ((data.Y().col(return_col_).array() <= 0.0).any())
    throw InvalidArgument("gross returns must be strictly positive");
}

Vector EulerResidualModel::initial_guess(const Dataset&) const {
  Vector b(2);
  b << 0.99, 5.0;
  return box().project(b);
}

std::shared_ptr<const LinearResidualModel> linear_residual_model(Index outcome_col,
                                                                 std::vector<Index> endog_cols,
                                                                 std::vector<Index> exog_cols) {
  return std::make_shared<const LinearResidualModel>(outcome_col, std::move(endog_cols),
                                                     std::move(exog_cols));
}

std::shared_ptr<const EulerResidualModel> euler_residual_model(Index cons_ratio_col,
                                                               Index gross_return_col) {
  return std::make_shared<const EulerResidualModel>(cons_ratio_col, gross_return_col);
}

// ---------------------------------------------------------------------------

Index NamedTable::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("column '" + name + "' not found in data");
  return static_cast<Index>(it - names.begin());
}

Dataset dataset_from_table(const NamedTable& table, const ColumnRoles& roles) {
  if (roles.outcome.empty()) throw ConfigError("model.outcome is required");
  const Index n = table.values.rows();
  std::vector<std::string> y_names{roles.outcome};
  y_names.insert(y_names.end(), roles.endogenous.begin(), roles.endogenous.end());
  std::vector<std::string> x_names;
  if (roles.intercept) x_names.emplace_back("(intercept)");
  x_names.insert(x_names.end(), roles.exogenous.begin(), roles.exogenous.end());
  std::vector<std::string> z_names = x_names;
  z_names.insert(z_names.end(), roles.instruments.begin(), roles.instruments.end());

  auto fill = [&](const std::vector<std::string>& names) {
    Matrix m(n, static_cast<Index>(names.size()));
    for (Index j = 0; j < m.cols(); ++j) {
      const auto& name = names[static_cast<std::size_t>(j)];
      if (name == "(intercept)")
        m.col(j).setOnes();
      else
        m.col(j) = table.values.col(table.column(name));
    }
    return m;
  };
  std::vector<Index> x_in_z(x_names.size());
  for (std::size_t j = 0; j < x_in_z.size(); ++j) x_in_z[j] = static_cast<Index>(j);
  return Dataset(fill(y_names), fill(x_names), fill(z_names), std::move(x_in_z), y_names, x_names,
                 z_names);
}

std::shared_ptr<const LinearResidualModel> linear_model_for_roles(const ColumnRoles& roles) {
  std::vector<Index> endog, exog;
  for (std::size_t j = 0; j < roles.endogenous.size(); ++j) endog.push_back(static_cast<Index>(j) + 1);
  const std::size_t dx = roles.exogenous.size() + (roles.intercept ? 1 : 0);
  for (std::size_t j = 0; j < dx; ++j) exog.push_back(static_cast<Index>(j));
  return linear_residual_model(0, std::move(endog), std::move(exog));
}

}  // namespace sqiv
