#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sqiv/linalg.hpp"

namespace sqiv {

/// Axis-aligned parameter box.
struct Box {
  Vector lower;
  Vector upper;

  static Box uniform(Index dim, double bound);
  Index dim() const { return lower.size(); }
  bool contains(const Vector& x) const;
  Vector project(const Vector& x) const;
  Vector width() const { return upper - lower; }
};

/// One sample: endogenous block Y (n×d_Y), exogenous regressors X (n×d_X)
/// and instruments Z (n×d_Z). Every X column is also a Z column, recorded by
/// index in x_in_z(). Immutable once built.
class Dataset {
 public:
  Dataset(Matrix y, Matrix x, Matrix z, std::vector<Index> x_in_z,
          std::vector<std::string> y_names = {}, std::vector<std::string> x_names = {},
          std::vector<std::string> z_names = {});

  Index n() const { return y_.rows(); }
  const Matrix& Y() const { return y_; }
  const Matrix& X() const { return x_; }
  const Matrix& Z() const { return z_; }
  const std::vector<Index>& x_in_z() const { return x_in_z_; }
  const std::vector<std::string>& y_names() const { return y_names_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::vector<std::string>& z_names() const { return z_names_; }

  /// Same Y and X with a replacement instrument block.
  Dataset with_instruments(Matrix z, std::vector<Index> x_in_z,
                           std::vector<std::string> z_names = {}) const;

 private:
  Matrix y_, x_, z_;
  std::vector<Index> x_in_z_;
  std::vector<std::string> y_names_, x_names_, z_names_;
};

using RowView = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

/// Residual function Λ(y, x, β) whose conditional τ-quantile given Z is zero,
/// with its gradient in β. Implementations are stateless and row-wise.
class ResidualModel {
 public:
  explicit ResidualModel(Box box) : box_(std::move(box)) {}
  virtual ~ResidualModel() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;
  virtual double evaluate(const RowView& y, const RowView& x, const Vector& beta) const = 0;
  virtual Vector gradient(const RowView& y, const RowView& x, const Vector& beta) const = 0;

  /// Λ_i for every row.
  virtual Vector residuals(const Dataset& data, const Vector& beta) const;
  /// n×d_β matrix of ∂Λ_i/∂β.
  virtual Matrix gradients(const Dataset& data, const Vector& beta) const;
  /// Checks that the dataset has the columns (and value ranges) the model reads.
  virtual void validate(const Dataset& data) const = 0;
  /// Starting value for root finding when the caller supplies none.
  virtual Vector initial_guess(const Dataset& data) const = 0;

  const Box& box() const { return box_; }
  void set_box(Box box);

 private:
  Box box_;
};

/// Λ = y[outcome] - Σ y[endog_j] β_j - Σ x[exog_k] β_{d_endog + k}.
/// Coefficients are ordered endogenous first, then exogenous.
class LinearResidualModel final : public ResidualModel {
 public:
  LinearResidualModel(Index outcome_col, std::vector<Index> endog_cols,
                      std::vector<Index> exog_cols, double bound = 1e3);

  Index dim() const override { return static_cast<Index>(endog_.size() + exog_.size()); }
  std::string name() const override { return "linear"; }
  double evaluate(const RowView& y, const RowView& x, const Vector& beta) const override;
  Vector gradient(const RowView& y, const RowView& x, const Vector& beta) const override;
  Vector residuals(const Dataset& data, const Vector& beta) const override;
  Matrix gradients(const Dataset& data, const Vector& beta) const override;
  void validate(const Dataset& data) const override;
  /// 2SLS on the dataset's instruments.
  Vector initial_guess(const Dataset& data) const override;

  Index outcome_col() const { return outcome_; }
  const std::vector<Index>& endog_cols() const { return endog_; }
  const std::vector<Index>& exog_cols() const { return exog_; }
  /// The n×d_β block (y_endog, x_exog) multiplying β.
  Matrix regressors(const Dataset& data) const;
  Vector outcome(const Dataset& data) const;

 private:
  Index outcome_;
  std::vector<Index> endog_, exog_;
};

/// Quantile Euler residual Λ = β (1+r) (C'/C)^{-γ} - 1 with parameters (β, γ).
/// Reads the consumption ratio C_{t+1}/C_t and gross return 1+r_{t+1} in
/// levels from the given Y columns.
class EulerResidualModel final : public ResidualModel {
 public:
  explicit EulerResidualModel(Index cons_ratio_col = 0, Index gross_return_col = 1);
  EulerResidualModel(Index cons_ratio_col, Index gross_return_col, Box box);

  Index dim() const override { return 2; }
  std::string name() const override { return "euler"; }
  double evaluate(const RowView& y, const RowView& x, const Vector& beta) const override;
  Vector gradient(const RowView& y, const RowView& x, const Vector& beta) const override;
  void validate(const Dataset& data) const override;
  /// (β, γ) = (0.99, 5).
  Vector initial_guess(const Dataset& data) const override;

 private:
  Index ratio_col_, return_col_;
};

std::shared_ptr<const LinearResidualModel> linear_residual_model(
    Index outcome_col, std::vector<Index> endog_cols, std::vector<Index> exog_cols);
std::shared_ptr<const EulerResidualModel> euler_residual_model(Index cons_ratio_col = 0,
                                                               Index gross_return_col = 1);

/// Column roles for building a Dataset from a named table.
struct ColumnRoles {
  std::string outcome;
  std::vector<std::string> endogenous;
  std::vector<std::string> exogenous;
  std::vector<std::string> instruments;  // excluded instruments only
  bool intercept = true;                 // prepend a constant to X (and hence Z)
};

struct NamedTable {
  std::vector<std::string> names;
  Matrix values;  // n × names.size()
  Index column(const std::string& name) const;
};

/// Y = (outcome, endogenous...), X = (const?, exogenous...),
/// Z = (X..., instruments...). The matching linear model is
/// linear_residual_model(0, {1..}, {0..}).
Dataset dataset_from_table(const NamedTable& table, const ColumnRoles& roles);
std::shared_ptr<const LinearResidualModel> linear_model_for_roles(const ColumnRoles& roles);

}  // namespace sqiv
