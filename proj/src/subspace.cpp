#include "gu/subspace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace gu {

RetainBasis::RetainBasis(std::size_t dimension, std::size_t rank_cap,
                         double residual_keep_thresh)
    : dimension_(dimension),
      rank_cap_(rank_cap),
      residual_keep_thresh_(residual_keep_thresh) {
  if (rank_cap == 0) throw std::invalid_argument("rank_cap must be >= 1");
  if (!(residual_keep_thresh >= 0.0)) {
    throw std::invalid_argument("residual_keep_thresh must be >= 0");
  }
}

InsertResult RetainBasis::insert_retain_gradient(ConstSpan g) {
  if (g.size() != dimension_) {
    throw DimensionError("insert_retain_gradient: dimension mismatch");
  }
  if (!all_finite(g)) {
    throw std::invalid_argument("insert_retain_gradient: non-finite input");
  }
  const double g_norm = norm2(g);
  if (g_norm == 0.0) return {false, 0.0};

  Vector res(g.begin(), g.end());
  // Classical GS followed by one re-orthogonalization sweep.
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vector& u : columns_) axpy(-dot(u, res), u, res);
  }
  const double res_norm = norm2(res);
  const double ratio = res_norm / g_norm;

  InsertResult result{false, ratio};
  if (ratio > residual_keep_thresh_ && columns_.size() < rank_cap_ &&
      res_norm > 0.0) {
    for (double& x : res) x /= res_norm;
    columns_.push_back(std::move(res));
    ++insert_count_;
    result.inserted = true;
  }
  return result;
}

Vector RetainBasis::coefficients(ConstSpan v) const {
  if (v.size() != dimension_) throw DimensionError("basis: dimension mismatch");
  Vector a(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) a[i] = dot(columns_[i], v);
  return a;
}

Vector RetainBasis::project_tangent(ConstSpan v) const {
  const Vector a = coefficients(v);
  Vector out(dimension_, 0.0);
  for (std::size_t i = 0; i < columns_.size(); ++i) axpy(a[i], columns_[i], out);
  return out;
}

Vector RetainBasis::project_normal(ConstSpan v) const {
  return subtract(v, project_tangent(v));
}

std::string RetainBasis::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const Vector& u : columns_) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (i) os << ' ';
      os << u[i];
    }
    os << '\n';
  }
  return os.str();
}

RetainBasis RetainBasis::from_text(const std::string& text,
                                   std::size_t rank_cap,
                                   double residual_keep_thresh) {
  std::vector<Vector> cols;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    Vector col;
    double x = 0.0;
    while (ls >> x) col.push_back(x);
    if (!ls.eof()) throw std::invalid_argument("basis text: bad number");
    if (!col.empty()) cols.push_back(std::move(col));
  }
  if (cols.empty()) throw std::invalid_argument("basis text: no columns");
  if (cols.size() > rank_cap) {
    throw std::invalid_argument("basis text: more columns than rank_cap");
  }
  RetainBasis basis(cols.front().size(), rank_cap, residual_keep_thresh);
  for (Vector& c : cols) {
    if (c.size() != basis.dimension_) {
      throw DimensionError("basis text: ragged columns");
    }
    basis.columns_.push_back(std::move(c));
  }
  basis.insert_count_ = basis.columns_.size();
  return basis;
}

Vector project_tangent(const RetainBasis& basis, ConstSpan v) {
  return basis.project_tangent(v);
}

Vector project_normal(const RetainBasis& basis, ConstSpan v) {
  return basis.project_normal(v);
}

double entanglement(const RetainBasis& basis, ConstSpan forget_grad_whitened) {
  // Columns are orthonormal, so ||P_T v|| = ||a||.
  return norm2(basis.coefficients(forget_grad_whitened));
}

double principal_angle_diagnostic(const RetainBasis& a, const RetainBasis& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("principal angle of an empty basis");
  }
  if (a.dimension() != b.dimension()) {
    throw DimensionError("principal angle: dimension mismatch");
  }
  Eigen::MatrixXd cross(a.rank(), b.rank());
  for (std::size_t i = 0; i < a.rank(); ++i) {
    for (std::size_t j = 0; j < b.rank(); ++j) {
      cross(i, j) = dot(a.columns()[i], b.columns()[j]);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const double sigma_min = std::min(1.0, svd.singularValues().minCoeff());
  return std::sqrt(std::max(0.0, 1.0 - sigma_min * sigma_min));
}

RetainSubspaceTracker::RetainSubspaceTracker(std::size_t dimension,
                                             std::size_t rank_cap,
                                             double residual_keep_thresh)
    : basis_(dimension, rank_cap, residual_keep_thresh) {}

void RetainSubspaceTracker::refresh(std::vector<Vector> raw_gradients) {
  for (const Vector& g : raw_gradients) {
    if (g.size() != basis_.dimension()) {
      throw DimensionError("tracker refresh: dimension mismatch");
    }
  }
  buffer_ = std::move(raw_gradients);
}

}  // namespace gu
