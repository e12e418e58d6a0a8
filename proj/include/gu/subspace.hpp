#pragma once

// Low-rank retain-gradient basis kept in whitened coordinates.
//
// Columns are Euclidean-orthonormal in whitened space, which is U^T H U = I
// for the de-whitened columns U. Projectors are then plain accumulate /
// subtract sweeps along the columns.

#include <cstddef>
#include <string>
#include <vector>

#include "gu/linalg.hpp"
#include "gu/metric.hpp"

namespace gu {

inline constexpr std::size_t kDefaultRankCap = 16;
inline constexpr double kDefaultResidualKeepThresh = 0.1;

struct InsertResult {
  bool inserted = false;
  // ||res|| / ||g||, reported even when the rank cap blocks insertion.
  double residual_ratio = 0.0;
};

class RetainBasis {
 public:
  RetainBasis(std::size_t dimension, std::size_t rank_cap = kDefaultRankCap,
              double residual_keep_thresh = kDefaultResidualKeepThresh);

  std::size_t dimension() const { return dimension_; }
  std::size_t rank() const { return columns_.size(); }
  std::size_t rank_cap() const { return rank_cap_; }
  double residual_keep_thresh() const { return residual_keep_thresh_; }
  std::size_t insert_count() const { return insert_count_; }
  bool empty() const { return columns_.empty(); }
  const std::vector<Vector>& columns() const { return columns_; }

  // Two-pass Gram-Schmidt of a whitened retain gradient against the basis.
  // Appends the normalized residual when the relative residual exceeds the
  // threshold and the rank cap allows. Throws on non-finite input.
  InsertResult insert_retain_gradient(ConstSpan whitened_retain_grad);

  void clear() { columns_.clear(); }

  // a_i = u_i . v
  Vector coefficients(ConstSpan v_whitened) const;

  Vector project_tangent(ConstSpan v_whitened) const;
  Vector project_normal(ConstSpan v_whitened) const;

  // One column per line, space separated, 17 significant digits.
  std::string to_text() const;
  static RetainBasis from_text(const std::string& text, std::size_t rank_cap,
                               double residual_keep_thresh);

 private:
  std::size_t dimension_;
  std::size_t rank_cap_;
  double residual_keep_thresh_;
  std::size_t insert_count_ = 0;
  std::vector<Vector> columns_;
};

Vector project_tangent(const RetainBasis& basis, ConstSpan v_whitened);
Vector project_normal(const RetainBasis& basis, ConstSpan v_whitened);

// ||P_T g~_f||, equal to ent_H(g_f) on raw coordinates.
double entanglement(const RetainBasis& basis, ConstSpan forget_grad_whitened);

// sin of the largest principal angle between span(a) and span(b), from the
// smallest singular value of the cross-Gram matrix. Throws on empty input.
double principal_angle_diagnostic(const RetainBasis& a, const RetainBasis& b);

// Holds the raw (un-whitened) retain gradients the basis was last built from.
// Stored columns go stale whenever the metric changes; rebuilding from raw
// gradients under the fresh metric restores U^T H U = I exactly.
class RetainSubspaceTracker {
 public:
  RetainSubspaceTracker(std::size_t dimension, std::size_t rank_cap,
                        double residual_keep_thresh);

  // Replaces the replay buffer with a fresh batch of raw retain gradients.
  void refresh(std::vector<Vector> raw_gradients);

  // Whitens `leading` (if non-empty) followed by the replay buffer under
  // `metric` and Gram-Schmidts them into a new basis. `to_whitened` maps a
  // raw gradient into whitened coordinates (W g, or W H^{-1} g for
  // H-gradients).
  template <typename ToWhitened>
  const RetainBasis& rebuild(const std::vector<Vector>& leading,
                             ToWhitened&& to_whitened) {
    basis_.clear();
    for (const Vector& g : leading) basis_.insert_retain_gradient(to_whitened(g));
    for (const Vector& g : buffer_) basis_.insert_retain_gradient(to_whitened(g));
    return basis_;
  }

  const RetainBasis& basis() const { return basis_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  RetainBasis basis_;
  std::vector<Vector> buffer_;
};

}  // namespace gu
