#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cmekit/error.hpp"

namespace cmekit {

/// A single state. Row vector so that it matches a row of `Points`.
using Point = Eigen::RowVectorXd;

/// A list of points, one per row (row-major so each point is contiguous).
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PointRef = Eigen::Ref<const Eigen::RowVectorXd>;

inline Points make_points(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.begin()->size());
  Points out(n, d);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    detail::require(static_cast<Eigen::Index>(row.size()) == d, "make_points: ragged rows");
    Eigen::Index j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

/// Exact coordinate equality.
inline bool same_point(PointRef a, PointRef b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

inline void validate_points(const Points& pts, const char* what) {
  detail::require(pts.rows() >= 1, std::string(what) + ": empty point list");
  detail::require(pts.cols() >= 1, std::string(what) + ": points must have dimension >= 1");
  detail::require(pts.allFinite(), std::string(what) + ": non-finite coordinate");
}

/// exp(-|x - y|^2 / (2 sigma^2))
struct GaussianKernel {
  double bandwidth = 1.0;
  bool operator==(const GaussianKernel&) const = default;
};

/// exp(-|x - y|_1 / gamma)
struct LaplacianKernel {
  double scale = 1.0;
  bool operator==(const LaplacianKernel&) const = default;
};

/// Explicit kernel over an enumerated set of states. Lookup is by exact
/// coordinate match against `states`.
struct TableKernel {
  Points states;
  Eigen::MatrixXd values;
  bool operator==(const TableKernel& o) const {
    return states.rows() == o.states.rows() && states.cols() == o.states.cols() &&
           states == o.states && values == o.values;
  }
};

class KernelSpec {
 public:
  using Variant = std::variant<GaussianKernel, LaplacianKernel, TableKernel>;

  static KernelSpec gaussian(double bandwidth) {
    detail::require(std::isfinite(bandwidth) && bandwidth > 0.0, "gaussian kernel: bandwidth must be > 0");
    return KernelSpec(GaussianKernel{bandwidth});
  }

  static KernelSpec laplacian(double scale) {
    detail::require(std::isfinite(scale) && scale > 0.0, "laplacian kernel: scale must be > 0");
    return KernelSpec(LaplacianKernel{scale});
  }

  static KernelSpec table(Points states, Eigen::MatrixXd values) {
    validate_points(states, "table kernel");
    const auto m = states.rows();
    detail::require(values.rows() == m && values.cols() == m, "table kernel: values must be m x m");
    detail::require(values.allFinite(), "table kernel: non-finite value");
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j) {
        detail::require(!same_point(states.row(i), states.row(j)), "table kernel: duplicate state");
        detail::require(std::abs(values(i, j) - values(j, i)) <= 1e-12, "table kernel: values not symmetric");
      }
    Eigen::MatrixXd sym = 0.5 * (values + values.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    detail::require(es.eigenvalues().minCoeff() >= -1e-10 * std::max(top, 0.0),
                    "table kernel: values not positive semidefinite");
    return KernelSpec(TableKernel{std::move(states), std::move(sym)});
  }

  [[nodiscard]] const Variant& variant() const { return v_; }

  [[nodiscard]] bool is_table() const { return std::holds_alternative<TableKernel>(v_); }

  /// Row index of `x` among the table states, or -1.
  [[nodiscard]] Eigen::Index table_index(PointRef x) const {
    const auto& t = std::get<TableKernel>(v_);
    if (x.size() != t.states.cols()) return -1;
    for (Eigen::Index i = 0; i < t.states.rows(); ++i)
      if (same_point(t.states.row(i), x)) return i;
    return -1;
  }

  bool operator==(const KernelSpec&) const = default;

 private:
  explicit KernelSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

namespace detail {

inline double squared_distance(PointRef x, PointRef y) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    acc += diff * diff;
  }
  return acc;
}

inline double l1_distance(PointRef x, PointRef y) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc;
}

inline std::vector<Eigen::Index> table_indices(const KernelSpec& k, const Points& pts) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    idx[static_cast<std::size_t>(i)] = k.table_index(pts.row(i));
    if (idx[static_cast<std::size_t>(i)] < 0) throw ValidationError("table kernel: point not in table");
  }
  return idx;
}

/// Calls body(fn) with a pointwise evaluator for the Gaussian or Laplacian
/// variant, so the variant dispatch happens once per matrix.
template <class Body>
void visit_continuous(const KernelSpec& k, Body&& body) {
  if (const auto* g = std::get_if<GaussianKernel>(&k.variant())) {
    const double scale = 1.0 / (2.0 * g->bandwidth * g->bandwidth);
    body([scale](PointRef x, PointRef y) { return std::exp(-squared_distance(x, y) * scale); });
  } else {
    const double gamma = std::get<LaplacianKernel>(k.variant()).scale;
    body([gamma](PointRef x, PointRef y) { return std::exp(-l1_distance(x, y) / gamma); });
  }
}

}  // namespace detail

/// k(x, x2). Symmetric bit-for-bit in its arguments.
inline double eval(const KernelSpec& k, PointRef x, PointRef x2) {
  detail::require(x.size() == x2.size(), "kernel eval: dimension mismatch");
  return std::visit(
      [&](const auto& kern) -> double {
        using K = std::decay_t<decltype(kern)>;
        if constexpr (std::is_same_v<K, GaussianKernel>) {
          const double scale = 1.0 / (2.0 * kern.bandwidth * kern.bandwidth);
          return std::exp(-detail::squared_distance(x, x2) * scale);
        } else if constexpr (std::is_same_v<K, LaplacianKernel>) {
          return std::exp(-detail::l1_distance(x, x2) / kern.scale);
        } else {
          const auto i = k.table_index(x);
          const auto j = k.table_index(x2);
          if (i < 0 || j < 0) throw ValidationError("table kernel: point not in table");
          return kern.values(i, j);
        }
      },
      k.variant());
}

/// K[i][j] = k(a_i, b_j).
inline Eigen::MatrixXd cross_gram(const KernelSpec& k, const Points& a, const Points& b) {
  validate_points(a, "cross_gram");
  validate_points(b, "cross_gram");
  detail::require(a.cols() == b.cols(), "cross_gram: dimension mismatch");
  Eigen::MatrixXd out(a.rows(), b.rows());
  if (k.is_table()) {
    const auto& values = std::get<TableKernel>(k.variant()).values;
    const auto ia = detail::table_indices(k, a);
    const auto ib = detail::table_indices(k, b);
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        out(i, j) = values(ia[static_cast<std::size_t>(i)], ib[static_cast<std::size_t>(j)]);
    return out;
  }
  detail::visit_continuous(k, [&](auto&& fn) {
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) = fn(a.row(i), b.row(j));
  });
  return out;
}

/// Kernel vector k_X(x)_i = k(x_i, x).
inline Eigen::VectorXd kernel_column(const KernelSpec& k, const Points& pts, PointRef x) {
  detail::require(pts.cols() == x.size(), "kernel_column: dimension mismatch");
  Eigen::VectorXd out(pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) out[i] = eval(k, pts.row(i), x);
  return out;
}

/// Symmetric Gram matrix of a point list. Upper triangle is computed and
/// mirrored, so the result is exactly symmetric.
class GramMatrix {
 public:
  GramMatrix(const KernelSpec& k, const Points& pts) {
    validate_points(pts, "gram");
    const auto n = pts.rows();
    entries_.resize(n, n);
    if (k.is_table()) {
      const auto& values = std::get<TableKernel>(k.variant()).values;
      const auto idx = detail::table_indices(k, pts);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i <= j; ++i)
          entries_(i, j) = values(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    } else {
      detail::visit_continuous(k, [&](auto&& fn) {
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index i = 0; i <= j; ++i) entries_(i, j) = fn(pts.row(i), pts.row(j));
      });
    }
    entries_.triangularView<Eigen::StrictlyLower>() = entries_.transpose();
  }

  [[nodiscard]] const Eigen::MatrixXd& entries() const { return entries_; }
  [[nodiscard]] Eigen::Index size() const { return entries_.rows(); }

  operator const Eigen::MatrixXd&() const { return entries_; }  // NOLINT

 private:
  Eigen::MatrixXd entries_;
};

inline GramMatrix gram(const KernelSpec& k, const Points& pts) { return GramMatrix(k, pts); }

}  // namespace cmekit
