#pragma once

// Closed convex feasible sets: Euclidean projection, membership, tangent-cone
// projection and inward shrinking. All routines are pure functions of an
// immutable set description and are templated on the scalar type.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pzo/errors.hpp"

namespace pzo {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Default absolute membership tolerance; absorbs projection round-off.
inline constexpr double kMemberTol = 1e-9;

enum class SetKind { box, ball, polytope, orthant, product, whole };

template <typename Scalar>
class FeasibleSet;

/// Per-coordinate bounds; infinite bounds are allowed.
template <typename Scalar>
struct BoxShape {
  VectorX<Scalar> lower;
  VectorX<Scalar> upper;
};

template <typename Scalar>
struct BallShape {
  VectorX<Scalar> center;
  Scalar radius;
};

/// {x : A x <= b}, with a feasible point found (or verified) at construction.
template <typename Scalar>
struct PolytopeShape {
  MatrixX<Scalar> A;
  VectorX<Scalar> b;
  VectorX<Scalar> feasible_point;
};

struct OrthantShape {
  Eigen::Index dim;
};

struct WholeSpaceShape {
  Eigen::Index dim;
};

template <typename Scalar>
struct ProductShape {
  std::vector<FeasibleSet<Scalar>> factors;
};

template <typename Scalar>
class FeasibleSet {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using Shape = std::variant<BoxShape<Scalar>, BallShape<Scalar>, PolytopeShape<Scalar>,
                             OrthantShape, ProductShape<Scalar>, WholeSpaceShape>;

  static FeasibleSet box(Vector lower, Vector upper);
  static FeasibleSet ball(Vector center, Scalar radius);
  /// Throws ConstructionError when {A x <= b} is empty. A hint point is used
  /// as the stored feasible point when it satisfies the constraints.
  static FeasibleSet polytope(Matrix A, Vector b, const Vector* hint = nullptr);
  static FeasibleSet orthant(Eigen::Index dim);
  static FeasibleSet whole(Eigen::Index dim);
  static FeasibleSet product(std::vector<FeasibleSet> factors);

  Eigen::Index dim() const { return dim_; }
  SetKind kind() const { return static_cast<SetKind>(shape_.index()); }
  const Shape& shape() const { return shape_; }

  template <typename T>
  const T& as() const { return std::get<T>(shape_); }

 private:
  FeasibleSet(Shape s, Eigen::Index dim) : shape_(std::move(s)), dim_(dim) {}

  Shape shape_;
  Eigen::Index dim_ = 0;
};

using FeasibleSetd = FeasibleSet<double>;

std::string to_string(SetKind kind);

namespace detail {

template <typename Scalar>
struct QpResult {
  VectorX<Scalar> y;
  bool converged = false;
  int iterations = 0;
};

// Primal active-set method for min 1/2 ||y - v||^2 s.t. A y <= b, started from a
// feasible y0. Working-set systems are solved through a complete orthogonal
// decomposition so that dependent rows do not break the solve; a revisited
// working set or the iteration cap reports non-convergence.
template <typename Scalar>
QpResult<Scalar> active_set_projection(const MatrixX<Scalar>& A, const VectorX<Scalar>& b,
                                       const VectorX<Scalar>& v, VectorX<Scalar> y,
                                       int max_iter = 10000) {
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  const Eigen::Index m = A.rows();
  const Scalar scale = Scalar(1) + (b.size() ? b.cwiseAbs().maxCoeff() : Scalar(0)) +
                       v.cwiseAbs().maxCoeff();
  const Scalar tol = Scalar(1e-12) * scale;

  std::vector<Eigen::Index> working;
  std::map<std::vector<Eigen::Index>, int> visits;
  QpResult<Scalar> out;
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    Vector lambda;
    Vector z = v;
    if (!working.empty()) {
      Matrix Aw(static_cast<Eigen::Index>(working.size()), A.cols());
      Vector bw(static_cast<Eigen::Index>(working.size()));
      for (std::size_t k = 0; k < working.size(); ++k) {
        Aw.row(static_cast<Eigen::Index>(k)) = A.row(working[k]);
        bw(static_cast<Eigen::Index>(k)) = b(working[k]);
      }
      const Matrix gram = Aw * Aw.transpose();
      lambda = gram.completeOrthogonalDecomposition().solve(Aw * v - bw);
      z = v - Aw.transpose() * lambda;
    }
    const Vector p = z - y;
    if (p.norm() <= tol) {
      Eigen::Index worst = -1;
      Scalar most_negative = -tol;
      for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        if (lambda(k) < most_negative) {
          most_negative = lambda(k);
          worst = k;
        }
      }
      if (worst < 0) {
        out.y = y;
        out.converged = true;
        return out;
      }
      working.erase(working.begin() + worst);
    } else {
      Scalar alpha = Scalar(1);
      Eigen::Index blocking = -1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (std::find(working.begin(), working.end(), i) != working.end()) continue;
        const Scalar ap = A.row(i).dot(p);
        if (ap <= tol) continue;
        const Scalar step = std::max(Scalar(0), (b(i) - A.row(i).dot(y)) / ap);
        if (step < alpha) {
          alpha = step;
          blocking = i;
        }
      }
      y += alpha * p;
      if (blocking >= 0) {
        working.push_back(blocking);
        std::sort(working.begin(), working.end());
      }
    }
    if (++visits[working] > 2 * (m + 2)) break;  // cycling
  }
  out.y = y;
  out.converged = false;
  return out;
}

// Dykstra's alternating projection onto an intersection of halfspaces.
template <typename Scalar>
VectorX<Scalar> dykstra_projection(const MatrixX<Scalar>& A, const VectorX<Scalar>& b,
                                   const VectorX<Scalar>& v, int max_sweeps = 10000,
                                   Scalar tol = Scalar(1e-10)) {
  using Vector = VectorX<Scalar>;
  const Eigen::Index m = A.rows();
  Vector x = v;
  MatrixX<Scalar> increments = MatrixX<Scalar>::Zero(A.cols(), m);
  const Vector row_norm2 = A.rowwise().squaredNorm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector before = x;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector y = x + increments.col(i);
      const Scalar excess = A.row(i).dot(y) - b(i);
      const Vector projected = excess > 0 ? Vector(y - (excess / row_norm2(i)) * A.row(i).transpose()) : y;
      increments.col(i) = y - projected;
      x = projected;
    }
    const Scalar violation = m ? (A * x - b).maxCoeff() : Scalar(0);
    if ((x - before).norm() <= tol && violation <= tol) break;
  }
  return x;
}

// Feasible point of {A x <= b} by cyclic halfspace projections, or nothing.
template <typename Scalar>
bool find_feasible_point(const MatrixX<Scalar>& A, const VectorX<Scalar>& b,
                         VectorX<Scalar>& point) {
  const Eigen::Index m = A.rows();
  const Scalar tol = Scalar(1e-10) * (Scalar(1) + (m ? b.cwiseAbs().maxCoeff() : Scalar(0)));
  const VectorX<Scalar> row_norm2 = A.rowwise().squaredNorm();
  for (int sweep = 0; sweep < 100000; ++sweep) {
    Scalar worst = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar excess = A.row(i).dot(point) - b(i);
      worst = std::max(worst, excess);
      if (excess > 0) point -= (excess / row_norm2(i)) * A.row(i).transpose();
    }
    if (worst <= tol) return true;
  }
  return m == 0 || (A * point - b).maxCoeff() <= tol;
}

template <typename Scalar>
VectorX<Scalar> project_polytope(const PolytopeShape<Scalar>& P, const VectorX<Scalar>& v) {
  if (P.A.rows() == 0 || (P.A * v - P.b).maxCoeff() <= Scalar(0)) return v;
  auto qp = active_set_projection<Scalar>(P.A, P.b, v, P.feasible_point);
  if (qp.converged) return qp.y;
  return dykstra_projection<Scalar>(P.A, P.b, v);
}

// Projection of v onto the polyhedral cone {d : C d <= 0}. Small active sets are
// solved exactly by enumerating the face the projection lands on.
template <typename Scalar>
VectorX<Scalar> project_polyhedral_cone(const MatrixX<Scalar>& C, const VectorX<Scalar>& v) {
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  const Eigen::Index k = C.rows();
  if (k == 0) return v;
  const Scalar tol = Scalar(1e-11) * (Scalar(1) + v.norm());
  if ((C * v).maxCoeff() <= tol) return v;
  if (k <= 10) {
    Vector best = Vector::Zero(v.size());
    Scalar best_dist = v.norm();  // d = 0 is always feasible
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < k; ++i)
        if (mask & (1u << i)) rows.push_back(i);
      Matrix Cs(static_cast<Eigen::Index>(rows.size()), C.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) Cs.row(static_cast<Eigen::Index>(r)) = C.row(rows[r]);
      const Vector lambda = (Cs * Cs.transpose()).completeOrthogonalDecomposition().solve(Cs * v);
      if (lambda.minCoeff() < -tol) continue;
      const Vector d = v - Cs.transpose() * lambda;
      if ((C * d).maxCoeff() > tol) continue;
      const Scalar dist = (d - v).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = d;
      }
    }
    return best;
  }
  const Vector zeros = Vector::Zero(k);
  auto qp = active_set_projection<Scalar>(C, zeros, v, Vector::Zero(v.size()));
  if (qp.converged) return qp.y;
  return dykstra_projection<Scalar>(C, zeros, v);
}

template <typename Scalar>
Scalar activity_tol(const VectorX<Scalar>& b) {
  return Scalar(1e-8) * (Scalar(1) + (b.size() ? b.cwiseAbs().maxCoeff() : Scalar(0)));
}

template <typename Scalar>
Scalar box_activity_tol(const BoxShape<Scalar>& B) {
  Scalar largest = 0;
  for (Eigen::Index i = 0; i < B.lower.size(); ++i) {
    if (std::isfinite(B.lower(i))) largest = std::max(largest, std::abs(B.lower(i)));
    if (std::isfinite(B.upper(i))) largest = std::max(largest, std::abs(B.upper(i)));
  }
  return Scalar(1e-8) * (Scalar(1) + largest);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Construction

template <typename Scalar>
FeasibleSet<Scalar> FeasibleSet<Scalar>::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size()) throw ConstructionError("box: bound dimensions differ");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i))
      throw ConstructionError("box: lower bound exceeds upper bound in coordinate " +
                              std::to_string(i));
  }
  const Eigen::Index n = lower.size();
  return FeasibleSet(BoxShape<Scalar>{std::move(lower), std::move(upper)}, n);
}

template <typename Scalar>
FeasibleSet<Scalar> FeasibleSet<Scalar>::ball(Vector center, Scalar radius) {
  if (!(radius > 0) || !std::isfinite(radius)) throw ConstructionError("ball: radius must be positive");
  if (!center.allFinite()) throw ConstructionError("ball: center must be finite");
  const Eigen::Index n = center.size();
  return FeasibleSet(BallShape<Scalar>{std::move(center), radius}, n);
}

template <typename Scalar>
FeasibleSet<Scalar> FeasibleSet<Scalar>::polytope(Matrix A, Vector b, const Vector* hint) {
  if (A.rows() != b.size()) throw ConstructionError("polytope: A and b row counts differ");
  if (!A.allFinite() || !b.allFinite()) throw ConstructionError("polytope: non-finite data");
  // Zero rows are either vacuous or make the set empty.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (A.row(i).norm() > 0) {
      keep.push_back(i);
    } else if (b(i) < 0) {
      throw ConstructionError("polytope: constraint 0 <= " + std::to_string(b(i)) + " is infeasible");
    }
  }
  Matrix Ak(static_cast<Eigen::Index>(keep.size()), A.cols());
  Vector bk(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    Ak.row(static_cast<Eigen::Index>(r)) = A.row(keep[r]);
    bk(static_cast<Eigen::Index>(r)) = b(keep[r]);
  }
  const Eigen::Index n = A.cols();
  Vector point = Vector::Zero(n);
  if (hint && hint->size() == n && (Ak.rows() == 0 || (Ak * *hint - bk).maxCoeff() <= 0)) {
    point = *hint;
  } else if (!detail::find_feasible_point<Scalar>(Ak, bk, point)) {
    throw ConstructionError("polytope: no feasible point (constraints are inconsistent)");
  }
  return FeasibleSet(PolytopeShape<Scalar>{std::move(Ak), std::move(bk), std::move(point)}, n);
}

template <typename Scalar>
FeasibleSet<Scalar> FeasibleSet<Scalar>::orthant(Eigen::Index dim) {
  return FeasibleSet(OrthantShape{dim}, dim);
}

template <typename Scalar>
FeasibleSet<Scalar> FeasibleSet<Scalar>::whole(Eigen::Index dim) {
  return FeasibleSet(WholeSpaceShape{dim}, dim);
}

template <typename Scalar>
FeasibleSet<Scalar> FeasibleSet<Scalar>::product(std::vector<FeasibleSet> factors) {
  if (factors.empty()) throw ConstructionError("product: needs at least one factor");
  Eigen::Index n = 0;
  for (const auto& f : factors) n += f.dim();
  return FeasibleSet(ProductShape<Scalar>{std::move(factors)}, n);
}

inline std::string to_string(SetKind kind) {
  switch (kind) {
    case SetKind::box: return "box";
    case SetKind::ball: return "ball";
    case SetKind::polytope: return "polytope";
    case SetKind::orthant: return "orthant";
    case SetKind::product: return "product";
    case SetKind::whole: return "whole";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Operations

/// Euclidean projection onto the set.
template <typename Scalar>
VectorX<Scalar> project(const FeasibleSet<Scalar>& set, const VectorX<Scalar>& v) {
  using Vector = VectorX<Scalar>;
  switch (set.kind()) {
    case SetKind::box: {
      const auto& B = set.template as<BoxShape<Scalar>>();
      return v.cwiseMax(B.lower).cwiseMin(B.upper);
    }
    case SetKind::ball: {
      const auto& B = set.template as<BallShape<Scalar>>();
      const Vector offset = v - B.center;
      const Scalar r = offset.norm();
      if (r <= B.radius) return v;
      return B.center + (B.radius / r) * offset;
    }
    case SetKind::polytope:
      return detail::project_polytope(set.template as<PolytopeShape<Scalar>>(), v);
    case SetKind::orthant:
      return v.cwiseMax(Scalar(0));
    case SetKind::product: {
      Vector out(v.size());
      Eigen::Index offset = 0;
      for (const auto& f : set.template as<ProductShape<Scalar>>().factors) {
        out.segment(offset, f.dim()) = project(f, Vector(v.segment(offset, f.dim())));
        offset += f.dim();
      }
      return out;
    }
    case SetKind::whole:
      return v;
  }
  return v;
}

/// Euclidean distance from v to the set.
template <typename Scalar>
Scalar distance(const FeasibleSet<Scalar>& set, const VectorX<Scalar>& v) {
  return (v - project(set, v)).norm();
}

/// True iff v lies within distance tol of the set.
template <typename Scalar>
bool member(const FeasibleSet<Scalar>& set, const VectorX<Scalar>& v, Scalar tol = Scalar(kMemberTol)) {
  if (!v.allFinite()) return false;
  return distance(set, v) <= tol;
}

/// s is in the normal cone at x iff projecting x + s returns x.
template <typename Scalar>
bool in_normal_cone(const FeasibleSet<Scalar>& set, const VectorX<Scalar>& x, const VectorX<Scalar>& s,
                    Scalar tol = Scalar(kMemberTol)) {
  return (project(set, VectorX<Scalar>(x + s)) - x).norm() <= tol * (Scalar(1) + s.norm());
}

/// Projection of v onto the tangent cone of the set at x. x must be a member.
template <typename Scalar>
VectorX<Scalar> tangent_project(const FeasibleSet<Scalar>& set, const VectorX<Scalar>& x,
                                const VectorX<Scalar>& v) {
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  if (!member(set, x, Scalar(kMemberTol)))
    throw DomainError("tangent_project: point is not in the set (distance " +
                      std::to_string(static_cast<double>(distance(set, x))) + ")");
  switch (set.kind()) {
    case SetKind::box: {
      const auto& B = set.template as<BoxShape<Scalar>>();
      const Scalar tol = detail::box_activity_tol(B);
      Vector d = v;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (x(i) >= B.upper(i) - tol) d(i) = std::min(d(i), Scalar(0));
        if (x(i) <= B.lower(i) + tol) d(i) = std::max(d(i), Scalar(0));
      }
      return d;
    }
    case SetKind::ball: {
      const auto& B = set.template as<BallShape<Scalar>>();
      const Vector offset = x - B.center;
      const Scalar r = offset.norm();
      if (r < B.radius - Scalar(1e-8) * (Scalar(1) + B.radius)) return v;
      const Vector normal = offset / r;
      const Scalar outward = v.dot(normal);
      return outward > 0 ? Vector(v - outward * normal) : v;
    }
    case SetKind::polytope: {
      const auto& P = set.template as<PolytopeShape<Scalar>>();
      const Scalar tol = detail::activity_tol(P.b);
      const Vector slack = P.b - P.A * x;
      std::vector<Eigen::Index> active;
      for (Eigen::Index i = 0; i < slack.size(); ++i)
        if (slack(i) <= tol) active.push_back(i);
      Matrix C(static_cast<Eigen::Index>(active.size()), x.size());
      for (std::size_t r = 0; r < active.size(); ++r) C.row(static_cast<Eigen::Index>(r)) = P.A.row(active[r]);
      return detail::project_polyhedral_cone<Scalar>(C, v);
    }
    case SetKind::orthant: {
      Vector d = v;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (x(i) <= Scalar(1e-8)) d(i) = std::max(d(i), Scalar(0));
      return d;
    }
    case SetKind::product: {
      Vector out(v.size());
      Eigen::Index offset = 0;
      for (const auto& f : set.template as<ProductShape<Scalar>>().factors) {
        out.segment(offset, f.dim()) =
            tangent_project(f, Vector(x.segment(offset, f.dim())), Vector(v.segment(offset, f.dim())));
        offset += f.dim();
      }
      return out;
    }
    case SetKind::whole:
      return v;
  }
  return v;
}

/// Inward-shrunk set S with S + margin * unit ball contained in the base set.
template <typename Scalar>
FeasibleSet<Scalar> shrink(const FeasibleSet<Scalar>& set, Scalar margin) {
  using Vector = VectorX<Scalar>;
  if (margin < 0) throw ValidationError("shrink: margin must be nonnegative");
  if (margin == 0) return set;
  switch (set.kind()) {
    case SetKind::box: {
      const auto& B = set.template as<BoxShape<Scalar>>();
      const Vector lo = B.lower.array() + margin;
      const Vector hi = B.upper.array() - margin;
      if ((lo.array() > hi.array()).any()) throw ConstructionError("shrink: box margin exceeds half-width");
      return FeasibleSet<Scalar>::box(lo, hi);
    }
    case SetKind::ball: {
      const auto& B = set.template as<BallShape<Scalar>>();
      if (margin >= B.radius) throw ConstructionError("shrink: ball margin exceeds radius");
      return FeasibleSet<Scalar>::ball(B.center, B.radius - margin);
    }
    case SetKind::polytope: {
      const auto& P = set.template as<PolytopeShape<Scalar>>();
      const Vector b = P.b - margin * P.A.rowwise().norm();
      try {
        return FeasibleSet<Scalar>::polytope(P.A, b, &P.feasible_point);
      } catch (const ConstructionError&) {
        throw ConstructionError("shrink: shrunk polytope is empty");
      }
    }
    case SetKind::orthant: {
      const Eigen::Index n = set.dim();
      return FeasibleSet<Scalar>::box(Vector::Constant(n, margin),
                                      Vector::Constant(n, std::numeric_limits<Scalar>::infinity()));
    }
    case SetKind::product: {
      std::vector<FeasibleSet<Scalar>> factors;
      for (const auto& f : set.template as<ProductShape<Scalar>>().factors) factors.push_back(shrink(f, margin));
      return FeasibleSet<Scalar>::product(std::move(factors));
    }
    case SetKind::whole:
      return set;
  }
  return set;
}

}  // namespace pzo
