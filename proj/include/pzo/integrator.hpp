#pragma once

#include <Eigen/Core>

namespace pzo {

/// Classical four-stage Runge-Kutta step for y' = rhs(t, y).
template <typename Derived, typename Rhs>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> rk4_step(const Eigen::MatrixBase<Derived>& y,
                                                                    typename Derived::Scalar t,
                                                                    typename Derived::Scalar h, Rhs&& rhs) {
  using Vector = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  const Vector y0 = y;
  const Vector k1 = rhs(t, y0);
  const Vector k2 = rhs(t + h / 2, Vector(y0 + (h / 2) * k1));
  const Vector k3 = rhs(t + h / 2, Vector(y0 + (h / 2) * k2));
  const Vector k4 = rhs(t + h, Vector(y0 + h * k3));
  return y0 + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace pzo
