#pragma once

#include <complex>

#include <Eigen/Core>

namespace mmce {

using Index = Eigen::Index;

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using CVector = Vector<Complex<Scalar>>;

template <typename Scalar>
using CMatrix = Matrix<Complex<Scalar>>;

template <typename Scalar>
inline constexpr Scalar pi = Scalar(3.141592653589793238462643383279502884L);

}  // namespace mmce
