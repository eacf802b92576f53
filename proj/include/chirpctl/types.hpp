#pragma once

#include <complex>

#include <Eigen/Dense>

namespace chirpctl {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;   // dense complex matrix
using RMat = Eigen::MatrixXd;   // dense real matrix
using Vec = Eigen::VectorXcd;   // complex state vector
using RVec = Eigen::VectorXd;   // real vector (parameters, spectra)

inline constexpr Complex iu{0.0, 1.0};  // imaginary unit

}  // namespace chirpctl
