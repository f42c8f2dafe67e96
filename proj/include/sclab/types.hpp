#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace sclab {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

// A point (q, p) of the discretized phase space, stored as [q; p] with length 2D.
using PhaseVector = Eigen::VectorXd;

// Complex 2^N x 2^N matrix, the value of an L(H_sp)-valued symbol.
using SpinMatrix = Eigen::MatrixXcd;
using SpinTriple = std::array<SpinMatrix, 3>;

constexpr double kPi = 3.14159265358979323846;

// Raised when a coherent state does not fit in the truncated Fock space.
class TruncationError : public std::runtime_error {
 public:
  explicit TruncationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an adaptive integrator cannot meet its tolerance.
class StepFloorError : public std::runtime_error {
 public:
  explicit StepFloorError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sclab
