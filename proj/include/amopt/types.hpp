#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace amopt {

using Scalar = double;
using Index = Eigen::Index;

using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Largest market dimension supported by the path kernels. States are held
/// in stack storage of this capacity inside the Monte-Carlo inner loops.
inline constexpr Index kMaxDim = 16;

using StateVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// Raised when a method is asked for something its formula cannot provide,
/// e.g. a closed-form cash flow that needs constant volatility.
class unsupported_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace amopt
