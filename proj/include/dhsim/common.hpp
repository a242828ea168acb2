#ifndef DHSIM_COMMON_HPP
#define DHSIM_COMMON_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace dhsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Water properties, treated as constants over district-heating operating ranges.
inline constexpr double kWaterDensity = 1000.0;   // kg/m^3
inline constexpr double kWaterHeatCapacity = 4186.0;  // J/(kg K)

/// Relative tolerance for the water_mass vs rho*area*length cross-check
/// when a pipe declares all three.
inline constexpr double kPipeMassTolerance = 0.01;

/// Per-node flow balance tolerance for FlowField validation, kg/s.
inline constexpr double kFlowBalanceTolerance = 1e-9;

/// Malformed input document (bad syntax, wrong types, unknown fields).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally invalid data (disconnected graph, dangling references, bad values).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (non-converged eigensolve, CFL violation, non-finite state).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dhsim

#endif
