#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>

namespace fext {

/// Error quaternion too close to a full +/-2pi turn to be expressed as an MRP.
class NearSingularRotation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Cholesky factorization failed even after diagonal jitter.
class CovarianceNotPD : public std::runtime_error {
public:
    CovarianceNotPD(const std::string& what, Eigen::MatrixXd covariance)
        : std::runtime_error(what), covariance_(std::move(covariance)) {}

    const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

private:
    Eigen::MatrixXd covariance_;
};

class InnovationCovarianceSingular : public std::runtime_error {
public:
    InnovationCovarianceSingular(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}

    double condition_number() const noexcept { return condition_; }

private:
    double condition_;
};

/// Invalid parameters or configuration values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NoStepDetected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyCell : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A failure tagged with the module that raised it, for CLI diagnostics.
class ModuleError : public std::runtime_error {
public:
    ModuleError(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module))
    {
    }
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

}  // namespace fext
