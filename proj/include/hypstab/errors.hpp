#pragma once

#include <stdexcept>
#include <string>

namespace hypstab {

struct NonPositiveSpeed : std::runtime_error {
    explicit NonPositiveSpeed(const std::string& what) : std::runtime_error(what) {}
};

struct MixedSignSpeeds : std::runtime_error {
    explicit MixedSignSpeeds(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfDomain : std::runtime_error {
    explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergence : std::runtime_error {
    explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct CaseMismatch : std::runtime_error {
    explicit CaseMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct WrongCase : std::runtime_error {
    explicit WrongCase(const std::string& what) : std::runtime_error(what) {}
};

struct CflViolation : std::runtime_error {
    explicit CflViolation(const std::string& what) : std::runtime_error(what) {}
};

struct NonzeroDiagonalCoupling : std::runtime_error {
    explicit NonzeroDiagonalCoupling(const std::string& what) : std::runtime_error(what) {}
};

struct GridMismatch : std::runtime_error {
    explicit GridMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct MissingFeedforward : std::runtime_error {
    explicit MissingFeedforward(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hypstab
