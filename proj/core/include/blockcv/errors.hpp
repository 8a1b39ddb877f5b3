#pragma once

#include <stdexcept>
#include <string>

namespace blockcv {

/// Base for domain failures (bad model, bad design, undefined statistic).
/// Argument and precondition violations use std::invalid_argument instead.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A covariance or precision matrix failed to factorize.
class SingularModelError : public Error {
public:
  using Error::Error;
};

/// A fold design cannot be built as requested.
class InvalidDesignError : public Error {
public:
  using Error::Error;
};

/// Negative Hessian at the MAP is not positive definite.
class DegenerateCurvatureError : public Error {
public:
  using Error::Error;
};

/// A statistic has a zero denominator.
class UndefinedStatisticError : public Error {
public:
  using Error::Error;
};

/// A replication contains failed folds and cannot be aggregated.
class IncompleteReplicationError : public Error {
public:
  using Error::Error;
};

/// Experiment configuration rejected by the validator.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace blockcv
