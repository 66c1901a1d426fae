#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracspde {

/// Argument outside the mathematical domain of an operation (t <= 0, alpha
/// outside (1,2], ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke a documented precondition (grid mismatch, overlapping
/// localization windows, missing derivative, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A kernel table could not reach the requested mass tolerance.
class ResolutionError : public std::runtime_error {
 public:
  ResolutionError(const std::string& what, double achieved_mass)
      : std::runtime_error(what), achieved_mass_(achieved_mass) {}
  double achieved_mass() const noexcept { return achieved_mass_; }

 private:
  double achieved_mass_;
};

/// A series or iteration stopped before reaching its tolerance.
class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double achieved_bound)
      : std::runtime_error(what), achieved_bound_(achieved_bound) {}
  double achieved_bound() const noexcept { return achieved_bound_; }

 private:
  double achieved_bound_;
};

/// The time stepper produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t time_index, std::size_t space_index)
      : std::runtime_error(what), time_index_(time_index), space_index_(space_index) {}
  std::size_t time_index() const noexcept { return time_index_; }
  std::size_t space_index() const noexcept { return space_index_; }

 private:
  std::size_t time_index_;
  std::size_t space_index_;
};

}  // namespace fracspde
