#pragma once

#include <stdexcept>
#include <string>

namespace coxmesh {

/// Failure category; the CLI maps these onto exit codes 1, 2 and 3.
enum class ErrorKind { Config, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string component, const std::string& message)
      : std::runtime_error(component + ": " + message),
        kind_(kind),
        component_(std::move(component)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& component() const noexcept { return component_; }

 private:
  ErrorKind kind_;
  std::string component_;
};

inline Error config_error(std::string component, const std::string& msg) {
  return {ErrorKind::Config, std::move(component), msg};
}
inline Error data_error(std::string component, const std::string& msg) {
  return {ErrorKind::Data, std::move(component), msg};
}
inline Error numerical_error(std::string component, const std::string& msg) {
  return {ErrorKind::Numerical, std::move(component), msg};
}

}  // namespace coxmesh
