// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace parteq {

// A request exceeded a documented size cap (exact enumeration, table sizes).
// We refuse loudly instead of silently degrading.
class capacity_error : public std::runtime_error {
 public:
  explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine could not meet its accuracy contract.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(
      const std::string& what,
      double achieved = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), achieved_bound(achieved) {}
  double achieved_bound;
};

// Malformed or inconsistent input data.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace parteq
