#pragma once

#include "lqrl/lq_model.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace lqrl {

/// Malformed or inconsistent problem configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Built-in instances: "scalar-canonical" and "planar".
LqProblem builtin_problem(const std::string& name);
bool is_builtin_problem(const std::string& name);

/// Parses the flat key-value format:
///
///   # comment
///   n = 2
///   d = 2
///   T = 1
///   x0 = 1, 0
///   A_star = 0, 1, -1, 0      (row-major)
///   B_star = 1, 0, 0, 1
///   Q = 1, 0, 0, 1
///   R = 1, 0, 0, 1
///
/// Every key is required exactly once; the result is validated. Throws
/// ConfigError on any problem.
LqProblem parse_problem(std::istream& in);
LqProblem load_problem(const std::filesystem::path& path);

/// Resolves a built-in name or a config file path.
LqProblem resolve_problem(const std::string& name_or_path);

void write_problem(std::ostream& out, const LqProblem& p);

}  // namespace lqrl
