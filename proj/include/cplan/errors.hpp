#pragma once

#include <stdexcept>
#include <string>

namespace cplan {

// Base for every error raised by the planner. `kind()` is a stable tag used
// in machine-readable CLI output.
class PlannerError : public std::runtime_error {
 public:
  PlannerError(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Config text does not match the schema. `path()` is e.g. "power.p_tot".
class SchemaError : public PlannerError {
 public:
  SchemaError(std::string path, const std::string& msg)
      : PlannerError("schema", path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// A named model invariant does not hold, e.g. "covertness_range".
class ConstraintError : public PlannerError {
 public:
  ConstraintError(std::string name, const std::string& msg)
      : PlannerError("constraint", name + ": " + msg), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class GeometryError : public PlannerError {
 public:
  explicit GeometryError(const std::string& msg) : PlannerError("geometry", msg) {}
};

class ParameterError : public PlannerError {
 public:
  explicit ParameterError(const std::string& msg) : PlannerError("parameter", msg) {}
};

class ShapeError : public PlannerError {
 public:
  explicit ShapeError(const std::string& msg) : PlannerError("shape", msg) {}
};

class InfeasibleError : public PlannerError {
 public:
  InfeasibleError(std::string binding, const std::string& msg)
      : PlannerError("infeasible", binding + ": " + msg), binding_(std::move(binding)) {}
  const std::string& binding() const { return binding_; }

 private:
  std::string binding_;
};

class CurvatureError : public PlannerError {
 public:
  explicit CurvatureError(const std::string& msg) : PlannerError("curvature", msg) {}
};

}  // namespace cplan
