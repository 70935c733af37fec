#pragma once

#include <stdexcept>
#include <string>

namespace blueprint {

// Malformed JSON or a file that cannot be read as a model/plan.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structurally well-formed input that violates a model or plan invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Planning-time failures (bad pins, budget refusals, unsupported queries).
class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public PlanningError {
 public:
  BudgetExceeded(unsigned long long count, unsigned long long budget)
      : PlanningError("configuration count " + std::to_string(count) +
                      " exceeds budget " + std::to_string(budget)),
        count_(count),
        budget_(budget) {}

  unsigned long long count() const { return count_; }
  unsigned long long budget() const { return budget_; }

 private:
  unsigned long long count_;
  unsigned long long budget_;
};

class ExecutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blueprint
