#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace endogroup {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = std::vector<int>;

// Group index convention: 0 is the outside option, 1..G are groups.
inline constexpr int kOutside = 0;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Raised for malformed inputs: dimension mismatches, bad parameters, bad
// configuration keys. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation produces a non-finite or singular result.
// Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// X'MX is singular: some linear combination of the regressors is a function
// of the selection indices.
class RankConditionError : public NumericError {
 public:
  RankConditionError(const std::string& what, double condition_number)
      : NumericError(what), condition_number_(condition_number) {}
  double condition_number() const { return condition_number_; }

 private:
  double condition_number_;
};

// Group cutoff on the extended real line. A non-binding group has cutoff
// -inf; that value is a tag and never enters arithmetic. +inf only occurs for
// zero-capacity groups, which admit nobody.
class Cutoff {
 public:
  enum class Kind { kNegInf, kFinite, kPosInf };

  static Cutoff NegInf() { return Cutoff(Kind::kNegInf, 0.0); }
  static Cutoff PosInf() { return Cutoff(Kind::kPosInf, 0.0); }
  static Cutoff Finite(double v) { return Cutoff(Kind::kFinite, v); }

  Kind kind() const { return kind_; }
  bool is_finite() const { return kind_ == Kind::kFinite; }
  bool is_neg_inf() const { return kind_ == Kind::kNegInf; }
  bool is_pos_inf() const { return kind_ == Kind::kPosInf; }

  // Only valid for finite cutoffs.
  double value() const {
    if (kind_ != Kind::kFinite) throw std::logic_error("Cutoff::value on infinite cutoff");
    return value_;
  }

  // v >= p with the extended-real ordering.
  bool admits(double qualification) const {
    switch (kind_) {
      case Kind::kNegInf: return true;
      case Kind::kPosInf: return false;
      case Kind::kFinite: return qualification >= value_;
    }
    return false;
  }
  // v > p, used for blocking-pair checks.
  bool strictly_below(double qualification) const {
    switch (kind_) {
      case Kind::kNegInf: return true;
      case Kind::kPosInf: return false;
      case Kind::kFinite: return qualification > value_;
    }
    return false;
  }

  friend bool operator==(const Cutoff& a, const Cutoff& b) {
    return a.kind_ == b.kind_ && (a.kind_ != Kind::kFinite || a.value_ == b.value_);
  }

 private:
  Cutoff(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace endogroup
