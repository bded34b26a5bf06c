#pragma once

#include <stdexcept>
#include <string>

namespace dmnls {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A generated profile does not decay to the wrap-around threshold inside the domain.
class DomainTooSmall : public Error {
 public:
  using Error::Error;
};

/// A solver produced non-finite samples or runaway H^1 growth.
class BlowUp : public Error {
 public:
  BlowUp(double time, double h1, const std::string& what)
      : Error(what), time_(time), h1_(h1) {}
  double time() const { return time_; }
  double h1() const { return h1_; }

 private:
  double time_;
  double h1_;
};

/// A time step straddles a breakpoint of the dispersion or gain profile.
class BreakpointCrossed : public Error {
 public:
  using Error::Error;
};

/// The accumulated dispersion over the probed interval vanishes.
class ResonantDispersion : public Error {
 public:
  using Error::Error;
};

/// Two independent integration paths disagree beyond tolerance.
class PathDisagreement : public Error {
 public:
  PathDisagreement(double discrepancy, const std::string& what)
      : Error(what), discrepancy_(discrepancy) {}
  double discrepancy() const { return discrepancy_; }

 private:
  double discrepancy_;
};

class SnapshotError : public Error {
 public:
  enum class Kind { io, bad_magic, length_mismatch, non_finite, bad_grid };
  SnapshotError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace dmnls
