#pragma once

#include <stdexcept>
#include <string>

namespace btdet {

enum class ErrorKind {
  Dimension,       // shape mismatch, non-square where square required
  Singularity,     // matrix singular to working tolerance
  Domain,          // argument outside the admissible set (branch cut, z = 0, ...)
  Convergence,     // iteration failed to reach its residual target
  SpectralPoint,   // evaluation hit (a numerical neighbourhood of) spectrum
  Pole,            // determinant evaluated at a pole of the pair
  Contract,        // caller violated a structural precondition (J-unitarity, classification)
  Stiffness,       // ODE step size underflow
  Refinement,      // sampled path too coarse for branch continuation
  ZeroCrossing,    // determinant vanished on a path
  Stencil,         // finite-difference stencil straddles a pole
  Coverage,        // grid/window does not cover the required support
  Inconclusive,    // winding did not stabilise within the refinement budget
  Resolution,      // discretization too coarse
  Parameter,       // bad numeric parameter (mu in spectrum of B, empty ladder, ...)
  Io,              // file / parse problems
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Singularity error carrying the condition estimate that triggered it.
class SingularityError : public Error {
public:
  SingularityError(std::string msg, double cond)
      : Error(ErrorKind::Singularity, std::move(msg)), cond_(cond) {}
  double condition_estimate() const noexcept { return cond_; }

private:
  double cond_;
};

// Path errors carrying the offending sample index.
class PathError : public Error {
public:
  PathError(ErrorKind kind, std::string msg, std::size_t index)
      : Error(kind, std::move(msg)), index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::SpectralPoint: return "spectral-point";
    case ErrorKind::Pole: return "pole";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Stiffness: return "stiffness";
    case ErrorKind::Refinement: return "refinement";
    case ErrorKind::ZeroCrossing: return "zero-crossing";
    case ErrorKind::Stencil: return "stencil";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Inconclusive: return "inconclusive";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

} // namespace btdet
