#pragma once

#include <stdexcept>
#include <string>

namespace phi4mm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A spectrum violates one of its construction invariants.
class InvalidSpectrum : public Error {
 public:
  using Error::Error;
};

/// Two eigenvalues are closer than the configured gap.
class DegenerateSpectrum : public Error {
 public:
  using Error::Error;
};

class NonConvergent : public Error {
 public:
  using Error::Error;
};

class OddDimension : public Error {
 public:
  using Error::Error;
};

class NotSkewSymmetric : public Error {
 public:
  using Error::Error;
};

/// A finite-difference step reaches across half a spectral gap.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

/// A Monte Carlo backed function was differentiated without common random numbers.
class CrnRequired : public Error {
 public:
  using Error::Error;
};

class TruncationInsufficient : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace phi4mm
