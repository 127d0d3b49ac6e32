#pragma once

#include <stdexcept>
#include <string>

namespace metagam {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- input / spec validation -------------------------------------------

class EmptyInput : public Error {
public:
  using Error::Error;
};

class TooFewDistinctValues : public Error {
public:
  using Error::Error;
};

class NonFiniteInput : public Error {
public:
  using Error::Error;
};

class LengthMismatch : public Error {
public:
  using Error::Error;
};

class InvalidSpec : public Error {
public:
  using Error::Error;
};

// ---- data / fitting ------------------------------------------------------

class CsvError : public Error {
public:
  CsvError(const std::string& msg, long line, long column = -1)
      : Error(msg), line(line), column(column) {}
  long line;
  long column;
};

class NonFiniteData : public Error {
public:
  using Error::Error;
};

/// Unpenalized directions of the design are collinear, or a basis function
/// has no data support. This is the shared-knot failure mode; it must be
/// reported, never silently solved.
class RankDeficientDesign : public Error {
public:
  using Error::Error;
};

class UnknownTerm : public Error {
public:
  using Error::Error;
};

class UnknownColumn : public Error {
public:
  using Error::Error;
};

class SingleGroup : public Error {
public:
  using Error::Error;
};

// ---- meta engine ----------------------------------------------------------

class GridMismatch : public Error {
public:
  using Error::Error;
};

class TooFewCohorts : public Error {
public:
  using Error::Error;
};

class BadAlpha : public Error {
public:
  using Error::Error;
};

class OutOfRangeP : public Error {
public:
  using Error::Error;
};

// ---- serialization --------------------------------------------------------

class SchemaViolation : public Error {
public:
  SchemaViolation(const std::string& msg, std::string pointer_path)
      : Error(msg + " at " + pointer_path), pointer(std::move(pointer_path)) {}
  std::string pointer;  // JSON pointer of the offending node
};

class VersionMismatch : public Error {
public:
  using Error::Error;
};

class PrivacyAuditFailure : public Error {
public:
  using Error::Error;
};

}  // namespace metagam
