#pragma once

#include <stdexcept>
#include <string>

namespace fracture {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormulaError : Error {
  using Error::Error;
};

// Region or boundary labels that do not align with the eps-grid.
struct NonConformingDomain : Error {
  using Error::Error;
};

// Label layout violating a domain invariant (e.g. traction touching the brittle region).
struct DomainError : Error {
  using Error::Error;
};

struct ParamOutOfRange : Error {
  using Error::Error;
};

struct DegenerateModel : Error {
  using Error::Error;
};

struct NonGenericPosition : Error {
  using Error::Error;
};

struct CrackOutsideBrittle : Error {
  using Error::Error;
};

struct SolveFailure : Error {
  using Error::Error;
};

struct EnumerationCapExceeded : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(const std::string& what, int line = -1, int column = -1)
      : Error(what), line(line), column(column) {}
  int line;
  int column;
};

}  // namespace fracture
