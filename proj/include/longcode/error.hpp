#pragma once

#include <stdexcept>
#include <string>

namespace longcode {

enum class ErrorKind {
  usage,       // bad flags, missing input paths
  io,          // file system failures
  parse,       // malformed input files
  validation,  // well-formed input violating an invariant
  service,     // remote judge / embedder failures
  undefined,   // statistic undefined for the given input (e.g. constant vector)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LONGCODE_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

LONGCODE_DEFINE_ERROR(UsageError, usage)
LONGCODE_DEFINE_ERROR(IoError, io)
LONGCODE_DEFINE_ERROR(ParseError, parse)
LONGCODE_DEFINE_ERROR(ValidationError, validation)
LONGCODE_DEFINE_ERROR(ServiceError, service)
LONGCODE_DEFINE_ERROR(UndefinedError, undefined)

#undef LONGCODE_DEFINE_ERROR

}  // namespace longcode
