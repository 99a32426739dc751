#pragma once

#include <stdexcept>
#include <string>

namespace fexkit {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

#define FEXKIT_DEFINE_ERROR(Name)               \
    class Name : public Error {                 \
      public:                                   \
        using Error::Error;                     \
    }

// Expression engine
FEXKIT_DEFINE_ERROR(DomainError);
FEXKIT_DEFINE_ERROR(UnsupportedOperator);
FEXKIT_DEFINE_ERROR(MalformedSequence);
FEXKIT_DEFINE_ERROR(UnknownToken);
FEXKIT_DEFINE_ERROR(LengthMismatch);

// PDE problems and the Monte-Carlo oracle
FEXKIT_DEFINE_ERROR(NotOnBoundary);
FEXKIT_DEFINE_ERROR(DegenerateReference);
FEXKIT_DEFINE_ERROR(OutsideDomain);

// Data and prediction
FEXKIT_DEFINE_ERROR(GenerationFailure);
FEXKIT_DEFINE_ERROR(IoError);
FEXKIT_DEFINE_ERROR(DegenerateData);
FEXKIT_DEFINE_ERROR(MissingExternalPrediction);

// Solver
FEXKIT_DEFINE_ERROR(EmptySearchSpace);

FEXKIT_DEFINE_ERROR(ConfigError);

#undef FEXKIT_DEFINE_ERROR

class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

}  // namespace fexkit
