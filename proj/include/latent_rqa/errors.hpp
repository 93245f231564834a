#pragma once

#include <stdexcept>
#include <string>

namespace lrqa {

/// Base of every error raised by the library. The CLI maps all of these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error { using Error::Error; };           // open/read/write failures
class FormatError : public Error { using Error::Error; };       // bad magic, version or dtype
class CorruptionError : public Error { using Error::Error; };   // truncated or oversized payload
class ValidationError : public Error { using Error::Error; };   // data violates a type invariant
class ParseError : public Error { using Error::Error; };        // malformed JSON/CSV input
class InsufficientDataError : public Error { using Error::Error; };
class DegenerateVectorError : public Error { using Error::Error; };  // zero-norm hidden state
class DegenerateSeriesError : public Error { using Error::Error; };  // F(n) = 0 in DFA
class DegenerateLabelError : public Error { using Error::Error; };   // single class in training data
class ConfigError : public Error { using Error::Error; };
class OracleScopeError : public Error { using Error::Error; };
class LeakageError : public Error { using Error::Error; };

}  // namespace lrqa
