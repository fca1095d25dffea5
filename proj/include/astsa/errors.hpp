#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace astsa {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Data model / grid errors.
class MismatchedInterval : public Error { using Error::Error; };
class IntervalError : public Error { using Error::Error; };
class UnknownChannel : public Error { using Error::Error; };

// Packet parsing.
class FormatError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };

// Storage.
class IoError : public Error { using Error::Error; };
class OverwriteConflict : public Error { using Error::Error; };

// Expressions and pattern queries. Carries the byte offset of the
// first character that could not be consumed.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class UnknownConstant : public Error { using Error::Error; };

// Symbolization.
class LexiconMismatch : public Error { using Error::Error; };
class ArityMismatch : public Error { using Error::Error; };
class BrokenTiling : public Error { using Error::Error; };

// Analytics.
class BinWidthError : public Error { using Error::Error; };
class InsufficientData : public Error { using Error::Error; };

// Configuration and scenario specs.
class ConfigError : public Error { using Error::Error; };
class SpecError : public Error { using Error::Error; };

}  // namespace astsa
