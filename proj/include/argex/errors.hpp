#pragma once

#include <stdexcept>
#include <string>

namespace argex {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A softmax row with no unmasked position.
struct DegenerateMaskError : Error {
  using Error::Error;
};

// backward() called on a non-scalar tensor.
struct NonScalarLossError : Error {
  using Error::Error;
};

// Optimizer step over a parameter whose gradient was never populated.
struct MissingGradError : Error {
  using Error::Error;
};

// Generic precondition violation (bad dropout rate, zero steps, ...).
struct ValueError : Error {
  using Error::Error;
};

// Invalid configuration (missing key, bad value, infeasible combination).
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint file missing, corrupt, or incompatible with current config.
struct CheckpointError : Error {
  using Error::Error;
};

// Filesystem trouble.
struct IoError : Error {
  using Error::Error;
};

// Corpus-level problems carry the record location for diagnostics.
struct CorpusError : Error {
  CorpusError(const std::string& what, std::string doc, std::string sent,
              long line_no)
      : Error(what + " (doc=" + doc + " sent=" + sent +
              " line=" + std::to_string(line_no) + ")"),
        doc_id(std::move(doc)),
        sent_id(std::move(sent)),
        line(line_no) {}
  std::string doc_id;
  std::string sent_id;
  long line = -1;
};

// A line that is not valid JSON or misses required fields.
struct RecordFormatError : CorpusError {
  using CorpusError::CorpusError;
};

// dep_heads does not form a single rooted tree.
struct CyclicParseError : CorpusError {
  using CorpusError::CorpusError;
};

// A span index outside [0, T) or start > end.
struct SpanRangeError : CorpusError {
  using CorpusError::CorpusError;
};

// An argument role that the schema does not permit for its event type.
struct RolePermissibilityError : CorpusError {
  using CorpusError::CorpusError;
};

}  // namespace argex
