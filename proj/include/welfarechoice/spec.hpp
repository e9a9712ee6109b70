#pragma once

#include "welfarechoice/ram.hpp"
#include "welfarechoice/welfare.hpp"

#include <string>

namespace welfarechoice {

/// Malformed or invalid model specification. The message names the line or
/// the offending field (e.g. "components[1].weight").
class SpecError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// A parsed model specification (JSON document with a "kind" field).
struct ModelSpec {
  std::string kind;
  std::size_t n = 0;
  ModelPtr model;
  RegularizerPtr regularizer;  // set for the ram_* kinds only
  std::string canonical;       // compact JSON of the parsed document
};

ModelSpec parse_model_spec(const std::string& text);
ModelSpec load_model_spec(const std::string& path);

}  // namespace welfarechoice
