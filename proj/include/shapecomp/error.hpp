#pragma once

#include <stdexcept>
#include <string>

namespace shapecomp {

enum class error_kind {
  empty_mask,
  dimension_mismatch,
  grid_mismatch,
  degenerate_input,
  empty_dictionary,
  constant_field,
  search_too_large,
  redundant_composition,
  linkage_not_unique,
  singular_system,
  bounds_violated,
  hypothesis_violated,
  recovery_ambiguous,
  invalid_argument,
  io,
  parse,
};

inline const char* to_string(error_kind k) {
  switch (k) {
    case error_kind::empty_mask: return "empty-mask";
    case error_kind::dimension_mismatch: return "dimension-mismatch";
    case error_kind::grid_mismatch: return "grid-mismatch";
    case error_kind::degenerate_input: return "degenerate-input";
    case error_kind::empty_dictionary: return "empty-dictionary";
    case error_kind::constant_field: return "constant-field";
    case error_kind::search_too_large: return "search-space-too-large";
    case error_kind::redundant_composition: return "redundant-composition";
    case error_kind::linkage_not_unique: return "linkage-not-unique";
    case error_kind::singular_system: return "singular-system";
    case error_kind::bounds_violated: return "bounds-violated";
    case error_kind::hypothesis_violated: return "hypothesis-violated";
    case error_kind::recovery_ambiguous: return "recovery-ambiguous";
    case error_kind::invalid_argument: return "invalid-argument";
    case error_kind::io: return "io";
    case error_kind::parse: return "parse";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class error : public std::runtime_error {
 public:
  error(error_kind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  error_kind kind() const noexcept { return kind_; }

 private:
  error_kind kind_;
};

}  // namespace shapecomp
