#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "stochsafe/polynomial.hpp"

namespace stochsafe {

/// Raised for malformed expressions. `offset()` is the byte offset into the
/// input where the problem was detected.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Grammar:
///   expr    := term (('+' | '-') term)*
///   term    := unary ('*' unary)*
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' integer)?
///   primary := number | name | '(' expr ')'
/// Exponents must be nonnegative integer literals.
Polynomial parse_polynomial(std::string_view text, const SpacePtr& space);

}  // namespace stochsafe
