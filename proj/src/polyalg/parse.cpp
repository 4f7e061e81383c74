#include "stochsafe/parse.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace stochsafe {

namespace {

class Parser {
 public:
  Parser(std::string_view text, const SpacePtr& space) : text_(text), space_(space) {}

  Polynomial run() {
    skip_ws();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    Polynomial p = expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return p;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial p = term();
    for (;;) {
      if (accept('+')) {
        p += term();
      } else if (accept('-')) {
        p -= term();
      } else {
        return p;
      }
    }
  }

  Polynomial term() {
    Polynomial p = unary();
    while (accept('*')) p = p * unary();
    return p;
  }

  Polynomial unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t at = pos_;
    if (at < text_.size() && text_[at] == '-') throw ParseError("negative exponent", at);
    std::size_t end = at;
    while (end < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                                  text_[end] == 'e' || text_[end] == 'E'))
      ++end;
    if (end == at) throw ParseError("expected integer exponent", at);
    std::string_view tok = text_.substr(at, end - at);
    for (char c : tok)
      if (!std::isdigit(static_cast<unsigned char>(c))) throw ParseError("fractional exponent", at);
    int e = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), e);
    if (res.ec != std::errc()) throw ParseError("exponent out of range", at);
    pos_ = end;
    return base.pow(e);
  }

  Polynomial primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Polynomial number() {
    const std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.')) ++end;
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t k = end + 1;
      if (k < text_.size() && (text_[k] == '+' || text_[k] == '-')) ++k;
      if (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) {
        while (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) ++k;
        end = k;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + at, text_.data() + end, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + end) throw ParseError("malformed number", at);
    pos_ = end;
    return Polynomial::constant(space_, v);
  }

  Polynomial name() {
    const std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) ++end;
    std::string_view id = text_.substr(at, end - at);
    const int idx = space_->find(id);
    if (idx < 0) throw ParseError("unknown variable '" + std::string(id) + "'", at);
    pos_ = end;
    return Polynomial::variable(space_, idx);
  }

  std::string_view text_;
  const SpacePtr& space_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, const SpacePtr& space) {
  return Parser(text, space).run();
}

}  // namespace stochsafe
