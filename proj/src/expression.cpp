#include "brvr/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace brvr {

namespace {

class Parser {
 public:
  Parser(std::string_view text, const std::map<std::string, double>& vars) : text_(text), vars_(vars) {}

  double parse() {
    const double v = sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionError("in expression '" + std::string(text_) + "': " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool at_factor_start() {
    skip_space();
    if (pos_ >= text_.size()) return false;
    const char c = text_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '(' ||
           std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }

  double sum() {
    double v = product();
    for (;;) {
      skip_space();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        const char op = text_[pos_++];
        const double rhs = product();
        v = op == '+' ? v + rhs : v - rhs;
      } else {
        return v;
      }
    }
  }

  double product() {
    double v = unary();
    for (;;) {
      skip_space();
      if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
        const char op = text_[pos_++];
        const double rhs = unary();
        if (op == '/' && rhs == 0.0) fail("division by zero");
        v = op == '*' ? v * rhs : v / rhs;
      } else if (at_factor_start()) {
        v *= primary();
      } else {
        return v;
      }
    }
  }

  double unary() {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      return -unary();
    }
    if (pos_ < text_.size() && text_[pos_] == '+') {
      ++pos_;
      return unary();
    }
    return primary();
  }

  double primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const double v = sum();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
      ++pos_;
      return v;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      // Stop before an exponent-free identifier so "12L" reads as 12 * L.
      std::size_t end = pos_;
      while (end < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.')) ++end;
      if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
        std::size_t exp = end + 1;
        if (exp < text_.size() && (text_[exp] == '+' || text_[exp] == '-')) ++exp;
        if (exp < text_.size() && std::isdigit(static_cast<unsigned char>(text_[exp]))) {
          end = exp;
          while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        }
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + end, v);
      if (ec != std::errc() || ptr != text_.data() + end) fail("bad number");
      pos_ = end;
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) ++end;
      const std::string name(text_.substr(pos_, end - pos_));
      auto it = vars_.find(name);
      if (it == vars_.end()) fail("unknown name '" + name + "'");
      pos_ = end;
      return it->second;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  const std::map<std::string, double>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

double evaluate_expression(std::string_view text, const std::map<std::string, double>& vars) {
  const double v = Parser(text, vars).parse();
  if (!std::isfinite(v)) throw ExpressionError("expression '" + std::string(text) + "' is not finite");
  return v;
}

std::size_t resolve_batchsize(std::string_view text, double m) {
  const double v = evaluate_expression(text, {{"m", m}});
  if (!(v > 0.0)) throw ExpressionError("batchsize '" + std::string(text) + "' must be positive");
  // Guard against 0.01 * 8124 landing a hair above an integer.
  const double rounded = std::round(v);
  const double b = std::abs(v - rounded) <= 1e-9 * std::max(1.0, rounded) ? rounded : std::ceil(v);
  return static_cast<std::size_t>(std::max(1.0, b));
}

}  // namespace brvr
