#ifndef BRVR_EXPRESSION_HPP
#define BRVR_EXPRESSION_HPP

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace brvr {

class ExpressionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluates arithmetic over numbers and named constants: + - * / with
/// parentheses, unary minus, and implicit multiplication ("12L", "0.01m",
/// "2(L+1)"). Names are single identifiers looked up in `vars`.
double evaluate_expression(std::string_view text, const std::map<std::string, double>& vars);

/// Batch size from an expression such as "10" or "0.01m", rounded up and
/// floored at 1.
std::size_t resolve_batchsize(std::string_view text, double m);

}  // namespace brvr

#endif  // BRVR_EXPRESSION_HPP
