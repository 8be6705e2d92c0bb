#pragma once

// Propositional fragment used by the Logic-of-Thought extension stage.
//
// Grammar (';' separates expressions):
//   impl    := or_expr [ '->' impl ]            right-associative
//   or_expr := and_expr { '|' and_expr }
//   and_expr:= unary { '&' unary }
//   unary   := '~' unary | primary
//   primary := atom | '(' impl ')' | 'if' impl 'then' impl
// The words not/and/or are accepted as ~ & | so that translate() output
// parses back. Those words and if/then are reserved.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace bell::logic {

class Proposition {
 public:
  enum class Kind { Atom, Not, And, Or, Implies };

  static Proposition atom(std::string name);
  /// Double negation is eliminated on construction: negate(negate(p)) == p.
  static Proposition negate(const Proposition& p);
  static Proposition conj(const Proposition& a, const Proposition& b);
  static Proposition disj(const Proposition& a, const Proposition& b);
  static Proposition implies(const Proposition& a, const Proposition& b);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  /// Operand of Not, left operand of binary kinds.
  const Proposition& lhs() const { return *lhs_; }
  const Proposition& rhs() const { return *rhs_; }
  bool is_implication() const { return kind_ == Kind::Implies; }

  std::size_t depth() const;

  friend bool operator==(const Proposition& a, const Proposition& b);

 private:
  Proposition() = default;

  Kind kind_ = Kind::Atom;
  std::string name_;
  std::shared_ptr<const Proposition> lhs_;
  std::shared_ptr<const Proposition> rhs_;
};

inline constexpr std::size_t kMaxDepth = 32;

/// Symbolic form, e.g. "~q -> ~p". Parenthesised only where needed.
std::string to_string(const Proposition& p);

struct ParseError {
  std::size_t position = 0;  // byte offset into the parsed text
  std::string message;
};

struct ParseResult {
  std::vector<Proposition> propositions;
  std::vector<ParseError> errors;
};

/// Expressions with syntax errors are skipped; the rest are returned.
ParseResult parse(std::string_view text);

/// Closure under contraposition and hypothetical syllogism, stopping at a
/// fixpoint or after `max_new` additions. The result starts with the
/// deduplicated input followed by additions in derivation order.
std::vector<Proposition> extend(const std::vector<Proposition>& props, std::size_t max_new = 16);

/// English rendering ("if p then q", "not q", "p and q", "p or q"), joined by "; ".
std::string translate(const std::vector<Proposition>& props);
std::string translate(const Proposition& p);

}  // namespace bell::logic
