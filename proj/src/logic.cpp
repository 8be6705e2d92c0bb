#include "bell/logic.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace bell::logic {

Proposition Proposition::atom(std::string name) {
  Proposition p;
  p.kind_ = Kind::Atom;
  p.name_ = std::move(name);
  return p;
}

Proposition Proposition::negate(const Proposition& p) {
  if (p.kind_ == Kind::Not) return *p.lhs_;
  Proposition out;
  out.kind_ = Kind::Not;
  out.lhs_ = std::make_shared<const Proposition>(p);
  return out;
}

Proposition Proposition::conj(const Proposition& a, const Proposition& b) {
  Proposition out;
  out.kind_ = Kind::And;
  out.lhs_ = std::make_shared<const Proposition>(a);
  out.rhs_ = std::make_shared<const Proposition>(b);
  return out;
}

Proposition Proposition::disj(const Proposition& a, const Proposition& b) {
  Proposition out = conj(a, b);
  out.kind_ = Kind::Or;
  return out;
}

Proposition Proposition::implies(const Proposition& a, const Proposition& b) {
  Proposition out = conj(a, b);
  out.kind_ = Kind::Implies;
  return out;
}

std::size_t Proposition::depth() const {
  switch (kind_) {
    case Kind::Atom: return 1;
    case Kind::Not: return 1 + lhs_->depth();
    default: return 1 + std::max(lhs_->depth(), rhs_->depth());
  }
}

bool operator==(const Proposition& a, const Proposition& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Proposition::Kind::Atom: return a.name_ == b.name_;
    case Proposition::Kind::Not: return *a.lhs_ == *b.lhs_;
    default: return *a.lhs_ == *b.lhs_ && *a.rhs_ == *b.rhs_;
  }
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

int precedence(Proposition::Kind kind) {
  switch (kind) {
    case Proposition::Kind::Implies: return 1;
    case Proposition::Kind::Or: return 2;
    case Proposition::Kind::And: return 3;
    case Proposition::Kind::Not: return 4;
    case Proposition::Kind::Atom: return 5;
  }
  return 5;
}

struct Words {
  const char* not_;
  const char* and_;
  const char* or_;
  bool english;
};

constexpr Words kSymbols{"~", " & ", " | ", false};
constexpr Words kEnglish{"not ", " and ", " or ", true};

std::string render(const Proposition& p, const Words& w);

std::string wrap_if(bool cond, std::string s) { return cond ? "(" + s + ")" : s; }

std::string render(const Proposition& p, const Words& w) {
  using K = Proposition::Kind;
  switch (p.kind()) {
    case K::Atom: return p.name();
    case K::Not: return w.not_ + wrap_if(precedence(p.lhs().kind()) < precedence(K::Not),
                                         render(p.lhs(), w));
    case K::And:
    case K::Or: {
      const int prec = precedence(p.kind());
      std::string l = wrap_if(precedence(p.lhs().kind()) < prec, render(p.lhs(), w));
      std::string r = wrap_if(precedence(p.rhs().kind()) <= prec, render(p.rhs(), w));
      return l + (p.kind() == K::And ? w.and_ : w.or_) + r;
    }
    case K::Implies: {
      std::string l = wrap_if(p.lhs().is_implication(), render(p.lhs(), w));
      std::string r = render(p.rhs(), w);
      if (w.english) return "if " + l + " then " + r;
      return l + " -> " + r;
    }
  }
  return {};
}

}  // namespace

std::string to_string(const Proposition& p) { return render(p, kSymbols); }

std::string translate(const Proposition& p) { return render(p, kEnglish); }

std::string translate(const std::vector<Proposition>& props) {
  std::string out;
  for (const auto& p : props) {
    if (!out.empty()) out += "; ";
    out += translate(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Tok { Ident, Not, And, Or, Implies, If, Then, LParen, RParen, Semi, End, Bad };

struct Token {
  Tok kind;
  std::size_t pos;
  std::string text;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (std::isalpha(c) || c == '_') {
      std::size_t start = i;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
        ++i;
      }
      std::string word(text.substr(start, i - start));
      std::string key = lower(word);
      Tok kind = Tok::Ident;
      if (key == "not") kind = Tok::Not;
      else if (key == "and") kind = Tok::And;
      else if (key == "or") kind = Tok::Or;
      else if (key == "if") kind = Tok::If;
      else if (key == "then") kind = Tok::Then;
      out.push_back({kind, start, std::move(word)});
      continue;
    }
    switch (c) {
      case '~': out.push_back({Tok::Not, i, "~"}); ++i; continue;
      case '&': out.push_back({Tok::And, i, "&"}); ++i; continue;
      case '|': out.push_back({Tok::Or, i, "|"}); ++i; continue;
      case '(': out.push_back({Tok::LParen, i, "("}); ++i; continue;
      case ')': out.push_back({Tok::RParen, i, ")"}); ++i; continue;
      case ';': out.push_back({Tok::Semi, i, ";"}); ++i; continue;
      case '-':
        if (i + 1 < text.size() && text[i + 1] == '>') {
          out.push_back({Tok::Implies, i, "->"});
          i += 2;
          continue;
        }
        break;
      default: break;
    }
    out.push_back({Tok::Bad, i, std::string(1, static_cast<char>(c))});
    ++i;
  }
  out.push_back({Tok::End, text.size(), ""});
  return out;
}

struct SyntaxError {
  std::size_t position;
  std::string message;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::Semi: return "';'";
    default: return "'" + t.text + "'";
  }
}

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

  ParseResult run() {
    ParseResult result;
    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Semi) {
        ++pos_;
        continue;
      }
      try {
        depth_ = 0;
        Proposition p = implication();
        if (peek().kind != Tok::Semi && peek().kind != Tok::End) {
          throw SyntaxError{peek().pos, "unexpected " + describe(peek()) + " after expression"};
        }
        if (p.depth() > kMaxDepth) {
          throw SyntaxError{statement_start_, "expression deeper than 32 levels"};
        }
        result.propositions.push_back(std::move(p));
      } catch (const SyntaxError& e) {
        result.errors.push_back({e.position, e.message});
        while (peek().kind != Tok::Semi && peek().kind != Tok::End) ++pos_;
      }
    }
    return result;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }

  // Bounds recursion; the 32-level tree limit is checked on the result.
  static constexpr std::size_t kMaxNesting = 4 * kMaxDepth;

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser, std::size_t at) : p(parser) {
      if (++p.depth_ > kMaxNesting) throw SyntaxError{at, "expression deeper than 32 levels"};
    }
    ~DepthGuard() { --p.depth_; }
  };

  Proposition implication() {
    if (depth_ == 0) statement_start_ = peek().pos;
    DepthGuard guard(*this, peek().pos);
    Proposition left = disjunction();
    if (peek().kind == Tok::Implies) {
      ++pos_;
      Proposition right = implication();
      return Proposition::implies(left, right);
    }
    return left;
  }

  Proposition disjunction() {
    Proposition left = conjunction();
    while (peek().kind == Tok::Or) {
      ++pos_;
      left = Proposition::disj(left, conjunction());
    }
    return left;
  }

  Proposition conjunction() {
    Proposition left = unary();
    while (peek().kind == Tok::And) {
      ++pos_;
      left = Proposition::conj(left, unary());
    }
    return left;
  }

  Proposition unary() {
    if (peek().kind == Tok::Not) {
      DepthGuard guard(*this, peek().pos);
      ++pos_;
      return Proposition::negate(unary());
    }
    return primary();
  }

  Proposition primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Ident:
        ++pos_;
        return Proposition::atom(t.text);
      case Tok::LParen: {
        ++pos_;
        Proposition inner = implication();
        if (peek().kind != Tok::RParen) {
          throw SyntaxError{peek().pos, "expected ')' but found " + describe(peek())};
        }
        ++pos_;
        return inner;
      }
      case Tok::If: {
        ++pos_;
        Proposition cond = implication();
        if (peek().kind != Tok::Then) {
          throw SyntaxError{peek().pos, "expected 'then' but found " + describe(peek())};
        }
        ++pos_;
        Proposition body = implication();
        return Proposition::implies(cond, body);
      }
      case Tok::Bad:
        throw SyntaxError{t.pos, "unexpected character " + describe(t)};
      default:
        throw SyntaxError{t.pos, "expected a proposition but found " + describe(t)};
    }
  }

  const std::vector<Token>& tokens_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  std::size_t statement_start_ = 0;
};

}  // namespace

ParseResult parse(std::string_view text) {
  auto tokens = lex(text);
  return Parser(tokens).run();
}

// ---------------------------------------------------------------------------
// Closure

std::vector<Proposition> extend(const std::vector<Proposition>& props, std::size_t max_new) {
  std::vector<Proposition> out;
  std::set<std::string> seen;
  for (const auto& p : props) {
    if (seen.insert(to_string(p)).second) out.push_back(p);
  }
  std::size_t added = 0;
  auto add = [&](Proposition p) {
    if (added >= max_new) return;
    if (p.lhs() == p.rhs()) return;
    if (seen.insert(to_string(p)).second) {
      out.push_back(std::move(p));
      ++added;
    }
  };

  for (;;) {
    const std::size_t before = out.size();
    const std::vector<Proposition> snapshot = out;
    for (const auto& first : snapshot) {
      if (!first.is_implication()) continue;
      for (const auto& second : snapshot) {
        if (second.is_implication() && first.rhs() == second.lhs()) {
          add(Proposition::implies(first.lhs(), second.rhs()));
        }
      }
    }
    for (const auto& p : snapshot) {
      if (p.is_implication()) {
        add(Proposition::implies(Proposition::negate(p.rhs()), Proposition::negate(p.lhs())));
      }
    }
    if (out.size() == before || added >= max_new) break;
  }
  return out;
}

}  // namespace bell::logic
