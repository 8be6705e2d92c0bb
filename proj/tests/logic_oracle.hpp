#pragma once

// Truth-table entailment checker and random premise generator, independent
// of the inference rules under test.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bell/logic.hpp"

namespace bell::testing {

using logic::Proposition;

inline bool eval(const Proposition& p, const std::map<std::string, bool>& v) {
  switch (p.kind()) {
    case Proposition::Kind::Atom: return v.at(p.name());
    case Proposition::Kind::Not: return !eval(p.lhs(), v);
    case Proposition::Kind::And: return eval(p.lhs(), v) && eval(p.rhs(), v);
    case Proposition::Kind::Or: return eval(p.lhs(), v) || eval(p.rhs(), v);
    case Proposition::Kind::Implies: return !eval(p.lhs(), v) || eval(p.rhs(), v);
  }
  return false;
}

inline void collect_atoms(const Proposition& p, std::set<std::string>& out) {
  if (p.kind() == Proposition::Kind::Atom) {
    out.insert(p.name());
  } else if (p.kind() == Proposition::Kind::Not) {
    collect_atoms(p.lhs(), out);
  } else {
    collect_atoms(p.lhs(), out);
    collect_atoms(p.rhs(), out);
  }
}

/// True when every assignment satisfying all premises satisfies `goal`.
inline bool entails(const std::vector<Proposition>& premises, const Proposition& goal) {
  std::set<std::string> atom_set;
  for (const auto& p : premises) collect_atoms(p, atom_set);
  collect_atoms(goal, atom_set);
  std::vector<std::string> atoms(atom_set.begin(), atom_set.end());
  if (atoms.size() > 20) throw std::runtime_error("too many atoms for the truth table");
  const std::uint64_t rows = std::uint64_t{1} << atoms.size();
  std::map<std::string, bool> v;
  for (std::uint64_t row = 0; row < rows; ++row) {
    for (std::size_t i = 0; i < atoms.size(); ++i) v[atoms[i]] = (row >> i) & 1;
    bool all = true;
    for (const auto& p : premises) {
      if (!eval(p, v)) {
        all = false;
        break;
      }
    }
    if (all && !eval(goal, v)) return false;
  }
  return true;
}

/// Literal: atom or its negation.
inline Proposition random_literal(std::mt19937_64& rng, int n_atoms) {
  auto a = Proposition::atom("p" + std::to_string(rng() % n_atoms));
  return rng() % 2 ? Proposition::negate(a) : a;
}

/// Implications between literals plus the occasional bare literal.
inline std::vector<Proposition> random_premises(std::mt19937_64& rng, int max_atoms = 8) {
  const int n_atoms = 1 + static_cast<int>(rng() % max_atoms);
  const int n = 1 + static_cast<int>(rng() % 6);
  std::vector<Proposition> out;
  for (int i = 0; i < n; ++i) {
    if (rng() % 5 == 0) {
      out.push_back(random_literal(rng, n_atoms));
    } else {
      out.push_back(Proposition::implies(random_literal(rng, n_atoms), random_literal(rng, n_atoms)));
    }
  }
  return out;
}

}  // namespace bell::testing
