#pragma once

#include <gmpxx.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cbp/factor_graph.hpp"

namespace cbp {

/// A signed propositional literal; variables are 1-based as in DIMACS.
struct Literal {
  int var = 1;
  bool positive = true;

  int encode() const { return positive ? var : -var; }
  static Literal decode(int lit) { return {lit < 0 ? -lit : lit, lit > 0}; }
  Literal negated() const { return {var, !positive}; }
  friend bool operator==(const Literal&, const Literal&) = default;
};

using Clause = std::vector<Literal>;

struct CnfFormula {
  int num_vars = 0;
  std::vector<Clause> clauses;
  // parse bookkeeping
  int tautologies_removed = 0;
  int duplicate_literals_removed = 0;
};

/// Variables that occur in at least one clause, ascending.
inline std::vector<int> occurring_variables(const CnfFormula& f) {
  std::set<int> occ;
  for (const Clause& c : f.clauses)
    for (const Literal& l : c) occ.insert(l.var);
  return {occ.begin(), occ.end()};
}

inline CnfFormula parse_dimacs(std::istream& in) {
  CnfFormula f;
  long declared_clauses = -1;
  std::string line;
  int line_no = 0;
  bool in_clause = false;
  Clause current;
  auto finish_clause = [&](int at_line) {
    Clause cleaned;
    bool tautology = false;
    for (const Literal& l : current) {
      if (std::find(cleaned.begin(), cleaned.end(), l) != cleaned.end()) {
        ++f.duplicate_literals_removed;
        continue;
      }
      if (std::find(cleaned.begin(), cleaned.end(), l.negated()) != cleaned.end()) tautology = true;
      cleaned.push_back(l);
    }
    if (tautology)
      ++f.tautologies_removed;
    else
      f.clauses.push_back(std::move(cleaned));
    current.clear();
    in_clause = false;
    (void)at_line;
  };
  long total_clauses = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == 'c' || line[0] == '%') continue;
    std::istringstream ls(line);
    if (declared_clauses < 0) {
      std::string p, fmt;
      long v = -1, c = -1;
      if (!(ls >> p)) continue;
      if (p != "p") throw ParseError("expected DIMACS header 'p cnf <vars> <clauses>'", line_no);
      if (!(ls >> fmt >> v >> c) || fmt != "cnf" || v < 0 || c < 0)
        throw ParseError("malformed DIMACS header", line_no);
      f.num_vars = static_cast<int>(v);
      declared_clauses = c;
      continue;
    }
    long lit = 0;
    while (ls >> lit) {
      if (lit == 0) {
        ++total_clauses;
        finish_clause(line_no);
        continue;
      }
      long v = lit < 0 ? -lit : lit;
      if (v > f.num_vars)
        throw ParseError("literal " + std::to_string(lit) + " out of range (num vars " +
                             std::to_string(f.num_vars) + ")",
                         line_no);
      current.push_back(Literal::decode(static_cast<int>(lit)));
      in_clause = true;
    }
    if (ls.fail() && !ls.eof()) throw ParseError("expected integer literal", line_no);
  }
  if (declared_clauses < 0) throw ParseError("missing DIMACS header");
  if (in_clause) throw ParseError("unterminated clause (missing trailing 0)", line_no);
  if (total_clauses != declared_clauses)
    throw ParseError("header declares " + std::to_string(declared_clauses) + " clauses, found " +
                     std::to_string(total_clauses));
  return f;
}

inline CnfFormula parse_dimacs(const std::string& text) {
  std::istringstream in(text);
  return parse_dimacs(in);
}

/// Canonical ordering is simply the input ordering: clauses and literals are
/// written exactly as stored.
inline std::string write_dimacs(const CnfFormula& f) {
  std::ostringstream out;
  out << "p cnf " << f.num_vars << " " << f.clauses.size() << "\n";
  for (const Clause& c : f.clauses) {
    for (const Literal& l : c) out << l.encode() << " ";
    out << "0\n";
  }
  return out.str();
}

/// One binary variable per proposition, one factor per clause whose table is
/// 0 on the unique falsifying assignment and 1 elsewhere. State 0 is false,
/// state 1 is true.
inline FactorGraph to_factor_graph(const CnfFormula& f) {
  std::vector<Variable> vars;
  vars.reserve(static_cast<std::size_t>(f.num_vars));
  for (int i = 0; i < f.num_vars; ++i)
    vars.push_back({i, 2, "x" + std::to_string(i + 1)});
  std::vector<Factor> factors;
  factors.reserve(f.clauses.size());
  for (const Clause& c : f.clauses) {
    if (c.empty()) throw ContradictionError("empty clause: formula has no models");
    if (c.size() > 24) throw BudgetError("clause of width " + std::to_string(c.size()) +
                                         " exceeds the dense-table limit (24)");
    Factor fac;
    fac.id = static_cast<FactorId>(factors.size());
    std::vector<State> falsifying;
    for (const Literal& l : c) {
      fac.args.push_back(l.var - 1);
      falsifying.push_back(l.positive ? 0 : 1);
    }
    std::vector<int> cards(c.size(), 2);
    std::vector<double> values(static_cast<std::size_t>(1) << c.size(), 1.0);
    Potential table(std::move(cards), std::move(values));
    table.set(table.flat_index(falsifying), 0.0);
    fac.table = std::move(table);
    factors.push_back(std::move(fac));
  }
  return FactorGraph::build(std::move(vars), std::move(factors));
}

struct PropagationResult {
  CnfFormula residual;
  std::vector<Literal> implied;  // unit-propagated fixings, excluding the conditioned literal
  bool conflict = false;
};

/// Conditions on `literal` (when given) and runs unit propagation to the
/// fixpoint. Satisfied clauses are dropped, falsified literals removed;
/// surviving clauses keep their input order. A derived empty clause reports
/// `conflict` (the branch has zero models).
inline PropagationResult condition_and_propagate(const CnfFormula& f,
                                                 std::optional<Literal> literal = std::nullopt) {
  PropagationResult out;
  out.residual.num_vars = f.num_vars;
  std::vector<int> value(static_cast<std::size_t>(f.num_vars) + 1, 0);  // 0 unknown, +1 true, -1 false
  if (literal) {
    if (literal->var < 1 || literal->var > f.num_vars)
      throw ValidationError("literal variable out of range");
    value[static_cast<std::size_t>(literal->var)] = literal->positive ? 1 : -1;
  }
  std::vector<Clause> clauses = f.clauses;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Clause> next;
    next.reserve(clauses.size());
    for (const Clause& c : clauses) {
      Clause reduced;
      bool satisfied = false;
      for (const Literal& l : c) {
        int v = value[static_cast<std::size_t>(l.var)];
        if (v == 0) {
          reduced.push_back(l);
        } else if ((v > 0) == l.positive) {
          satisfied = true;
          break;
        }
      }
      if (satisfied) continue;
      if (reduced.empty()) {
        out.conflict = true;
        out.residual.clauses = std::move(next);
        return out;
      }
      if (reduced.size() == 1) {
        const Literal& u = reduced.front();
        value[static_cast<std::size_t>(u.var)] = u.positive ? 1 : -1;
        out.implied.push_back(u);
        changed = true;
        continue;
      }
      next.push_back(std::move(reduced));
    }
    clauses = std::move(next);
  }
  out.residual.clauses = std::move(clauses);
  return out;
}

/// Exact model count by full enumeration. The testing oracle; limited to 26
/// variables.
inline long long brute_force_count(const CnfFormula& f) {
  if (f.num_vars > 26) throw BudgetError("brute-force counting is limited to 26 variables");
  for (const Clause& c : f.clauses)
    if (c.empty()) return 0;
  std::vector<std::uint32_t> pos(f.clauses.size(), 0), neg(f.clauses.size(), 0);
  for (std::size_t i = 0; i < f.clauses.size(); ++i)
    for (const Literal& l : f.clauses[i]) {
      if (l.positive)
        pos[i] |= 1u << (l.var - 1);
      else
        neg[i] |= 1u << (l.var - 1);
    }
  long long count = 0;
  std::uint32_t limit_bits = f.num_vars;
  for (std::uint64_t a = 0; a < (1ull << limit_bits); ++a) {
    bool ok = true;
    for (std::size_t i = 0; i < f.clauses.size() && ok; ++i)
      ok = (static_cast<std::uint32_t>(a) & pos[i]) != 0 || (~static_cast<std::uint32_t>(a) & neg[i]) != 0;
    count += ok;
  }
  return count;
}

namespace detail {

using IntClauses = std::vector<std::vector<int>>;

inline std::vector<int> clause_set_key(const IntClauses& cs) {
  IntClauses sorted = cs;
  for (auto& c : sorted) std::sort(c.begin(), c.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> key;
  for (const auto& c : sorted) {
    for (int l : c) key.push_back(l);
    key.push_back(0);
  }
  return key;
}

inline int count_distinct_vars(const IntClauses& cs) {
  std::set<int> vars;
  for (const auto& c : cs)
    for (int l : c) vars.insert(l < 0 ? -l : l);
  return static_cast<int>(vars.size());
}

// Removes satisfied clauses and falsified literals for v := value.
// Returns nullopt on a derived empty clause.
inline std::optional<IntClauses> condition_int(const IntClauses& cs, int v, bool value) {
  IntClauses out;
  out.reserve(cs.size());
  for (const auto& c : cs) {
    std::vector<int> reduced;
    bool satisfied = false;
    for (int l : c) {
      if (l == v || l == -v) {
        if ((l > 0) == value) {
          satisfied = true;
          break;
        }
        continue;
      }
      reduced.push_back(l);
    }
    if (satisfied) continue;
    if (reduced.empty()) return std::nullopt;
    out.push_back(std::move(reduced));
  }
  return out;
}

/// DPLL-style counting over exactly the variables occurring in `cs`:
/// unit propagation, connected-component product decomposition, branching on
/// a most-occurring variable, with a component cache.
inline mpz_class count_occurring(IntClauses cs, std::map<std::vector<int>, mpz_class>& cache) {
  if (cs.empty()) return 1;
  for (const auto& c : cs)
    if (c.empty()) return 0;
  std::vector<int> key = clause_set_key(cs);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  int vars_before = count_distinct_vars(cs);

  // unit propagation
  int fixed = 0;
  bool conflict = false;
  while (true) {
    int unit = 0;
    for (const auto& c : cs)
      if (c.size() == 1) {
        unit = c.front();
        break;
      }
    if (unit == 0) break;
    ++fixed;
    auto next = condition_int(cs, unit < 0 ? -unit : unit, unit > 0);
    if (!next) {
      conflict = true;
      break;
    }
    cs = std::move(*next);
  }
  mpz_class result = 0;
  if (!conflict) {
    if (fixed > 0) {
      int freed = vars_before - fixed - count_distinct_vars(cs);
      result = count_occurring(std::move(cs), cache) << freed;
    } else {
      // connected components over shared variables
      std::map<int, int> comp_of_var;
      std::vector<int> parent(cs.size());
      for (std::size_t i = 0; i < cs.size(); ++i) parent[i] = static_cast<int>(i);
      std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
        return x;
      };
      for (std::size_t i = 0; i < cs.size(); ++i)
        for (int l : cs[i]) {
          int v = l < 0 ? -l : l;
          auto [it, fresh] = comp_of_var.emplace(v, static_cast<int>(i));
          if (!fresh) parent[static_cast<std::size_t>(find(static_cast<int>(i)))] = find(it->second);
        }
      std::map<int, IntClauses> comps;
      for (std::size_t i = 0; i < cs.size(); ++i) comps[find(static_cast<int>(i))].push_back(cs[i]);
      if (comps.size() > 1) {
        result = 1;
        for (auto& [root, comp] : comps) result *= count_occurring(std::move(comp), cache);
      } else {
        // branch on the most frequent variable, ties to the smallest index
        std::map<int, int> freq;
        for (const auto& c : cs)
          for (int l : c) ++freq[l < 0 ? -l : l];
        int best = 0, best_n = -1;
        for (auto [v, n] : freq)
          if (n > best_n) {
            best = v;
            best_n = n;
          }
        for (bool val : {true, false}) {
          auto sub = condition_int(cs, best, val);
          if (!sub) continue;
          int freed = vars_before - 1 - count_distinct_vars(*sub);
          result += count_occurring(std::move(*sub), cache) << freed;
        }
      }
    }
  }
  cache.emplace(std::move(key), result);
  return result;
}

}  // namespace detail

/// Escape hatch replacing the internal exact counter with an external #SAT
/// executable. Contract: the formula is written to a temporary DIMACS file
/// whose path is appended to `command`; the external tool must print the
/// model count over all declared variables (free variables count twice) as a
/// decimal integer; the last all-digit token of its stdout is taken.
inline mpz_class external_count(const CnfFormula& f, const std::string& command) {
  std::string path = "/tmp/cbp_external_" + std::to_string(::getpid()) + ".cnf";
  {
    std::ofstream out(path);
    if (!out) throw Error("cannot write temporary DIMACS file " + path);
    out << write_dimacs(f);
  }
  std::string cmd = command + " " + path + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error("cannot launch external counter: " + command);
  std::string output;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) output.append(buf, n);
  int status = ::pclose(pipe);
  std::remove(path.c_str());
  if (status != 0) throw Error("external counter exited with status " + std::to_string(status));
  std::istringstream lines(output);
  std::string line, last_count;
  while (std::getline(lines, line)) {
    std::istringstream toks(line);
    std::string tok;
    while (toks >> tok) {
      if (!tok.empty() && tok.find_first_not_of("0123456789") == std::string::npos) last_count = tok;
    }
  }
  if (last_count.empty()) throw Error("external counter produced no count: " + output);
  return mpz_class(last_count);
}

/// Exact model count over all `num_vars` variables via recursive counting
/// (unit propagation, component decomposition, branching). `budget` bounds
/// the number of distinct variables occurring in clauses.
inline mpz_class exact_count(const CnfFormula& f, int budget = 64) {
  for (const Clause& c : f.clauses)
    if (c.empty()) return 0;
  // The budget applies after simplification: unit-propagate first.
  PropagationResult pr = condition_and_propagate(f);
  if (pr.conflict) return 0;
  detail::IntClauses cs;
  cs.reserve(pr.residual.clauses.size());
  for (const Clause& c : pr.residual.clauses) {
    std::vector<int> ic;
    for (const Literal& l : c) ic.push_back(l.encode());
    cs.push_back(std::move(ic));
  }
  int occ = detail::count_distinct_vars(cs);
  if (occ > budget)
    throw BudgetError("exact counter called with " + std::to_string(occ) +
                      " occurring variables after simplification (budget " +
                      std::to_string(budget) + "); fix more variables first");
  std::map<std::vector<int>, mpz_class> cache;
  mpz_class core = detail::count_occurring(std::move(cs), cache);
  return core << (f.num_vars - static_cast<int>(pr.implied.size()) - occ);
}

}  // namespace cbp
