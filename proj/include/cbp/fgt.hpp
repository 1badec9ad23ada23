#pragma once

#include <cctype>
#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "cbp/factor_graph.hpp"

namespace cbp {

// Text factor-graph format (.fgt):
//   variables <n>
//   <n cardinalities>
//   factor <arity> <arg ids...>
//   <prod(cards) values, row-major, argument 0 most significant>
// '#' starts a comment line. Tokens may be split across lines freely except
// that the writer keeps each factor's values on one line.

namespace detail {

class TokenStream {
 public:
  explicit TokenStream(std::istream& in) : in_(in) {}

  bool next(std::string& tok) {
    while (true) {
      if (pos_ >= line_.size()) {
        if (!std::getline(in_, line_)) return false;
        ++line_no_;
        pos_ = 0;
        continue;
      }
      while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      if (pos_ >= line_.size()) continue;
      if (line_[pos_] == '#') {  // comment to end of line
        pos_ = line_.size();
        continue;
      }
      std::size_t start = pos_;
      while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      tok = line_.substr(start, pos_ - start);
      return true;
    }
  }

  int line() const { return line_no_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

inline long parse_int(const std::string& tok, int line) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError("expected integer, got '" + tok + "'", line);
  return v;
}

inline double parse_real(const std::string& tok, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected number, got '" + tok + "'", line);
  }
}

}  // namespace detail

inline FactorGraph read_fgt(std::istream& in) {
  detail::TokenStream ts(in);
  std::string tok;
  if (!ts.next(tok)) throw ParseError("empty factor graph file");
  if (tok != "variables") throw ParseError("expected 'variables', got '" + tok + "'", ts.line());
  if (!ts.next(tok)) throw ParseError("missing variable count", ts.line());
  long n = detail::parse_int(tok, ts.line());
  if (n < 0) throw ParseError("negative variable count", ts.line());

  std::vector<Variable> vars;
  vars.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (!ts.next(tok)) throw ParseError("expected " + std::to_string(n) + " cardinalities", ts.line());
    long card = detail::parse_int(tok, ts.line());
    if (card < 2) throw ParseError("cardinality must be >= 2", ts.line());
    vars.push_back({static_cast<VarId>(i), static_cast<int>(card), ""});
  }

  std::vector<Factor> factors;
  while (ts.next(tok)) {
    if (tok != "factor") throw ParseError("expected 'factor', got '" + tok + "'", ts.line());
    if (!ts.next(tok)) throw ParseError("missing factor arity", ts.line());
    long arity = detail::parse_int(tok, ts.line());
    if (arity < 1) throw ParseError("factor arity must be >= 1", ts.line());
    Factor f;
    f.id = static_cast<FactorId>(factors.size());
    std::vector<int> cards;
    for (long p = 0; p < arity; ++p) {
      if (!ts.next(tok)) throw ParseError("missing factor argument", ts.line());
      long a = detail::parse_int(tok, ts.line());
      if (a < 0 || a >= n) throw ParseError("argument id " + std::to_string(a) + " out of range", ts.line());
      f.args.push_back(static_cast<VarId>(a));
      cards.push_back(vars[static_cast<std::size_t>(a)].cardinality);
    }
    std::size_t count = 1;
    for (int c : cards) count *= static_cast<std::size_t>(c);
    std::vector<double> values;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!ts.next(tok))
        throw ParseError("factor " + std::to_string(f.id) + ": expected " + std::to_string(count) +
                             " table values",
                         ts.line());
      double v = detail::parse_real(tok, ts.line());
      if (v < 0) throw ParseError("negative potential value", ts.line());
      values.push_back(v);
    }
    try {
      f.table = Potential(std::move(cards), std::move(values));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), ts.line());
    }
    factors.push_back(std::move(f));
  }
  try {
    return FactorGraph::build(std::move(vars), std::move(factors));
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
}

inline FactorGraph read_fgt(const std::string& text) {
  std::istringstream in(text);
  return read_fgt(in);
}

inline std::string format_real(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline std::string write_fgt(const FactorGraph& g) {
  std::ostringstream out;
  out << "variables " << g.num_variables() << "\n";
  for (int i = 0; i < g.num_variables(); ++i)
    out << (i ? " " : "") << g.variable(i).cardinality;
  out << "\n";
  for (const Factor& f : g.factors()) {
    out << "factor " << f.args.size();
    for (VarId a : f.args) out << " " << a;
    out << "\n";
    const auto& vals = f.table.values();
    for (std::size_t i = 0; i < vals.size(); ++i) out << (i ? " " : "") << format_real(vals[i]);
    out << "\n";
  }
  return out.str();
}

}  // namespace cbp
