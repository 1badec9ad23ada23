#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cbp/errors.hpp"

namespace cbp {

using VarId = int;
using FactorId = int;
using State = int;

/// A discrete random variable. Ids are dense 0..n-1 within a graph.
struct Variable {
  VarId id = 0;
  int cardinality = 2;
  std::string label;
};

/// Dense non-negative table over a sequence of discrete arguments.
/// Row-major with argument 0 as the most significant index, so for
/// cardinalities (2,3) the value order is (0,0),(0,1),(0,2),(1,0),(1,1),(1,2).
class Potential {
 public:
  Potential() = default;
  Potential(std::vector<int> cardinalities, std::vector<double> values)
      : cards_(std::move(cardinalities)), values_(std::move(values)) {
    std::size_t expect = 1;
    for (int c : cards_) {
      if (c < 1) throw ValidationError("potential cardinality must be >= 1");
      expect *= static_cast<std::size_t>(c);
    }
    if (values_.size() != expect)
      throw ValidationError("potential has " + std::to_string(values_.size()) +
                            " values, expected " + std::to_string(expect));
    bool any_positive = false;
    for (double& v : values_) {
      if (!(v >= 0.0)) throw ValidationError("potential entries must be non-negative");
      if (v == 0.0) v = 0.0;  // collapse -0.0
      any_positive |= v > 0.0;
    }
    if (!any_positive) throw ValidationError("potential must have at least one positive entry");
    strides_.resize(cards_.size());
    std::size_t s = 1;
    for (int i = static_cast<int>(cards_.size()) - 1; i >= 0; --i) {
      strides_[static_cast<std::size_t>(i)] = s;
      s *= static_cast<std::size_t>(cards_[static_cast<std::size_t>(i)]);
    }
  }

  int arity() const { return static_cast<int>(cards_.size()); }
  const std::vector<int>& cardinalities() const { return cards_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t flat) const { return values_[flat]; }

  /// State of argument `pos` in the flat index `flat`.
  State state_at(std::size_t flat, int pos) const {
    return static_cast<State>((flat / strides_[static_cast<std::size_t>(pos)]) %
                              static_cast<std::size_t>(cards_[static_cast<std::size_t>(pos)]));
  }

  std::size_t flat_index(std::span<const State> states) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < cards_.size(); ++i)
      idx = idx * static_cast<std::size_t>(cards_[i]) + static_cast<std::size_t>(states[i]);
    return idx;
  }

  void set(std::size_t flat, double v) { values_[flat] = v; }

  bool all_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }

  /// Table with arguments reordered so new position i holds old position perm[i].
  Potential permuted(std::span<const int> perm) const {
    std::vector<int> cards(cards_.size());
    for (std::size_t i = 0; i < cards_.size(); ++i)
      cards[i] = cards_[static_cast<std::size_t>(perm[i])];
    Potential out(std::move(cards), std::vector<double>(values_.size(), 1.0));
    std::vector<State> st(cards_.size());
    for (std::size_t flat = 0; flat < values_.size(); ++flat) {
      for (std::size_t i = 0; i < cards_.size(); ++i)
        st[i] = state_at(flat, perm[i]);
      out.values_[out.flat_index(st)] = values_[flat];
    }
    return out;
  }

  friend bool operator==(const Potential& a, const Potential& b) {
    return a.cards_ == b.cards_ && a.values_ == b.values_;
  }

 private:
  std::vector<int> cards_;
  std::vector<double> values_;
  std::vector<std::size_t> strides_;
};

/// A factor: ordered argument list plus its potential table. Repeated
/// arguments are rejected at graph construction.
struct Factor {
  FactorId id = 0;
  std::vector<VarId> args;
  Potential table;
};

/// One (factor, argument position) incidence of a variable.
struct AdjEntry {
  FactorId factor;
  int position;
  friend bool operator==(const AdjEntry&, const AdjEntry&) = default;
};

/// Observed states, keyed by variable id. Ordered map so iteration is stable.
using Evidence = std::map<VarId, State>;

/// Immutable bipartite graph of variables and factors. Construction validates
/// all invariants; a built graph is safe to share across concurrent runs.
class FactorGraph {
 public:
  FactorGraph() = default;

  static FactorGraph build(std::vector<Variable> variables, std::vector<Factor> factors) {
    FactorGraph g;
    g.vars_ = std::move(variables);
    g.factors_ = std::move(factors);
    for (std::size_t i = 0; i < g.vars_.size(); ++i) {
      const Variable& v = g.vars_[i];
      if (v.id != static_cast<VarId>(i))
        throw ValidationError("variable ids must be dense 0..n-1");
      if (v.cardinality < 2)
        throw ValidationError("variable " + std::to_string(v.id) + " has cardinality < 2");
    }
    g.adj_.assign(g.vars_.size(), {});
    for (std::size_t k = 0; k < g.factors_.size(); ++k) {
      Factor& f = g.factors_[k];
      if (f.id != static_cast<FactorId>(k))
        throw ValidationError("factor ids must be dense 0..m-1");
      if (f.table.arity() != static_cast<int>(f.args.size()))
        throw ValidationError("factor " + std::to_string(f.id) +
                              ": table arity does not match argument count");
      std::unordered_set<VarId> seen;
      for (std::size_t p = 0; p < f.args.size(); ++p) {
        VarId a = f.args[p];
        if (a < 0 || a >= static_cast<VarId>(g.vars_.size()))
          throw ValidationError("factor " + std::to_string(f.id) + ": unknown variable id " +
                                std::to_string(a));
        if (!seen.insert(a).second)
          throw ValidationError("factor " + std::to_string(f.id) + ": repeated argument " +
                                std::to_string(a));
        if (f.table.cardinalities()[p] != g.vars_[static_cast<std::size_t>(a)].cardinality)
          throw ValidationError("factor " + std::to_string(f.id) + ": table dimension " +
                                std::to_string(p) + " does not match cardinality of variable " +
                                std::to_string(a));
        g.adj_[static_cast<std::size_t>(a)].push_back(
            {f.id, static_cast<int>(p)});
      }
    }
    return g;
  }

  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_factors() const { return static_cast<int>(factors_.size()); }

  const Variable& variable(VarId v) const { return vars_.at(static_cast<std::size_t>(v)); }
  const Factor& factor(FactorId f) const { return factors_.at(static_cast<std::size_t>(f)); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Factor>& factors() const { return factors_; }

  /// Incidences of a variable, in factor construction order.
  const std::vector<AdjEntry>& neighbors(VarId v) const {
    if (v < 0 || v >= num_variables()) throw ValidationError("unknown variable id " + std::to_string(v));
    return adj_[static_cast<std::size_t>(v)];
  }

  /// Ordered argument list of a factor.
  const std::vector<VarId>& factor_args(FactorId f) const {
    if (f < 0 || f >= num_factors()) throw ValidationError("unknown factor id " + std::to_string(f));
    return factors_[static_cast<std::size_t>(f)].args;
  }

  /// Total number of (variable, factor) incidences: the undirected edge count.
  long long edge_count() const {
    long long e = 0;
    for (const Factor& f : factors_) e += static_cast<long long>(f.args.size());
    return e;
  }

  void check_evidence(const Evidence& ev) const {
    for (auto [v, s] : ev) {
      if (v < 0 || v >= num_variables())
        throw ValidationError("evidence references unknown variable " + std::to_string(v));
      if (s < 0 || s >= variable(v).cardinality)
        throw ValidationError("evidence state " + std::to_string(s) +
                              " out of range for variable " + std::to_string(v));
    }
  }

 private:
  std::vector<Variable> vars_;
  std::vector<Factor> factors_;
  std::vector<std::vector<AdjEntry>> adj_;
};

/// Returns a copy of `g` in which every factor touching an observed variable
/// has the rows inconsistent with the observation set to zero. Structure and
/// variables are unchanged. Idempotent.
inline FactorGraph apply_evidence(const FactorGraph& g, const Evidence& ev) {
  g.check_evidence(ev);
  if (ev.empty()) return g;
  std::vector<Factor> factors = g.factors();
  for (Factor& f : factors) {
    for (std::size_t p = 0; p < f.args.size(); ++p) {
      auto it = ev.find(f.args[p]);
      if (it == ev.end()) continue;
      for (std::size_t flat = 0; flat < f.table.size(); ++flat)
        if (f.table.state_at(flat, static_cast<int>(p)) != it->second) f.table.set(flat, 0.0);
    }
  }
  // All-zero tables are legal here; they are diagnosed at inference start.
  return FactorGraph::build(g.variables(), std::move(factors));
}

}  // namespace cbp
