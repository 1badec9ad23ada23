#pragma once

// Test-only helpers: brute-force oracles (independent of the message-passing
// implementation) and seeded random model generators.

#include <map>
#include <set>
#include <vector>

#include "cbp/cnf.hpp"
#include "cbp/factor_graph.hpp"
#include "cbp/model_count.hpp"

namespace support {

/// Exact marginals by enumerating every joint state and multiplying factor
/// entries, normalized per variable.
inline cbp::Beliefs brute_force_marginals(const cbp::FactorGraph& graph, const cbp::Evidence& ev) {
  cbp::FactorGraph g = cbp::apply_evidence(graph, ev);
  int n = g.num_variables();
  std::vector<int> cards(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) cards[static_cast<std::size_t>(v)] = g.variable(v).cardinality;
  cbp::Beliefs acc(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v)
    acc[static_cast<std::size_t>(v)].assign(static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]), 0.0);
  std::vector<cbp::State> state(static_cast<std::size_t>(n), 0);
  while (true) {
    double w = 1.0;
    for (const cbp::Factor& f : g.factors()) {
      std::vector<cbp::State> st;
      st.reserve(f.args.size());
      for (cbp::VarId a : f.args) st.push_back(state[static_cast<std::size_t>(a)]);
      w *= f.table[f.table.flat_index(st)];
      if (w == 0.0) break;
    }
    if (w > 0.0)
      for (int v = 0; v < n; ++v)
        acc[static_cast<std::size_t>(v)][static_cast<std::size_t>(state[static_cast<std::size_t>(v)])] += w;
    int pos = n - 1;
    while (pos >= 0 && ++state[static_cast<std::size_t>(pos)] == cards[static_cast<std::size_t>(pos)])
      state[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  for (int v = 0; v < n; ++v) {
    double sum = 0.0;
    for (double x : acc[static_cast<std::size_t>(v)]) sum += x;
    if (!(sum > 0.0)) throw cbp::ContradictionError("brute force: distribution is identically zero");
    for (double& x : acc[static_cast<std::size_t>(v)]) x /= sum;
  }
  return acc;
}

inline double random_unit(cbp::Rng& rng) {
  return static_cast<double>(rng.below(1u << 30)) / static_cast<double>(1u << 30);
}

inline cbp::Potential random_potential(cbp::Rng& rng, const std::vector<int>& cards) {
  std::size_t size = 1;
  for (int c : cards) size *= static_cast<std::size_t>(c);
  std::vector<double> values(size);
  for (double& v : values) v = 0.1 + 1.9 * random_unit(rng);
  return cbp::Potential(cards, std::move(values));
}

/// Random acyclic factor graph: factors only join variables from distinct
/// components, so the bipartite graph stays a forest.
inline cbp::FactorGraph random_tree_graph(cbp::Rng& rng, int max_vars = 12, int max_card = 3,
                                          int max_arity = 3) {
  int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_vars - 1)));
  std::vector<cbp::Variable> vars;
  for (int i = 0; i < n; ++i)
    vars.push_back({i, 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_card - 1))), ""});
  std::vector<int> comp(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) comp[static_cast<std::size_t>(i)] = i;
  auto find = [&](int x) {
    while (comp[static_cast<std::size_t>(x)] != x) x = comp[static_cast<std::size_t>(x)];
    return x;
  };
  std::vector<cbp::Factor> factors;
  int attempts = 3 * n;
  while (attempts-- > 0) {
    int arity = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_arity)));
    std::vector<int> picked;
    std::set<int> roots;
    for (int tries = 0; tries < 4 * arity && static_cast<int>(picked.size()) < arity; ++tries) {
      int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      if (roots.insert(find(v)).second) picked.push_back(v);
    }
    if (picked.empty()) continue;
    if (static_cast<int>(picked.size()) > 1)
      for (std::size_t i = 1; i < picked.size(); ++i)
        comp[static_cast<std::size_t>(find(picked[i]))] = find(picked[0]);
    cbp::Factor f;
    f.id = static_cast<int>(factors.size());
    std::vector<int> cards;
    for (int v : picked) {
      f.args.push_back(v);
      cards.push_back(vars[static_cast<std::size_t>(v)].cardinality);
    }
    f.table = random_potential(rng, cards);
    factors.push_back(std::move(f));
  }
  return cbp::FactorGraph::build(std::move(vars), std::move(factors));
}

/// Random (usually loopy) factor graph. Potentials are drawn from a small
/// pool so duplicated tables force non-trivial symmetry.
inline cbp::FactorGraph random_loopy_graph(cbp::Rng& rng, int max_vars = 10, int max_card = 3,
                                           int max_arity = 3, int table_pool = 3) {
  int n = 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_vars - 2)));
  std::vector<cbp::Variable> vars;
  for (int i = 0; i < n; ++i)
    vars.push_back({i, 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_card - 1))), ""});
  int m = n + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  std::map<std::pair<std::vector<int>, int>, cbp::Potential> pool;
  std::vector<cbp::Factor> factors;
  for (int k = 0; k < m; ++k) {
    int arity = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_arity)));
    std::set<int> picked;
    for (int tries = 0; tries < 4 * arity && static_cast<int>(picked.size()) < arity; ++tries)
      picked.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
    cbp::Factor f;
    f.id = static_cast<int>(factors.size());
    std::vector<int> cards;
    for (int v : picked) {
      f.args.push_back(v);
      cards.push_back(vars[static_cast<std::size_t>(v)].cardinality);
    }
    int slot = static_cast<int>(rng.below(static_cast<std::uint64_t>(table_pool)));
    auto key = std::make_pair(cards, slot);
    auto it = pool.find(key);
    if (it == pool.end()) it = pool.emplace(key, random_potential(rng, cards)).first;
    f.table = it->second;
    factors.push_back(std::move(f));
  }
  return cbp::FactorGraph::build(std::move(vars), std::move(factors));
}

inline cbp::CnfFormula random_cnf(cbp::Rng& rng, int num_vars, int num_clauses, int width = 3) {
  cbp::CnfFormula f;
  f.num_vars = num_vars;
  for (int c = 0; c < num_clauses; ++c) {
    std::set<int> vars;
    int w = std::min(width, num_vars);
    while (static_cast<int>(vars.size()) < w)
      vars.insert(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_vars))));
    cbp::Clause clause;
    for (int v : vars) clause.push_back({v, rng.coin()});
    f.clauses.push_back(std::move(clause));
  }
  return f;
}

inline cbp::CnfFormula random_satisfiable_cnf(cbp::Rng& rng, int num_vars, int num_clauses,
                                              int width = 3) {
  while (true) {
    cbp::CnfFormula f = random_cnf(rng, num_vars, num_clauses, width);
    if (cbp::brute_force_count(f) > 0) return f;
  }
}

/// The three-variable chain with two identical symmetric pairwise factors.
inline cbp::FactorGraph chain_graph(double same = 2.0, double diff = 1.0) {
  std::vector<cbp::Variable> vars{{0, 2, "A"}, {1, 2, "B"}, {2, 2, "C"}};
  cbp::Potential pair({2, 2}, {same, diff, diff, same});
  std::vector<cbp::Factor> factors;
  factors.push_back({0, {0, 1}, pair});
  factors.push_back({1, {1, 2}, pair});
  return cbp::FactorGraph::build(std::move(vars), std::move(factors));
}

}  // namespace support
