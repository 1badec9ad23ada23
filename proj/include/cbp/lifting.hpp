#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbp/factor_graph.hpp"

namespace cbp {

/// How argument positions enter signatures and compressed edges.
///  - Unpositioned: node signatures carry no position information, factor
///    signatures use argument order verbatim. Can over-group on asymmetric
///    tables; construction then fails the count-uniformity check.
///  - Positional: every position is tracked separately. Sound for arbitrary
///    potentials, but misses groupings that rely on argument symmetry.
///  - Commutative: positions are merged within the table's provable symmetry
///    classes (argument swaps that leave the table invariant, e.g. the
///    same-polarity literals of a clause). Degenerates to Positional for
///    asymmetric tables. This is the default.
enum class PositionMode { Unpositioned, Positional, Commutative };

inline const char* to_string(PositionMode m) {
  switch (m) {
    case PositionMode::Unpositioned: return "unpositioned";
    case PositionMode::Positional: return "positional";
    case PositionMode::Commutative: return "commutative";
  }
  return "?";
}

/// Dense colors for every variable and factor of a graph.
struct ColorState {
  std::vector<int> variable_colors;
  std::vector<int> factor_colors;
  int num_variable_colors = 0;
  int num_factor_colors = 0;
};

struct ClusterNode {
  int color = 0;
  std::vector<VarId> members;  // sorted ascending
  VarId representative = 0;    // min member
  int cardinality = 2;
  std::optional<State> evidence;
};

/// One compressed edge: clusterfactor -> clusternode through a class of
/// interchangeable argument positions. `count` is the number of identical
/// ground messages each member of the clusternode receives through this edge.
struct ClusterEdge {
  int factor = 0;
  int klass = 0;  // class index within the clusterfactor
  int node = 0;
  long long count = 0;
  long long ground_incidences = 0;  // |members| * |positions in class|
};

struct ClusterFactor {
  int color = 0;
  std::vector<FactorId> members;  // sorted ascending
  Potential table;                // representative potential (canonical argument order)
  std::vector<VarId> representative_args;  // original args of the min-id member
  std::vector<int> pos_node;               // canonical position -> clusternode index
  std::vector<int> pos_class;              // canonical position -> class index
  std::vector<std::vector<int>> classes;   // class -> canonical positions
  std::vector<int> class_edge;             // class -> edge index
};

struct CompressedFactorGraph {
  PositionMode mode = PositionMode::Commutative;
  std::vector<ClusterNode> nodes;
  std::vector<ClusterFactor> factors;
  std::vector<ClusterEdge> edges;
  std::vector<std::vector<int>> node_edges;  // per clusternode: incident edge indices
  long long ground_variables = 0;
  long long ground_factors = 0;
  long long ground_edges = 0;
  int rounds = 0;  // refinement rounds until the partition stabilized
};

struct CompressionStats {
  long long variables = 0, clusternodes = 0;
  long long factors = 0, clusterfactors = 0;
  long long edges = 0, compressed_edges = 0;
  double node_ratio = 1.0, factor_ratio = 1.0, edge_ratio = 1.0;
};

namespace detail {

/// Partition of table positions into argument-swap symmetry classes: p and q
/// share a class when exchanging them leaves the table element-wise invariant.
inline std::vector<int> table_symmetry_classes(const Potential& t) {
  int k = t.arity();
  std::vector<int> parent(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  std::vector<State> st(static_cast<std::size_t>(k));
  for (int p = 0; p < k; ++p) {
    for (int q = p + 1; q < k; ++q) {
      if (t.cardinalities()[static_cast<std::size_t>(p)] != t.cardinalities()[static_cast<std::size_t>(q)])
        continue;
      if (find(p) == find(q)) continue;
      bool invariant = true;
      for (std::size_t flat = 0; flat < t.size() && invariant; ++flat) {
        for (int i = 0; i < k; ++i) st[static_cast<std::size_t>(i)] = t.state_at(flat, i);
        std::swap(st[static_cast<std::size_t>(p)], st[static_cast<std::size_t>(q)]);
        invariant = t[flat] == t[t.flat_index(st)];
      }
      if (invariant) parent[static_cast<std::size_t>(find(q))] = find(p);
    }
  }
  std::vector<int> klass(static_cast<std::size_t>(k));
  std::map<int, int> dense;
  for (int p = 0; p < k; ++p) {
    int root = find(p);
    auto [it, fresh] = dense.emplace(root, static_cast<int>(dense.size()));
    (void)fresh;
    klass[static_cast<std::size_t>(p)] = it->second;
  }
  return klass;
}

/// Canonical argument order for Commutative grouping: stable sort of positions
/// by (cardinality, table bytes with that position rotated to front). Clause
/// tables end up sorted by literal polarity; fully symmetric tables keep the
/// original order.
inline std::vector<int> canonical_permutation(const Potential& t) {
  int k = t.arity();
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
  if (k <= 1) return perm;
  std::vector<std::vector<double>> fingerprint(static_cast<std::size_t>(k));
  for (int p = 0; p < k; ++p) {
    std::vector<int> rot;
    rot.push_back(p);
    for (int q = 0; q < k; ++q)
      if (q != p) rot.push_back(q);
    fingerprint[static_cast<std::size_t>(p)] = t.permuted(rot).values();
  }
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    int ca = t.cardinalities()[static_cast<std::size_t>(a)];
    int cb = t.cardinalities()[static_cast<std::size_t>(b)];
    if (ca != cb) return ca < cb;
    return fingerprint[static_cast<std::size_t>(a)] < fingerprint[static_cast<std::size_t>(b)];
  });
  return perm;
}

inline std::vector<long long> table_key(const Potential& t) {
  std::vector<long long> key;
  key.push_back(t.arity());
  for (int c : t.cardinalities()) key.push_back(c);
  for (double v : t.values()) key.push_back(static_cast<long long>(std::bit_cast<std::uint64_t>(v)));
  return key;
}

/// Structure the refinement rounds run on. Shared between ground graphs and
/// the count-weighted quotient used by the idempotence check.
struct RefineInput {
  struct Pos {
    int node;
    int tag;
  };
  struct Inc {
    int factor;
    int tag;
    long long mult;
  };
  std::vector<int> node_init;
  std::vector<int> factor_init;
  std::vector<std::vector<Pos>> factor_pos;  // per factor, by position
  std::vector<std::vector<Inc>> node_inc;    // per node
  bool sort_within_tag = false;              // Commutative factor signatures
  bool node_tags = true;                     // false for Unpositioned
  int num_node_init = 0;
  int num_factor_init = 0;
};

inline ColorState refine_round(const RefineInput& in, const ColorState& cur) {
  ColorState next;
  // Factor pass: own color, then neighbor colors in argument order, sorted
  // within equal-tag runs when commutative grouping is on.
  std::map<std::vector<long long>, std::vector<int>> factor_groups;
  for (std::size_t f = 0; f < in.factor_pos.size(); ++f) {
    const auto& pos = in.factor_pos[f];
    std::vector<long long> sig;
    sig.reserve(pos.size() + 1);
    sig.push_back(cur.factor_colors[f]);
    if (in.sort_within_tag) {
      std::map<int, std::vector<int>> by_tag;
      for (const auto& p : pos) by_tag[p.tag].push_back(cur.variable_colors[static_cast<std::size_t>(p.node)]);
      for (auto& [tag, colors] : by_tag) {
        std::sort(colors.begin(), colors.end());
        sig.push_back(tag);
        for (int c : colors) sig.push_back(c);
      }
    } else {
      for (const auto& p : pos) sig.push_back(cur.variable_colors[static_cast<std::size_t>(p.node)]);
    }
    factor_groups[std::move(sig)].push_back(static_cast<int>(f));
  }
  next.factor_colors.resize(in.factor_pos.size());
  int fc = 0;
  for (const auto& [sig, members] : factor_groups) {
    for (int f : members) next.factor_colors[static_cast<std::size_t>(f)] = fc;
    ++fc;
  }
  next.num_factor_colors = fc;

  // Node pass: own color plus the multiset of incoming (factor color, tag)
  // entries, run-length encoded.
  std::map<std::vector<long long>, std::vector<int>> node_groups;
  for (std::size_t v = 0; v < in.node_inc.size(); ++v) {
    std::vector<std::tuple<int, int, long long>> entries;
    entries.reserve(in.node_inc[v].size());
    for (const auto& inc : in.node_inc[v])
      entries.emplace_back(next.factor_colors[static_cast<std::size_t>(inc.factor)],
                           in.node_tags ? inc.tag : 0, inc.mult);
    std::sort(entries.begin(), entries.end());
    std::vector<long long> sig;
    sig.push_back(cur.variable_colors[v]);
    for (std::size_t i = 0; i < entries.size();) {
      auto [color, tag, mult] = entries[i];
      std::size_t j = i + 1;
      while (j < entries.size() && std::get<0>(entries[j]) == color && std::get<1>(entries[j]) == tag)
        mult += std::get<2>(entries[j++]);
      sig.push_back(color);
      sig.push_back(tag);
      sig.push_back(mult);
      i = j;
    }
    node_groups[std::move(sig)].push_back(static_cast<int>(v));
  }
  next.variable_colors.resize(in.node_inc.size());
  int vc = 0;
  for (const auto& [sig, members] : node_groups) {
    for (int v : members) next.variable_colors[static_cast<std::size_t>(v)] = vc;
    ++vc;
  }
  next.num_variable_colors = vc;
  return next;
}

inline std::pair<ColorState, int> refine_to_fixpoint(const RefineInput& in, ColorState colors,
                                                     int round_limit) {
  int rounds = 0;
  while (rounds < round_limit) {
    ColorState next = refine_round(in, colors);
    ++rounds;
    bool stable = next.num_variable_colors == colors.num_variable_colors &&
                  next.num_factor_colors == colors.num_factor_colors;
    colors = std::move(next);
    if (stable) break;
  }
  return {std::move(colors), rounds};
}

}  // namespace detail

/// Color passing over one evidence-conditioned graph. Holds the canonical
/// argument orders and symmetry classes the signatures are built from.
class ColorPassing {
 public:
  ColorPassing(const FactorGraph& graph, const Evidence& evidence,
               PositionMode mode = PositionMode::Commutative)
      : graph_(apply_evidence(graph, evidence)), evidence_(evidence), mode_(mode) {
    int nf = graph_.num_factors();
    perm_.resize(static_cast<std::size_t>(nf));
    canon_.resize(static_cast<std::size_t>(nf));
    klass_.resize(static_cast<std::size_t>(nf));
    for (FactorId f = 0; f < nf; ++f) {
      const Potential& raw = graph_.factor(f).table;
      if (mode_ == PositionMode::Commutative) {
        perm_[static_cast<std::size_t>(f)] = detail::canonical_permutation(raw);
        canon_[static_cast<std::size_t>(f)] = raw.permuted(perm_[static_cast<std::size_t>(f)]);
        klass_[static_cast<std::size_t>(f)] =
            detail::table_symmetry_classes(canon_[static_cast<std::size_t>(f)]);
      } else {
        auto& p = perm_[static_cast<std::size_t>(f)];
        p.resize(static_cast<std::size_t>(raw.arity()));
        for (int i = 0; i < raw.arity(); ++i) p[static_cast<std::size_t>(i)] = i;
        canon_[static_cast<std::size_t>(f)] = raw;
        auto& kl = klass_[static_cast<std::size_t>(f)];
        kl.resize(static_cast<std::size_t>(raw.arity()));
        for (int i = 0; i < raw.arity(); ++i) kl[static_cast<std::size_t>(i)] = i;
      }
    }
    build_input();
    initial_ = compute_initial();
  }

  const FactorGraph& conditioned_graph() const { return graph_; }
  PositionMode mode() const { return mode_; }
  const ColorState& initial() const { return initial_; }

  ColorState refine_once(const ColorState& colors) const { return detail::refine_round(input_, colors); }

  /// Runs refinement to its fixpoint and assembles the compressed graph,
  /// verifying member-table identity and count uniformity.
  CompressedFactorGraph compress() const {
    int limit = graph_.num_variables() + graph_.num_factors() + 1;
    auto [colors, rounds] = detail::refine_to_fixpoint(input_, initial_, limit);
    return assemble(colors, rounds);
  }

  /// Canonical argument order of factor `f` (canonical position -> original).
  const std::vector<int>& canonical_order(FactorId f) const { return perm_[static_cast<std::size_t>(f)]; }

 private:
  void build_input() {
    input_.sort_within_tag = mode_ == PositionMode::Commutative;
    input_.node_tags = mode_ != PositionMode::Unpositioned;
    input_.factor_pos.resize(static_cast<std::size_t>(graph_.num_factors()));
    input_.node_inc.resize(static_cast<std::size_t>(graph_.num_variables()));
    for (FactorId f = 0; f < graph_.num_factors(); ++f) {
      const auto& args = graph_.factor_args(f);
      auto& pos = input_.factor_pos[static_cast<std::size_t>(f)];
      for (std::size_t p = 0; p < args.size(); ++p) {
        VarId v = args[perm_[static_cast<std::size_t>(f)][p]];
        int tag = klass_[static_cast<std::size_t>(f)][p];
        pos.push_back({v, tag});
        input_.node_inc[static_cast<std::size_t>(v)].push_back({f, tag, 1});
      }
    }
  }

  ColorState compute_initial() const {
    ColorState cs;
    // Variables: grouped by (cardinality, observed state or "unknown").
    std::map<std::pair<int, int>, std::vector<VarId>> var_groups;
    for (VarId v = 0; v < graph_.num_variables(); ++v) {
      auto it = evidence_.find(v);
      int ev = it == evidence_.end() ? 0 : 1 + it->second;
      var_groups[{graph_.variable(v).cardinality, ev}].push_back(v);
    }
    cs.variable_colors.resize(static_cast<std::size_t>(graph_.num_variables()));
    for (const auto& [key, members] : var_groups) {
      for (VarId v : members) cs.variable_colors[static_cast<std::size_t>(v)] = cs.num_variable_colors;
      ++cs.num_variable_colors;
    }
    // Factors: grouped by the exact value sequence of the conditioned table
    // (canonical argument order in Commutative mode).
    std::map<std::vector<long long>, std::vector<FactorId>> factor_groups;
    for (FactorId f = 0; f < graph_.num_factors(); ++f)
      factor_groups[detail::table_key(canon_[static_cast<std::size_t>(f)])].push_back(f);
    cs.factor_colors.resize(static_cast<std::size_t>(graph_.num_factors()));
    for (const auto& [key, members] : factor_groups) {
      for (FactorId f : members) cs.factor_colors[static_cast<std::size_t>(f)] = cs.num_factor_colors;
      ++cs.num_factor_colors;
    }
    return cs;
  }

  CompressedFactorGraph assemble(const ColorState& colors, int rounds) const {
    CompressedFactorGraph cg;
    cg.mode = mode_;
    cg.rounds = rounds;
    cg.ground_variables = graph_.num_variables();
    cg.ground_factors = graph_.num_factors();
    cg.ground_edges = graph_.edge_count();

    cg.nodes.resize(static_cast<std::size_t>(colors.num_variable_colors));
    std::vector<int> node_of_var(static_cast<std::size_t>(graph_.num_variables()));
    for (VarId v = 0; v < graph_.num_variables(); ++v) {
      int c = colors.variable_colors[static_cast<std::size_t>(v)];
      node_of_var[static_cast<std::size_t>(v)] = c;
      cg.nodes[static_cast<std::size_t>(c)].members.push_back(v);
    }
    for (std::size_t c = 0; c < cg.nodes.size(); ++c) {
      ClusterNode& n = cg.nodes[c];
      n.color = static_cast<int>(c);
      n.representative = n.members.front();
      n.cardinality = graph_.variable(n.representative).cardinality;
      auto it = evidence_.find(n.representative);
      if (it != evidence_.end()) n.evidence = it->second;
      for (VarId v : n.members) {
        if (graph_.variable(v).cardinality != n.cardinality)
          throw ValidationError("clusternode mixes cardinalities");
        auto jt = evidence_.find(v);
        std::optional<State> ev = jt == evidence_.end() ? std::nullopt : std::optional<State>(jt->second);
        if (ev != n.evidence) throw ValidationError("clusternode mixes evidence classes");
      }
    }

    cg.factors.resize(static_cast<std::size_t>(colors.num_factor_colors));
    for (FactorId f = 0; f < graph_.num_factors(); ++f)
      cg.factors[static_cast<std::size_t>(colors.factor_colors[static_cast<std::size_t>(f)])]
          .members.push_back(f);

    for (std::size_t ci = 0; ci < cg.factors.size(); ++ci) {
      ClusterFactor& cf = cg.factors[ci];
      cf.color = static_cast<int>(ci);
      FactorId rep = cf.members.front();
      cf.table = canon_[static_cast<std::size_t>(rep)];
      cf.representative_args = graph_.factor(rep).args;
      int arity = cf.table.arity();

      for (FactorId g : cf.members)
        if (!(canon_[static_cast<std::size_t>(g)] == cf.table))
          throw ValidationError("clusterfactor members have different potentials");

      // Wiring of every member in canonical position order, reassigned within
      // symmetry classes so position-wise cluster targets line up.
      std::vector<std::vector<VarId>> member_arg(cf.members.size(),
                                                 std::vector<VarId>(static_cast<std::size_t>(arity)));
      for (std::size_t mi = 0; mi < cf.members.size(); ++mi) {
        FactorId g = cf.members[mi];
        const auto& args = graph_.factor_args(g);
        for (int p = 0; p < arity; ++p)
          member_arg[mi][static_cast<std::size_t>(p)] =
              args[static_cast<std::size_t>(perm_[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)])];
      }
      const auto& rep_klass = klass_[static_cast<std::size_t>(rep)];
      if (mode_ == PositionMode::Commutative) {
        std::map<int, std::vector<int>> by_class;
        for (int p = 0; p < arity; ++p) by_class[rep_klass[static_cast<std::size_t>(p)]].push_back(p);
        for (auto& [tag, positions] : by_class) {
          if (positions.size() < 2) continue;
          std::vector<int> slots = positions;  // representative's wiring stays put
          std::stable_sort(slots.begin(), slots.end(), [&](int a, int b) {
            return node_of_var[static_cast<std::size_t>(member_arg[0][static_cast<std::size_t>(a)])] <
                   node_of_var[static_cast<std::size_t>(member_arg[0][static_cast<std::size_t>(b)])];
          });
          for (std::size_t mi = 1; mi < cf.members.size(); ++mi) {
            std::vector<VarId> vals;
            for (int p : positions) vals.push_back(member_arg[mi][static_cast<std::size_t>(p)]);
            std::stable_sort(vals.begin(), vals.end(), [&](VarId a, VarId b) {
              auto ka = std::make_pair(node_of_var[static_cast<std::size_t>(a)], a);
              auto kb = std::make_pair(node_of_var[static_cast<std::size_t>(b)], b);
              return ka < kb;
            });
            for (std::size_t i = 0; i < slots.size(); ++i)
              member_arg[mi][static_cast<std::size_t>(slots[i])] = vals[i];
          }
        }
      }

      cf.pos_node.resize(static_cast<std::size_t>(arity));
      for (int p = 0; p < arity; ++p) {
        int target = node_of_var[static_cast<std::size_t>(member_arg[0][static_cast<std::size_t>(p)])];
        cf.pos_node[static_cast<std::size_t>(p)] = target;
        for (std::size_t mi = 0; mi < cf.members.size(); ++mi)
          if (node_of_var[static_cast<std::size_t>(member_arg[mi][static_cast<std::size_t>(p)])] != target)
            throw ValidationError("clusterfactor members disagree on the clusternode at position " +
                                  std::to_string(p) + " (position mode unsound for this graph)");
      }

      // Final position classes: symmetry class refined by target clusternode.
      std::map<std::pair<int, int>, std::vector<int>> final_classes;
      for (int p = 0; p < arity; ++p)
        final_classes[{rep_klass[static_cast<std::size_t>(p)], cf.pos_node[static_cast<std::size_t>(p)]}]
            .push_back(p);
      std::vector<std::vector<int>> ordered;
      for (const auto& [key, positions] : final_classes) ordered.push_back(positions);
      std::sort(ordered.begin(), ordered.end(),
                [](const auto& a, const auto& b) { return a.front() < b.front(); });
      cf.classes = std::move(ordered);
      cf.pos_class.resize(static_cast<std::size_t>(arity));
      cf.class_edge.assign(cf.classes.size(), -1);
      for (std::size_t k = 0; k < cf.classes.size(); ++k)
        for (int p : cf.classes[k]) cf.pos_class[static_cast<std::size_t>(p)] = static_cast<int>(k);

      for (std::size_t k = 0; k < cf.classes.size(); ++k) {
        int target = cf.pos_node[static_cast<std::size_t>(cf.classes[k].front())];
        const ClusterNode& tn = cg.nodes[static_cast<std::size_t>(target)];
        std::map<VarId, long long> tally;
        for (std::size_t mi = 0; mi < cf.members.size(); ++mi)
          for (int p : cf.classes[k]) ++tally[member_arg[mi][static_cast<std::size_t>(p)]];
        if (tally.size() != tn.members.size())
          throw ValidationError("count-uniformity violation: some members of a clusternode receive "
                                "no message on a compressed edge (position mode unsound)");
        long long count = tally.begin()->second;
        for (const auto& [var, c] : tally)
          if (c != count)
            throw ValidationError("count-uniformity violation on clusterfactor " + std::to_string(ci) +
                                  " (position mode unsound for this graph)");
        ClusterEdge e;
        e.factor = static_cast<int>(ci);
        e.klass = static_cast<int>(k);
        e.node = target;
        e.count = count;
        e.ground_incidences =
            static_cast<long long>(cf.members.size()) * static_cast<long long>(cf.classes[k].size());
        cf.class_edge[k] = static_cast<int>(cg.edges.size());
        cg.edges.push_back(e);
      }
    }

    cg.node_edges.resize(cg.nodes.size());
    for (std::size_t e = 0; e < cg.edges.size(); ++e)
      cg.node_edges[static_cast<std::size_t>(cg.edges[e].node)].push_back(static_cast<int>(e));
    return cg;
  }

  FactorGraph graph_;
  Evidence evidence_;
  PositionMode mode_;
  std::vector<std::vector<int>> perm_;
  std::vector<Potential> canon_;
  std::vector<std::vector<int>> klass_;
  detail::RefineInput input_;
  ColorState initial_;
};

/// Initial clusters: variables by (cardinality, observed state), factors by
/// the exact value sequence of their evidence-conditioned potential.
inline ColorState initial_colors(const FactorGraph& g, const Evidence& ev,
                                 PositionMode mode = PositionMode::Commutative) {
  return ColorPassing(g, ev, mode).initial();
}

/// One signature round: factors regrouped from neighbor colors, then nodes
/// regrouped from incoming factor colors. The result refines `colors`.
inline ColorState refine_once(const FactorGraph& g, const Evidence& ev, const ColorState& colors,
                              PositionMode mode = PositionMode::Commutative) {
  return ColorPassing(g, ev, mode).refine_once(colors);
}

/// Full compression: color passing to the fixpoint, then clusternode /
/// clusterfactor / edge-count assembly.
inline CompressedFactorGraph compress(const FactorGraph& g, const Evidence& ev,
                                      PositionMode mode = PositionMode::Commutative) {
  return ColorPassing(g, ev, mode).compress();
}

inline CompressionStats compression_stats(const FactorGraph& g, const CompressedFactorGraph& cg) {
  CompressionStats s;
  s.variables = g.num_variables();
  s.clusternodes = static_cast<long long>(cg.nodes.size());
  s.factors = g.num_factors();
  s.clusterfactors = static_cast<long long>(cg.factors.size());
  s.edges = g.edge_count();
  s.compressed_edges = static_cast<long long>(cg.edges.size());
  s.node_ratio = s.variables ? static_cast<double>(s.clusternodes) / static_cast<double>(s.variables) : 1.0;
  s.factor_ratio =
      s.factors ? static_cast<double>(s.clusterfactors) / static_cast<double>(s.factors) : 1.0;
  s.edge_ratio = s.edges ? static_cast<double>(s.compressed_edges) / static_cast<double>(s.edges) : 1.0;
  return s;
}

/// Re-runs color passing on the quotient structure (clusternodes and
/// clusterfactors as plain nodes/factors, compressed-edge counts as message
/// multiplicities). A correct compression is a fixpoint: the quotient must
/// not group anything further.
struct QuotientCheck {
  bool isomorphic = false;
  int rounds = 0;
  int merged_nodes = 0;
  int merged_factors = 0;
};

inline QuotientCheck quotient_fixpoint_check(const CompressedFactorGraph& cg) {
  detail::RefineInput in;
  in.sort_within_tag = cg.mode == PositionMode::Commutative;
  in.node_tags = cg.mode != PositionMode::Unpositioned;
  in.factor_pos.resize(cg.factors.size());
  in.node_inc.resize(cg.nodes.size());
  for (std::size_t f = 0; f < cg.factors.size(); ++f) {
    const ClusterFactor& cf = cg.factors[f];
    std::vector<int> klass;
    if (cg.mode == PositionMode::Commutative) {
      klass = detail::table_symmetry_classes(cf.table);
    } else {
      klass.resize(static_cast<std::size_t>(cf.table.arity()));
      for (int p = 0; p < cf.table.arity(); ++p) klass[static_cast<std::size_t>(p)] = p;
    }
    for (int p = 0; p < cf.table.arity(); ++p)
      in.factor_pos[f].push_back({cf.pos_node[static_cast<std::size_t>(p)],
                                  klass[static_cast<std::size_t>(p)]});
    for (std::size_t k = 0; k < cf.classes.size(); ++k) {
      const ClusterEdge& e = cg.edges[static_cast<std::size_t>(cf.class_edge[k])];
      in.node_inc[static_cast<std::size_t>(e.node)].push_back(
          {static_cast<int>(f), klass[static_cast<std::size_t>(cf.classes[k].front())], e.count});
    }
  }

  ColorState init;
  std::map<std::pair<int, int>, std::vector<int>> var_groups;
  for (std::size_t v = 0; v < cg.nodes.size(); ++v)
    var_groups[{cg.nodes[v].cardinality, cg.nodes[v].evidence ? 1 + *cg.nodes[v].evidence : 0}]
        .push_back(static_cast<int>(v));
  init.variable_colors.resize(cg.nodes.size());
  for (const auto& [key, members] : var_groups) {
    for (int v : members) init.variable_colors[static_cast<std::size_t>(v)] = init.num_variable_colors;
    ++init.num_variable_colors;
  }
  std::map<std::vector<long long>, std::vector<int>> factor_groups;
  for (std::size_t f = 0; f < cg.factors.size(); ++f)
    factor_groups[detail::table_key(cg.factors[f].table)].push_back(static_cast<int>(f));
  init.factor_colors.resize(cg.factors.size());
  for (const auto& [key, members] : factor_groups) {
    for (int f : members) init.factor_colors[static_cast<std::size_t>(f)] = init.num_factor_colors;
    ++init.num_factor_colors;
  }

  int limit = static_cast<int>(cg.nodes.size() + cg.factors.size()) + 1;
  auto [colors, rounds] = detail::refine_to_fixpoint(in, init, limit);
  QuotientCheck qc;
  qc.rounds = rounds;
  qc.merged_nodes = static_cast<int>(cg.nodes.size()) - colors.num_variable_colors;
  qc.merged_factors = static_cast<int>(cg.factors.size()) - colors.num_factor_colors;
  qc.isomorphic = qc.merged_nodes == 0 && qc.merged_factors == 0;
  return qc;
}

}  // namespace cbp
