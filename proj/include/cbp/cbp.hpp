#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "cbp/bp.hpp"
#include "cbp/lifting.hpp"

namespace cbp {

namespace detail {

// out[i] *= base[i]^exp, switching to log space when a component is small
// enough that direct powering could underflow. Both paths agree after the
// caller normalizes.
inline void pow_multiply(std::vector<double>& out, const std::vector<double>& base, long long exp) {
  if (exp == 0) return;
  bool tiny = false;
  for (double b : base)
    if (b > 0.0 && b < 1e-300) tiny = true;
  if (!tiny && exp <= 32) {
    for (long long r = 0; r < exp; ++r) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= base[i];
      rescale_if_tiny(out);
    }
    return;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == 0.0) continue;
    if (base[i] == 0.0) {
      out[i] = 0.0;
      continue;
    }
    double lg = std::log(out[i]) + static_cast<double>(exp) * std::log(base[i]);
    out[i] = lg < -700.0 ? 0.0 : std::exp(lg);
  }
  rescale_if_tiny(out);
}

}  // namespace detail

/// Modified BP over a compressed factor graph. Message updates follow the
/// count-exponentiated rules; with all counts 1 they coincide with plain BP.
/// Damping, schedules, and normalization mirror BpRun so that a synchronized
/// run reproduces ground BP exactly.
class CbpRun {
 public:
  CbpRun(CompressedFactorGraph graph, BpConfig config)
      : graph_(std::move(graph)), config_(std::move(config)) {
    config_.validate(static_cast<int>(graph_.ground_variables));
    for (const ClusterFactor& cf : graph_.factors)
      if (cf.table.all_zero())
        throw ContradictionError("clusterfactor " + std::to_string(cf.color) +
                                 " is all zero after conditioning on evidence");
    std::size_t ne = graph_.edges.size();
    var_to_factor_.resize(ne);
    factor_to_var_.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      int card = graph_.nodes[static_cast<std::size_t>(graph_.edges[e].node)].cardinality;
      var_to_factor_[e].assign(static_cast<std::size_t>(card), 1.0 / card);
      factor_to_var_[e].assign(static_cast<std::size_t>(card), 1.0 / card);
    }
    stats_.edges = static_cast<long long>(ne);
    if (config_.schedule == Schedule::ForwardsBackwards) build_fb_sequence();
  }

  double sweep() {
    residual_ = 0.0;
    if (config_.schedule == Schedule::Flooding) {
      for (std::size_t e = 0; e < graph_.edges.size(); ++e) update_var_to_factor(e);
      for (std::size_t e = 0; e < graph_.edges.size(); ++e) update_factor_to_var(e);
    } else {
      for (auto it = fb_sequence_.begin(); it != fb_sequence_.end(); ++it) process_fb(*it, true);
      for (auto it = fb_sequence_.rbegin(); it != fb_sequence_.rend(); ++it) process_fb(*it, false);
    }
    ++stats_.sweeps;
    stats_.residual = residual_;
    return residual_;
  }

  bool run() {
    for (int i = 0; i < config_.max_sweeps; ++i) {
      if (sweep() < config_.tolerance) {
        stats_.converged = true;
        break;
      }
    }
    return stats_.converged;
  }

  /// Beliefs per clusternode: product of incoming messages, each raised to
  /// its edge count, normalized.
  Beliefs cluster_beliefs() const {
    Beliefs out(graph_.nodes.size());
    for (std::size_t n = 0; n < graph_.nodes.size(); ++n) {
      std::vector<double> b(static_cast<std::size_t>(graph_.nodes[n].cardinality), 1.0);
      for (int e : graph_.node_edges[n])
        detail::pow_multiply(b, factor_to_var_[static_cast<std::size_t>(e)],
                             graph_.edges[static_cast<std::size_t>(e)].count);
      detail::normalize_message(b, "cluster belief");
      out[n] = std::move(b);
    }
    return out;
  }

  /// Cluster beliefs expanded to the ground variables.
  Beliefs beliefs() const {
    Beliefs cluster = cluster_beliefs();
    Beliefs out(static_cast<std::size_t>(graph_.ground_variables));
    for (std::size_t n = 0; n < graph_.nodes.size(); ++n)
      for (VarId v : graph_.nodes[n].members) out[static_cast<std::size_t>(v)] = cluster[n];
    return out;
  }

  /// Fresh count-exponentiated message from a clusternode along edge `e`.
  std::vector<double> cluster_variable_to_factor_message(std::size_t e) const {
    return compute_var_to_factor(e);
  }

  /// Fresh sum-product message from a clusterfactor along edge `e`.
  std::vector<double> cluster_factor_to_variable_message(std::size_t e) const {
    return compute_factor_to_var(e);
  }

  const RunStats& stats() const { return stats_; }
  const CompressedFactorGraph& graph() const { return graph_; }

  std::vector<double>& stored_var_to_factor(std::size_t e) { return var_to_factor_[e]; }
  std::vector<double>& stored_factor_to_var(std::size_t e) { return factor_to_var_[e]; }
  const std::vector<double>& stored_var_to_factor(std::size_t e) const { return var_to_factor_[e]; }
  const std::vector<double>& stored_factor_to_var(std::size_t e) const { return factor_to_var_[e]; }

 private:
  using FbKey = std::tuple<int, int, int>;
  struct FbNode {
    bool is_var;
    int id;
  };

  void build_fb_sequence() {
    std::vector<int> rank(static_cast<std::size_t>(graph_.ground_variables));
    if (config_.fb_order.empty()) {
      for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = static_cast<int>(i);
    } else {
      for (std::size_t i = 0; i < config_.fb_order.size(); ++i)
        rank[static_cast<std::size_t>(config_.fb_order[i])] = static_cast<int>(i);
    }
    // Cluster order keys come from the ground order: a clusternode sits at its
    // lowest-ranked member, a clusterfactor just before the highest-ranked
    // argument of its representative member.
    node_key_.resize(graph_.nodes.size());
    for (std::size_t n = 0; n < graph_.nodes.size(); ++n) {
      int best = std::numeric_limits<int>::max();
      VarId best_v = graph_.nodes[n].representative;
      for (VarId v : graph_.nodes[n].members) {
        if (rank[static_cast<std::size_t>(v)] < best) {
          best = rank[static_cast<std::size_t>(v)];
          best_v = v;
        }
      }
      node_key_[n] = {best, 1, best_v};
    }
    factor_key_.resize(graph_.factors.size());
    for (std::size_t f = 0; f < graph_.factors.size(); ++f) {
      int r = 0;
      for (VarId a : graph_.factors[f].representative_args)
        r = std::max(r, rank[static_cast<std::size_t>(a)]);
      factor_key_[f] = {r, 0, graph_.factors[f].members.front()};
    }
    for (std::size_t n = 0; n < graph_.nodes.size(); ++n) fb_sequence_.push_back({true, static_cast<int>(n)});
    for (std::size_t f = 0; f < graph_.factors.size(); ++f) fb_sequence_.push_back({false, static_cast<int>(f)});
    std::sort(fb_sequence_.begin(), fb_sequence_.end(), [&](const FbNode& a, const FbNode& b) {
      return key_of(a) < key_of(b);
    });
  }

  FbKey key_of(const FbNode& n) const {
    return n.is_var ? node_key_[static_cast<std::size_t>(n.id)] : factor_key_[static_cast<std::size_t>(n.id)];
  }

  void process_fb(const FbNode& n, bool forward) {
    if (n.is_var) {
      for (int e : graph_.node_edges[static_cast<std::size_t>(n.id)]) {
        bool crosses = factor_key_[static_cast<std::size_t>(graph_.edges[static_cast<std::size_t>(e)].factor)] >
                       node_key_[static_cast<std::size_t>(n.id)];
        if (crosses == forward) update_var_to_factor(static_cast<std::size_t>(e));
      }
    } else {
      const ClusterFactor& cf = graph_.factors[static_cast<std::size_t>(n.id)];
      for (int eid : cf.class_edge) {
        bool crosses = node_key_[static_cast<std::size_t>(graph_.edges[static_cast<std::size_t>(eid)].node)] >
                       factor_key_[static_cast<std::size_t>(n.id)];
        if (crosses == forward) update_factor_to_var(static_cast<std::size_t>(eid));
      }
    }
  }

  std::vector<double> compute_var_to_factor(std::size_t e) const {
    const ClusterEdge& edge = graph_.edges[e];
    const ClusterNode& node = graph_.nodes[static_cast<std::size_t>(edge.node)];
    std::vector<double> m(static_cast<std::size_t>(node.cardinality), 1.0);
    for (int other : graph_.node_edges[static_cast<std::size_t>(edge.node)]) {
      long long exp = graph_.edges[static_cast<std::size_t>(other)].count;
      if (static_cast<std::size_t>(other) == e) --exp;  // exclude one copy of the target edge
      detail::pow_multiply(m, factor_to_var_[static_cast<std::size_t>(other)], exp);
    }
    detail::normalize_message(m, "clusternode-to-clusterfactor message");
    return m;
  }

  std::vector<double> compute_factor_to_var(std::size_t e) const {
    const ClusterEdge& edge = graph_.edges[e];
    const ClusterFactor& cf = graph_.factors[static_cast<std::size_t>(edge.factor)];
    const Potential& t = cf.table;
    int p = cf.classes[static_cast<std::size_t>(edge.klass)].front();
    int card = graph_.nodes[static_cast<std::size_t>(edge.node)].cardinality;
    std::vector<double> m(static_cast<std::size_t>(card), 0.0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
      double w = t[flat];
      if (w == 0.0) continue;
      for (int q = 0; q < t.arity(); ++q) {
        if (q == p) continue;
        std::size_t qe = static_cast<std::size_t>(cf.class_edge[static_cast<std::size_t>(
            cf.pos_class[static_cast<std::size_t>(q)])]);
        w *= var_to_factor_[qe][static_cast<std::size_t>(t.state_at(flat, q))];
      }
      m[static_cast<std::size_t>(t.state_at(flat, p))] += w;
    }
    detail::normalize_message(m, "clusterfactor-to-clusternode message");
    return m;
  }

  void update_var_to_factor(std::size_t e) { commit(compute_var_to_factor(e), var_to_factor_[e]); }
  void update_factor_to_var(std::size_t e) { commit(compute_factor_to_var(e), factor_to_var_[e]); }

  void commit(std::vector<double> fresh, std::vector<double>& slot) {
    double d = config_.damping;
    if (d > 0.0)
      for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i] = (1.0 - d) * fresh[i] + d * slot[i];
    detail::normalize_message(fresh, "message");
    for (std::size_t i = 0; i < fresh.size(); ++i)
      residual_ = std::max(residual_, std::abs(fresh[i] - slot[i]));
    slot = std::move(fresh);
    ++stats_.messages;
  }

  CompressedFactorGraph graph_;
  BpConfig config_;
  RunStats stats_;
  double residual_ = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> var_to_factor_;
  std::vector<std::vector<double>> factor_to_var_;
  std::vector<FbKey> node_key_;
  std::vector<FbKey> factor_key_;
  std::vector<FbNode> fb_sequence_;
};

/// Runs counting BP on a compressed graph; returns beliefs indexed by ground
/// variable id (members share their clusternode's belief) plus run stats.
inline std::pair<Beliefs, RunStats> run_cbp(CompressedFactorGraph graph,
                                            const BpConfig& config = {}) {
  CbpRun run(std::move(graph), config);
  run.run();
  return {run.beliefs(), run.stats()};
}

}  // namespace cbp
