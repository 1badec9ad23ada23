#pragma once

#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "cbp/factor_graph.hpp"

namespace cbp {

/// Flooding updates every directed message once per sweep (two synchronous
/// phases: all variable-to-factor, then all factor-to-variable).
/// ForwardsBackwards orders variable and factor nodes along a total order and
/// sends each directed message once per sweep: forward-crossing messages on
/// the left-to-right pass, the rest on the return pass.
enum class Schedule { Flooding, ForwardsBackwards };

struct BpConfig {
  double damping = 0.5;      // fraction of the old message retained
  double tolerance = 1e-8;   // max absolute message change
  int max_sweeps = 1000;
  Schedule schedule = Schedule::Flooding;
  std::vector<VarId> fb_order;  // variable order for ForwardsBackwards; ids ascending when empty

  void validate(int num_variables) const {
    if (!(damping >= 0.0 && damping < 1.0)) throw ValidationError("damping must be in [0,1)");
    if (!(tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
    if (max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
    if (!fb_order.empty()) {
      if (static_cast<int>(fb_order.size()) != num_variables)
        throw ValidationError("fb_order must list every variable exactly once");
      std::vector<char> seen(fb_order.size(), 0);
      for (VarId v : fb_order) {
        if (v < 0 || v >= num_variables || seen[static_cast<std::size_t>(v)])
          throw ValidationError("fb_order must be a permutation of the variable ids");
        seen[static_cast<std::size_t>(v)] = 1;
      }
    }
  }
};

struct RunStats {
  int sweeps = 0;
  long long messages = 0;  // message updates performed
  long long edges = 0;     // undirected edges of the graph the run operates on
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
};

using Beliefs = std::vector<std::vector<double>>;

namespace detail {

inline void normalize_message(std::vector<double>& v, const char* what) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (!(sum > 0.0)) throw ContradictionError(std::string(what) + " is all zero (contradictory evidence)");
  for (double& x : v) x /= sum;
}

// Rescale mid-product so long products of sub-1 messages cannot underflow.
inline void rescale_if_tiny(std::vector<double>& v) {
  double mx = 0.0;
  for (double x : v) mx = std::max(mx, x);
  if (mx > 0.0 && mx < 1e-280)
    for (double& x : v) x /= mx;
}

}  // namespace detail

/// Directed messages of one BP run, keyed by (factor, position) incidence.
/// Every stored message is normalized to sum 1.
class MessageStore {
 public:
  MessageStore() = default;
  MessageStore(std::size_t edges, const std::vector<int>& cards) {
    var_to_factor_.resize(edges);
    factor_to_var_.resize(edges);
    for (std::size_t e = 0; e < edges; ++e) {
      int c = cards[e];
      var_to_factor_[e].assign(static_cast<std::size_t>(c), 1.0 / c);
      factor_to_var_[e].assign(static_cast<std::size_t>(c), 1.0 / c);
    }
  }

  std::vector<double>& var_to_factor(std::size_t e) { return var_to_factor_[e]; }
  std::vector<double>& factor_to_var(std::size_t e) { return factor_to_var_[e]; }
  const std::vector<double>& var_to_factor(std::size_t e) const { return var_to_factor_[e]; }
  const std::vector<double>& factor_to_var(std::size_t e) const { return factor_to_var_[e]; }
  std::size_t size() const { return var_to_factor_.size(); }

 private:
  std::vector<std::vector<double>> var_to_factor_;
  std::vector<std::vector<double>> factor_to_var_;
};

/// One sum-product run over an evidence-conditioned graph. The run owns its
/// MessageStore; the input graph is copied (conditioned) at construction.
class BpRun {
 public:
  BpRun(const FactorGraph& graph, const Evidence& evidence, BpConfig config)
      : graph_(apply_evidence(graph, evidence)), config_(std::move(config)) {
    config_.validate(graph_.num_variables());
    for (const Factor& f : graph_.factors())
      if (f.table.all_zero())
        throw ContradictionError("factor " + std::to_string(f.id) +
                                 " is all zero after conditioning on evidence");
    index_edges();
    store_ = MessageStore(edge_var_.size(), edge_card_);
    stats_.edges = static_cast<long long>(edge_var_.size());
    if (config_.schedule == Schedule::ForwardsBackwards) build_fb_sequence();
  }

  /// One schedule sweep; returns the sweep residual.
  double sweep() {
    residual_ = 0.0;
    if (config_.schedule == Schedule::Flooding) {
      for (std::size_t e = 0; e < edge_var_.size(); ++e) update_var_to_factor(e);
      for (std::size_t e = 0; e < edge_var_.size(); ++e) update_factor_to_var(e);
    } else {
      for (auto it = fb_sequence_.begin(); it != fb_sequence_.end(); ++it) process_fb(*it, true);
      for (auto it = fb_sequence_.rbegin(); it != fb_sequence_.rend(); ++it) process_fb(*it, false);
    }
    ++stats_.sweeps;
    stats_.residual = residual_;
    return residual_;
  }

  /// Sweeps until the residual drops below tolerance or max_sweeps is hit.
  bool run() {
    for (int i = 0; i < config_.max_sweeps; ++i) {
      if (sweep() < config_.tolerance) {
        stats_.converged = true;
        break;
      }
    }
    return stats_.converged;
  }

  /// Per-variable normalized product of incoming factor messages.
  Beliefs beliefs() const {
    Beliefs out(static_cast<std::size_t>(graph_.num_variables()));
    for (VarId v = 0; v < graph_.num_variables(); ++v) {
      int card = graph_.variable(v).cardinality;
      std::vector<double> b(static_cast<std::size_t>(card), 1.0);
      for (std::size_t e : var_edges_[static_cast<std::size_t>(v)]) {
        const auto& m = store_.factor_to_var(e);
        for (int x = 0; x < card; ++x) b[static_cast<std::size_t>(x)] *= m[static_cast<std::size_t>(x)];
        detail::rescale_if_tiny(b);
      }
      detail::normalize_message(b, "belief");
      out[static_cast<std::size_t>(v)] = std::move(b);
    }
    return out;
  }

  /// Fresh (undamped, unstored) message : the normalized product of all
  /// incoming factor messages except the one from `f`.
  std::vector<double> variable_to_factor_message(VarId v, FactorId f) const {
    return compute_var_to_factor(edge_of(f, v));
  }

  /// Fresh (undamped, unstored) sum-product message from `f` to `v`.
  std::vector<double> factor_to_variable_message(FactorId f, VarId v) const {
    return compute_factor_to_var(edge_of(f, v));
  }

  MessageStore& store() { return store_; }
  const MessageStore& store() const { return store_; }
  std::size_t edge_of(FactorId f, VarId v) const {
    const auto& args = graph_.factor_args(f);
    for (std::size_t p = 0; p < args.size(); ++p)
      if (args[p] == v) return factor_edges_[static_cast<std::size_t>(f)][p];
    throw ValidationError("variable " + std::to_string(v) + " is not an argument of factor " +
                          std::to_string(f));
  }

  const RunStats& stats() const { return stats_; }
  const FactorGraph& conditioned_graph() const { return graph_; }

 private:
  void index_edges() {
    var_edges_.assign(static_cast<std::size_t>(graph_.num_variables()), {});
    factor_edges_.assign(static_cast<std::size_t>(graph_.num_factors()), {});
    for (const Factor& f : graph_.factors()) {
      for (std::size_t p = 0; p < f.args.size(); ++p) {
        std::size_t e = edge_var_.size();
        edge_var_.push_back(f.args[p]);
        edge_factor_.push_back(f.id);
        edge_pos_.push_back(static_cast<int>(p));
        edge_card_.push_back(graph_.variable(f.args[p]).cardinality);
        var_edges_[static_cast<std::size_t>(f.args[p])].push_back(e);
        factor_edges_[static_cast<std::size_t>(f.id)].push_back(e);
      }
    }
  }

  // Node keys for the forwards-backwards pass: variables sit at their rank,
  // factors just before their highest-ranked argument, ties by id.
  using FbKey = std::tuple<int, int, int>;

  void build_fb_sequence() {
    std::vector<int> rank(static_cast<std::size_t>(graph_.num_variables()));
    if (config_.fb_order.empty()) {
      for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = static_cast<int>(i);
    } else {
      for (std::size_t i = 0; i < config_.fb_order.size(); ++i)
        rank[static_cast<std::size_t>(config_.fb_order[i])] = static_cast<int>(i);
    }
    var_key_.resize(rank.size());
    for (VarId v = 0; v < graph_.num_variables(); ++v)
      var_key_[static_cast<std::size_t>(v)] = {rank[static_cast<std::size_t>(v)], 1, v};
    factor_key_.resize(static_cast<std::size_t>(graph_.num_factors()));
    for (const Factor& f : graph_.factors()) {
      int r = 0;
      for (VarId a : f.args) r = std::max(r, rank[static_cast<std::size_t>(a)]);
      factor_key_[static_cast<std::size_t>(f.id)] = {r, 0, f.id};
    }
    for (VarId v = 0; v < graph_.num_variables(); ++v) fb_sequence_.push_back({true, v});
    for (FactorId f = 0; f < graph_.num_factors(); ++f) fb_sequence_.push_back({false, f});
    std::sort(fb_sequence_.begin(), fb_sequence_.end(), [&](const FbNode& a, const FbNode& b) {
      return key_of(a) < key_of(b);
    });
  }

  struct FbNode {
    bool is_var;
    int id;
  };

  FbKey key_of(const FbNode& n) const {
    return n.is_var ? var_key_[static_cast<std::size_t>(n.id)]
                    : factor_key_[static_cast<std::size_t>(n.id)];
  }

  void process_fb(const FbNode& n, bool forward) {
    if (n.is_var) {
      for (std::size_t e : var_edges_[static_cast<std::size_t>(n.id)]) {
        bool crosses = factor_key_[static_cast<std::size_t>(edge_factor_[e])] >
                       var_key_[static_cast<std::size_t>(n.id)];
        if (crosses == forward) update_var_to_factor(e);
      }
    } else {
      for (std::size_t e : factor_edges_[static_cast<std::size_t>(n.id)]) {
        bool crosses = var_key_[static_cast<std::size_t>(edge_var_[e])] >
                       factor_key_[static_cast<std::size_t>(n.id)];
        if (crosses == forward) update_factor_to_var(e);
      }
    }
  }

  std::vector<double> compute_var_to_factor(std::size_t e) const {
    VarId v = edge_var_[e];
    int card = graph_.variable(v).cardinality;
    std::vector<double> m(static_cast<std::size_t>(card), 1.0);
    for (std::size_t other : var_edges_[static_cast<std::size_t>(v)]) {
      if (other == e) continue;
      const auto& in = store_.factor_to_var(other);
      for (int x = 0; x < card; ++x) m[static_cast<std::size_t>(x)] *= in[static_cast<std::size_t>(x)];
      detail::rescale_if_tiny(m);
    }
    detail::normalize_message(m, "variable-to-factor message");
    return m;
  }

  std::vector<double> compute_factor_to_var(std::size_t e) const {
    FactorId fid = edge_factor_[e];
    int p = edge_pos_[e];
    const Factor& f = graph_.factor(fid);
    const Potential& t = f.table;
    int card = graph_.variable(edge_var_[e]).cardinality;
    std::vector<double> m(static_cast<std::size_t>(card), 0.0);
    const auto& edges = factor_edges_[static_cast<std::size_t>(fid)];
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
      double w = t[flat];
      if (w == 0.0) continue;
      for (std::size_t q = 0; q < edges.size(); ++q) {
        if (static_cast<int>(q) == p) continue;
        w *= store_.var_to_factor(edges[q])[static_cast<std::size_t>(t.state_at(flat, static_cast<int>(q)))];
      }
      m[static_cast<std::size_t>(t.state_at(flat, p))] += w;
    }
    detail::normalize_message(m, "factor-to-variable message");
    return m;
  }

  void update_var_to_factor(std::size_t e) { commit(e, compute_var_to_factor(e), store_.var_to_factor(e)); }
  void update_factor_to_var(std::size_t e) { commit(e, compute_factor_to_var(e), store_.factor_to_var(e)); }

  void commit(std::size_t, std::vector<double> fresh, std::vector<double>& slot) {
    double d = config_.damping;
    if (d > 0.0)
      for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i] = (1.0 - d) * fresh[i] + d * slot[i];
    detail::normalize_message(fresh, "message");
    for (std::size_t i = 0; i < fresh.size(); ++i)
      residual_ = std::max(residual_, std::abs(fresh[i] - slot[i]));
    slot = std::move(fresh);
    ++stats_.messages;
  }

  FactorGraph graph_;
  BpConfig config_;
  MessageStore store_;
  RunStats stats_;
  double residual_ = std::numeric_limits<double>::infinity();

  std::vector<VarId> edge_var_;
  std::vector<FactorId> edge_factor_;
  std::vector<int> edge_pos_;
  std::vector<int> edge_card_;
  std::vector<std::vector<std::size_t>> var_edges_;
  std::vector<std::vector<std::size_t>> factor_edges_;
  std::vector<FbKey> var_key_;
  std::vector<FbKey> factor_key_;
  std::vector<FbNode> fb_sequence_;
};

/// Conditions `graph` on `evidence`, runs sum-product BP, returns normalized
/// per-variable beliefs and run statistics.
inline std::pair<Beliefs, RunStats> run_bp(const FactorGraph& graph, const Evidence& evidence,
                                           const BpConfig& config = {}) {
  BpRun run(graph, evidence, config);
  run.run();
  return {run.beliefs(), run.stats()};
}

}  // namespace cbp
