#pragma once

#include <json.hpp>

#include <string>

#include "cbp/bp.hpp"
#include "cbp/dmln.hpp"
#include "cbp/lifting.hpp"
#include "cbp/model_count.hpp"

namespace cbp {

using nlohmann::json;

inline json beliefs_to_json(const Beliefs& beliefs) {
  json out = json::object();
  for (std::size_t v = 0; v < beliefs.size(); ++v) out[std::to_string(v)] = beliefs[v];
  return out;
}

inline json run_stats_to_json(const RunStats& s) {
  return json{{"sweeps", s.sweeps},
              {"messages", s.messages},
              {"edges", s.edges},
              {"converged", s.converged},
              {"residual", s.residual}};
}

inline Evidence evidence_from_json(const json& j) {
  Evidence ev;
  if (!j.is_object()) throw ParseError("evidence must be a JSON object of {\"var\": state}");
  for (auto it = j.begin(); it != j.end(); ++it) {
    int var = 0;
    try {
      var = std::stoi(it.key());
    } catch (const std::exception&) {
      throw ParseError("evidence key '" + it.key() + "' is not a variable id");
    }
    if (!it.value().is_number_integer()) throw ParseError("evidence state must be an integer");
    ev[var] = it.value().get<int>();
  }
  return ev;
}

inline json compression_stats_to_json(const CompressionStats& s) {
  return json{{"variables", s.variables},
              {"clusternodes", s.clusternodes},
              {"factors", s.factors},
              {"clusterfactors", s.clusterfactors},
              {"edges", s.edges},
              {"compressed_edges", s.compressed_edges},
              {"node_ratio", s.node_ratio},
              {"factor_ratio", s.factor_ratio},
              {"edge_ratio", s.edge_ratio}};
}

inline json compressed_to_json(const CompressedFactorGraph& cg) {
  json nodes = json::array();
  for (const ClusterNode& n : cg.nodes) {
    json jn{{"color", n.color},
            {"members", n.members},
            {"representative", n.representative},
            {"cardinality", n.cardinality}};
    jn["evidence"] = n.evidence ? json(*n.evidence) : json(nullptr);
    nodes.push_back(std::move(jn));
  }
  json factors = json::array();
  for (const ClusterFactor& f : cg.factors) {
    factors.push_back(json{{"color", f.color},
                           {"members", f.members},
                           {"cardinalities", f.table.cardinalities()},
                           {"values", f.table.values()},
                           {"positions", f.pos_node}});
  }
  json edges = json::array();
  for (const ClusterEdge& e : cg.edges) {
    edges.push_back(json{{"factor", e.factor},
                         {"class", e.klass},
                         {"positions", cg.factors[static_cast<std::size_t>(e.factor)]
                                           .classes[static_cast<std::size_t>(e.klass)]},
                         {"node", e.node},
                         {"count", e.count}});
  }
  return json{{"position_mode", to_string(cg.mode)},
              {"rounds", cg.rounds},
              {"ground",
               {{"variables", cg.ground_variables},
                {"factors", cg.ground_factors},
                {"edges", cg.ground_edges}}},
              {"clusternodes", std::move(nodes)},
              {"clusterfactors", std::move(factors)},
              {"edges", std::move(edges)}};
}

inline json count_value_to_json(const CountValue& v) {
  return json{{"mantissa", v.mantissa.get_str()},
              {"exp2_num", v.exp2.get_num().get_str()},
              {"exp2_den", v.exp2.get_den().get_str()}};
}

inline json count_result_to_json(const CountResult& r, const CountConfig& cfg) {
  json iterations = json::array();
  for (const IterationTrace& tr : r.iterations) {
    json steps = json::array();
    for (const IterationStep& st : tr.steps) {
      steps.push_back(json{{"occurring", st.occurring},
                           {"edges", st.edges},
                           {"messages", st.messages},
                           {"sweeps", st.sweeps},
                           {"converged", st.converged},
                           {"picked_var", st.picked_var},
                           {"picked_value", st.picked_value}});
    }
    iterations.push_back(json{{"s", tr.s},
                              {"residual_count", tr.residual_count.get_str()},
                              {"bound", floor_value(tr.bound).get_str()},
                              {"bound_exact", count_value_to_json(tr.bound)},
                              {"conflict", tr.conflict},
                              {"steps", std::move(steps)}});
  }
  return json{{"engine", to_string(r.engine)},
              {"seed", r.seed},
              {"alpha", cfg.alpha.get_str()},
              {"iterations_requested", cfg.iterations},
              {"exact_threshold", cfg.exact_threshold},
              {"confidence", r.confidence},
              {"lower_bound", floor_value(r.lower_bound).get_str()},
              {"lower_bound_exact", count_value_to_json(r.lower_bound)},
              {"winning_iteration", r.winning_iteration},
              {"iterations", std::move(iterations)}};
}

inline json comparison_to_json(const ComparisonReport& rep) {
  json cancer = json::array();
  for (const CancerBelief& c : rep.cancer)
    cancer.push_back(json{{"person", c.person},
                          {"timestep", c.timestep},
                          {"p_ff", c.p_ff},
                          {"p_lfoff", c.p_lfoff}});
  return json{{"sweeps", rep.sweeps},
              {"edges_ff", rep.edges_ff},
              {"edges_lfoff", rep.edges_lfoff},
              {"messages_ff", rep.messages_ff},
              {"messages_lfoff", rep.messages_lfoff},
              {"ratio_edges", rep.ratio_edges},
              {"ratio_messages", rep.ratio_messages},
              {"max_belief_diff", rep.max_belief_diff},
              {"cancer", std::move(cancer)}};
}

}  // namespace cbp
