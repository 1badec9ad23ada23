#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cbp/cbp.hpp"
#include "cbp/cnf.hpp"
#include "cbp/dmln.hpp"
#include "cbp/fgt.hpp"
#include "cbp/lifting.hpp"
#include "cbp/model_count.hpp"
#include "cbp/serialize.hpp"

namespace cbp::cli {

// Exit codes: 0 success, 2 input/usage error, 3 inference contradiction,
// 4 budget exceeded.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitContradiction = 3;
inline constexpr int kExitBudget = 4;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << data;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// .cnf/.dimacs files go through the clause conversion, everything else is
/// read as .fgt text.
inline FactorGraph load_graph(const std::string& path) {
  std::string text = read_file(path);
  if (has_suffix(path, ".cnf") || has_suffix(path, ".dimacs"))
    return to_factor_graph(parse_dimacs(text));
  return read_fgt(text);
}

inline PositionMode parse_mode(const std::string& s) {
  if (s == "unpositioned") return PositionMode::Unpositioned;
  if (s == "positional") return PositionMode::Positional;
  if (s == "commutative") return PositionMode::Commutative;
  throw ValidationError("unknown position mode '" + s + "'");
}

inline Schedule parse_schedule(const std::string& s) {
  if (s == "flooding") return Schedule::Flooding;
  if (s == "fb" || s == "forwards-backwards") return Schedule::ForwardsBackwards;
  throw ValidationError("unknown schedule '" + s + "'");
}

inline Engine parse_engine(const std::string& s) {
  if (s == "bp") return Engine::BP;
  if (s == "cbp") return Engine::CBP;
  throw ValidationError("unknown engine '" + s + "'");
}

inline mpq_class parse_rational(const std::string& s) {
  // Accept plain decimals ("0.5") and fractions ("1/2").
  try {
    if (s.find('/') != std::string::npos) {
      mpq_class q(s);
      q.canonicalize();
      return q;
    }
    std::size_t dot = s.find('.');
    if (dot == std::string::npos) return mpq_class(mpz_class(s));
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    mpz_class num(digits);
    mpz_class den = 1;
    for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
    mpq_class q(num, den);
    q.canonicalize();
    return q;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse rational '" + s + "'");
  }
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  return out;
}

}  // namespace detail

inline int run(std::vector<std::string> args) {
  CLI::App app{"Factor-graph inference with belief propagation and counting BP"};
  app.require_subcommand(1);

  // compress
  auto* c_compress = app.add_subcommand("compress", "Compress a factor graph by color passing");
  std::string cp_input, cp_mode = "commutative", cp_output = "-", cp_graph_out;
  c_compress->add_option("--input", cp_input, ".fgt or .cnf file")->required();
  c_compress->add_option("--mode", cp_mode, "unpositioned|positional|commutative");
  c_compress->add_option("--output", cp_output, "stats JSON path ('-' for stdout)");
  c_compress->add_option("--graph-out", cp_graph_out, "also write the compressed graph as JSON");

  // marginals
  auto* c_marg = app.add_subcommand("marginals", "Per-variable beliefs via BP or CBP");
  std::string mg_input, mg_engine = "bp", mg_schedule = "flooding", mg_evidence, mg_output = "-",
              mg_mode = "commutative";
  double mg_damping = 0.5, mg_tolerance = 1e-8;
  int mg_max_sweeps = 1000;
  c_marg->add_option("--input", mg_input, ".fgt or .cnf file")->required();
  c_marg->add_option("--engine", mg_engine, "bp|cbp");
  c_marg->add_option("--schedule", mg_schedule, "flooding|fb");
  c_marg->add_option("--evidence", mg_evidence, "JSON file {\"var\": state}");
  c_marg->add_option("--damping", mg_damping);
  c_marg->add_option("--tolerance", mg_tolerance);
  c_marg->add_option("--max-sweeps", mg_max_sweeps);
  c_marg->add_option("--mode", mg_mode, "position mode for the cbp engine");
  c_marg->add_option("--output", mg_output);

  // count
  auto* c_count = app.add_subcommand("count", "Probabilistic lower bound on the model count");
  std::string ct_input, ct_engine = "bp", ct_alpha = "1", ct_output = "-", ct_mode = "commutative",
              ct_external;
  int ct_iterations = 7, ct_threshold = 64, ct_max_sweeps = 1000;
  double ct_damping = 0.5, ct_tolerance = 1e-8;
  std::uint64_t ct_seed = 0;
  c_count->add_option("--input", ct_input, "DIMACS CNF file")->required();
  c_count->add_option("--alpha", ct_alpha, "slack factor (decimal or fraction)");
  c_count->add_option("--iterations", ct_iterations, "iterations t");
  c_count->add_option("--engine", ct_engine, "bp|cbp");
  c_count->add_option("--seed", ct_seed, "rng seed")->required();
  c_count->add_option("--exact-threshold", ct_threshold, "occurring-variable budget for the exact counter");
  c_count->add_option("--external-counter", ct_external,
                      "external #SAT command; gets a DIMACS path appended");
  c_count->add_option("--damping", ct_damping);
  c_count->add_option("--tolerance", ct_tolerance);
  c_count->add_option("--max-sweeps", ct_max_sweeps);
  c_count->add_option("--mode", ct_mode);
  c_count->add_option("--output", ct_output);

  // bench-dmln
  auto* c_dmln = app.add_subcommand("bench-dmln", "FF vs LFOFF on the dynamic smokers model");
  int bd_people = 20, bd_timesteps = 10, bd_sweeps = 1, bd_friends = 5;
  std::string bd_rgrid = "0,0.25,0.5,0.75,1", bd_seeds, bd_output = "-", bd_beliefs_out;
  bool bd_no_reflexive = false;
  c_dmln->add_option("--people", bd_people);
  c_dmln->add_option("--timesteps", bd_timesteps);
  c_dmln->add_option("--r-grid", bd_rgrid, "comma-separated observed fractions");
  c_dmln->add_option("--seeds", bd_seeds, "comma-separated seeds")->required();
  c_dmln->add_option("--sweeps", bd_sweeps, "forwards-backwards sweeps per run");
  c_dmln->add_option("--friends", bd_friends, "positive Friends observations per observed person");
  c_dmln->add_flag("--no-reflexive", bd_no_reflexive, "exclude Friends(x,x,t) groundings");
  c_dmln->add_option("--output", bd_output, "CSV path");
  c_dmln->add_option("--beliefs-out", bd_beliefs_out, "also write Cancer beliefs as JSON");

  // bench-count
  auto* c_bcount = app.add_subcommand("bench-count", "BPCount vs CBPCount cumulative message series");
  std::string bc_input, bc_alpha = "1", bc_output = "-", bc_mode = "commutative", bc_external;
  int bc_iterations = 7, bc_threshold = 64, bc_max_sweeps = 1000;
  double bc_damping = 0.5, bc_tolerance = 1e-8;
  std::uint64_t bc_seed = 0;
  c_bcount->add_option("--input", bc_input, "DIMACS CNF file")->required();
  c_bcount->add_option("--alpha", bc_alpha);
  c_bcount->add_option("--iterations", bc_iterations);
  c_bcount->add_option("--seed", bc_seed)->required();
  c_bcount->add_option("--exact-threshold", bc_threshold);
  c_bcount->add_option("--external-counter", bc_external);
  c_bcount->add_option("--damping", bc_damping);
  c_bcount->add_option("--tolerance", bc_tolerance);
  c_bcount->add_option("--max-sweeps", bc_max_sweeps);
  c_bcount->add_option("--mode", bc_mode);
  c_bcount->add_option("--output", bc_output, "CSV path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*c_compress) {
      FactorGraph g = detail::load_graph(cp_input);
      CompressedFactorGraph cg = compress(g, {}, detail::parse_mode(cp_mode));
      json out = compression_stats_to_json(compression_stats(g, cg));
      out["position_mode"] = to_string(cg.mode);
      out["rounds"] = cg.rounds;
      detail::write_output(cp_output, out.dump(2) + "\n");
      if (!cp_graph_out.empty())
        detail::write_output(cp_graph_out, compressed_to_json(cg).dump(2) + "\n");
    } else if (*c_marg) {
      FactorGraph g = detail::load_graph(mg_input);
      Evidence ev;
      if (!mg_evidence.empty()) ev = evidence_from_json(json::parse(detail::read_file(mg_evidence)));
      BpConfig cfg;
      cfg.damping = mg_damping;
      cfg.tolerance = mg_tolerance;
      cfg.max_sweeps = mg_max_sweeps;
      cfg.schedule = detail::parse_schedule(mg_schedule);
      Beliefs beliefs;
      RunStats stats;
      if (detail::parse_engine(mg_engine) == Engine::BP) {
        std::tie(beliefs, stats) = run_bp(g, ev, cfg);
      } else {
        CompressedFactorGraph cg = compress(g, ev, detail::parse_mode(mg_mode));
        std::tie(beliefs, stats) = run_cbp(cg, cfg);
      }
      json out{{"beliefs", beliefs_to_json(beliefs)}, {"stats", run_stats_to_json(stats)}};
      detail::write_output(mg_output, out.dump(2) + "\n");
    } else if (*c_count) {
      CnfFormula f = parse_dimacs(detail::read_file(ct_input));
      CountConfig cfg;
      cfg.alpha = detail::parse_rational(ct_alpha);
      cfg.iterations = ct_iterations;
      cfg.engine = detail::parse_engine(ct_engine);
      cfg.seed = ct_seed;
      cfg.exact_threshold = ct_threshold;
      cfg.external_counter = ct_external;
      cfg.mode = detail::parse_mode(ct_mode);
      cfg.bp.damping = ct_damping;
      cfg.bp.tolerance = ct_tolerance;
      cfg.bp.max_sweeps = ct_max_sweeps;
      CountResult r = run_count(f, cfg);
      detail::write_output(ct_output, count_result_to_json(r, cfg).dump(2) + "\n");
    } else if (*c_dmln) {
      DmlnSpec spec;
      spec.num_people = bd_people;
      spec.num_timesteps = bd_timesteps;
      spec.include_reflexive_friends = !bd_no_reflexive;
      std::vector<double> grid = detail::parse_double_list(bd_rgrid);
      std::vector<std::uint64_t> seeds = detail::parse_seed_list(bd_seeds);
      if (grid.empty() || seeds.empty()) throw ValidationError("empty r grid or seed list");
      std::ostringstream csv;
      csv << "r,seed,edges_ff,edges_lfoff,messages_ff,messages_lfoff,ratio_edges,ratio_messages\n";
      json beliefs_out = json::array();
      for (std::uint64_t seed : seeds) {
        for (double r : grid) {
          DmlnEvidenceSpec espec;
          espec.fraction = r;
          espec.friends_per_person = bd_friends;
          espec.seed = seed;
          ComparisonReport rep = run_comparison(spec, espec, bd_sweeps);
          csv << format_real(r) << "," << seed << "," << rep.edges_ff << "," << rep.edges_lfoff
              << "," << rep.messages_ff << "," << rep.messages_lfoff << ","
              << format_real(rep.ratio_edges) << "," << format_real(rep.ratio_messages) << "\n";
          if (!bd_beliefs_out.empty()) {
            json entry = comparison_to_json(rep);
            entry["r"] = r;
            entry["seed"] = seed;
            beliefs_out.push_back(std::move(entry));
          }
        }
      }
      detail::write_output(bd_output, csv.str());
      if (!bd_beliefs_out.empty()) detail::write_output(bd_beliefs_out, beliefs_out.dump(2) + "\n");
    } else if (*c_bcount) {
      CnfFormula f = parse_dimacs(detail::read_file(bc_input));
      CountConfig cfg;
      cfg.alpha = detail::parse_rational(bc_alpha);
      cfg.iterations = bc_iterations;
      cfg.seed = bc_seed;
      cfg.exact_threshold = bc_threshold;
      cfg.external_counter = bc_external;
      cfg.mode = detail::parse_mode(bc_mode);
      cfg.bp.damping = bc_damping;
      cfg.bp.tolerance = bc_tolerance;
      cfg.bp.max_sweeps = bc_max_sweeps;
      cfg.engine = Engine::BP;
      CountResult bp_run = run_count(f, cfg);
      cfg.engine = Engine::CBP;
      CountResult cbp_run = run_count(f, cfg);
      std::ostringstream csv;
      csv << "iteration,step,occurring,messages_bp,messages_cbp,cum_messages_bp,cum_messages_cbp,"
             "ratio_messages,edges_bp,edges_cbp,cum_edges_bp,cum_edges_cbp,ratio_edges\n";
      long long cmb = 0, cmc = 0, ceb = 0, cec = 0;
      std::size_t iters = std::min(bp_run.iterations.size(), cbp_run.iterations.size());
      for (std::size_t i = 0; i < iters; ++i) {
        const auto& sb = bp_run.iterations[i].steps;
        const auto& sc = cbp_run.iterations[i].steps;
        std::size_t steps = std::min(sb.size(), sc.size());
        for (std::size_t k = 0; k < steps; ++k) {
          cmb += sb[k].messages;
          cmc += sc[k].messages;
          ceb += sb[k].edges;
          cec += sc[k].edges;
          csv << i << "," << k << "," << sb[k].occurring << "," << sb[k].messages << ","
              << sc[k].messages << "," << cmb << "," << cmc << ","
              << format_real(static_cast<double>(cmc) / static_cast<double>(cmb)) << ","
              << sb[k].edges << "," << sc[k].edges << "," << ceb << "," << cec << ","
              << format_real(static_cast<double>(cec) / static_cast<double>(ceb)) << "\n";
        }
      }
      detail::write_output(bc_output, csv.str());
    }
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContradictionError& e) {
    std::cerr << "contradiction: " << e.what() << "\n";
    return kExitContradiction;
  } catch (const BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kExitBudget;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

inline int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace cbp::cli
