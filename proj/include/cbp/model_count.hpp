#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cbp/bp.hpp"
#include "cbp/cbp.hpp"
#include "cbp/cnf.hpp"
#include "cbp/lifting.hpp"

namespace cbp {

enum class Engine { BP, CBP };

inline const char* to_string(Engine e) { return e == Engine::BP ? "bp" : "cbp"; }

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15ull));
}

}  // namespace detail

/// Deterministic RNG wrapper; avoids std distributions so draws are
/// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  bool coin() { return (eng_() & 1ull) != 0; }

  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("empty range for random draw");
    std::uint64_t threshold = (-n) % n;  // 2^64 mod n
    std::uint64_t r = eng_();
    while (r < threshold) r = eng_();
    return r % n;
  }

  /// k distinct values from 0..n-1 (partial Fisher-Yates), stable given seed.
  std::vector<int> sample(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      std::size_t j = static_cast<std::size_t>(i) +
                      static_cast<std::size_t>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

 private:
  std::mt19937_64 eng_;
};

/// Exact non-negative value mantissa * 2^exp2 with a rational exponent, so
/// 10^29-scale bounds and fractional slack factors never round.
struct CountValue {
  mpz_class mantissa = 0;
  mpq_class exp2 = 0;

  bool is_zero() const { return mantissa == 0; }
  static CountValue zero() { return {0, 0}; }
};

inline int compare(const CountValue& a, const CountValue& b) {
  if (a.is_zero() || b.is_zero()) return cmp(a.mantissa, b.mantissa) < 0 ? -1 : (a.is_zero() && b.is_zero() ? 0 : 1);
  // Integer-exponent fast path.
  if (a.exp2.get_den() == 1 && b.exp2.get_den() == 1) {
    mpz_class ea = a.exp2.get_num(), eb = b.exp2.get_num();
    mpz_class lo = ea < eb ? ea : eb;
    mpz_class sa = ea - lo, sb = eb - lo;
    mpz_class va = a.mantissa << sa.get_ui();
    mpz_class vb = b.mantissa << sb.get_ui();
    return cmp(va, vb) < 0 ? -1 : (va == vb ? 0 : 1);
  }
  // value_a <=> value_b  iff  m_a^D 2^{e_a D} <=> m_b^D 2^{e_b D} with D a
  // common denominator, all integers.
  mpz_class D = a.exp2.get_den() * b.exp2.get_den();
  mpz_class ea = a.exp2.get_num() * b.exp2.get_den();
  mpz_class eb = b.exp2.get_num() * a.exp2.get_den();
  mpz_class lo = ea < eb ? ea : eb;
  mpz_class va, vb;
  mpz_pow_ui(va.get_mpz_t(), a.mantissa.get_mpz_t(), D.get_ui());
  mpz_pow_ui(vb.get_mpz_t(), b.mantissa.get_mpz_t(), D.get_ui());
  va <<= mpz_class(ea - lo).get_ui();
  vb <<= mpz_class(eb - lo).get_ui();
  return cmp(va, vb) < 0 ? -1 : (va == vb ? 0 : 1);
}

/// Exact floor of mantissa * 2^exp2 (a model-count lower bound can always be
/// floored to an integer).
inline mpz_class floor_value(const CountValue& v) {
  if (v.is_zero()) return 0;
  mpz_class Q = v.exp2.get_den();
  mpz_class N = v.exp2.get_num();
  mpz_class powq;
  mpz_pow_ui(powq.get_mpz_t(), v.mantissa.get_mpz_t(), Q.get_ui());
  // floor(x) = floor((m^Q 2^N)^{1/Q}); shift or floor-divide by 2^|N| first.
  if (N >= 0)
    powq <<= N.get_ui();
  else
    mpz_fdiv_q_2exp(powq.get_mpz_t(), powq.get_mpz_t(), mpz_class(-N).get_ui());
  mpz_class root;
  mpz_root(root.get_mpz_t(), powq.get_mpz_t(), Q.get_ui());
  return root;
}

struct CountConfig {
  mpq_class alpha = 1;  // slack factor
  int iterations = 7;
  Engine engine = Engine::BP;
  BpConfig bp;  // damping 0.5, tolerance 1e-8, max_sweeps 1000, flooding
  PositionMode mode = PositionMode::Commutative;
  int exact_threshold = 64;  // occurring-variable budget for the exact counter
  std::string external_counter;  // subprocess command; empty = internal counter
  std::uint64_t seed = 0;

  void validate() const {
    if (alpha < 0) throw ValidationError("alpha must be non-negative");
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    if (exact_threshold < 0) throw ValidationError("exact_threshold must be >= 0");
  }
};

/// One marginal-estimation step inside an iteration.
struct IterationStep {
  int occurring = 0;       // variables in the residual's clauses
  long long edges = 0;     // graph edges the engine operated on (compressed for CBP)
  long long messages = 0;  // messages the engine sent
  int sweeps = 0;
  bool converged = false;
  int picked_var = 0;  // 1-based; 0 when the exact counter took over
  int picked_value = -1;
};

struct IterationTrace {
  int s = 0;  // randomly set variables (unit propagations excluded)
  mpz_class residual_count = 0;
  CountValue bound;  // 2^{s - alpha} * residual_count
  bool conflict = false;
  std::vector<IterationStep> steps;
};

struct CountResult {
  CountValue lower_bound;
  double confidence = 0.0;  // 1 - 2^{-alpha t}
  std::vector<IterationTrace> iterations;
  int winning_iteration = 0;
  Engine engine = Engine::BP;
  std::uint64_t seed = 0;
};

/// Variable whose marginal is closest to one half; ties go to the smallest
/// index. Marginals within 5e-11 of each other count as tied so that BP- and
/// CBP-estimated marginals select identically.
inline int most_balanced_variable(const std::vector<std::pair<int, double>>& marginals) {
  if (marginals.empty()) throw ValidationError("no unassigned variables to select from");
  long long best_key = 0;
  int best_var = 0;
  bool first = true;
  for (const auto& [var, p_true] : marginals) {
    long long key = std::llround(std::abs(p_true - 0.5) * 1e10);
    if (first || key < best_key || (key == best_key && var < best_var)) {
      best_key = key;
      best_var = var;
      first = false;
    }
  }
  return best_var;
}

namespace detail {

/// Factor graph over only the variables occurring in the residual clauses.
/// Returns the graph plus the 1-based formula variable behind each node.
inline std::pair<FactorGraph, std::vector<int>> clause_graph(const CnfFormula& f,
                                                             const std::vector<int>& occ) {
  std::vector<int> node_of(static_cast<std::size_t>(f.num_vars) + 1, -1);
  std::vector<Variable> vars;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    node_of[static_cast<std::size_t>(occ[i])] = static_cast<int>(i);
    vars.push_back({static_cast<VarId>(i), 2, "x" + std::to_string(occ[i])});
  }
  std::vector<Factor> factors;
  for (const Clause& c : f.clauses) {
    Factor fac;
    fac.id = static_cast<FactorId>(factors.size());
    std::vector<State> falsifying;
    for (const Literal& l : c) {
      fac.args.push_back(node_of[static_cast<std::size_t>(l.var)]);
      falsifying.push_back(l.positive ? 0 : 1);
    }
    std::vector<int> cards(c.size(), 2);
    std::vector<double> values(static_cast<std::size_t>(1) << c.size(), 1.0);
    Potential table(std::move(cards), std::move(values));
    table.set(table.flat_index(falsifying), 0.0);
    fac.table = std::move(table);
    factors.push_back(std::move(fac));
  }
  return {FactorGraph::build(std::move(vars), std::move(factors)), occ};
}

}  // namespace detail

/// One (C)BPCount iteration: repeatedly estimate marginals with the chosen
/// engine, fix the most balanced variable uniformly at random, unit-propagate,
/// and hand the sufficiently simplified residual to the exact counter.
inline IterationTrace count_iteration(const CnfFormula& formula, const CountConfig& config, Rng& rng) {
  IterationTrace tr;
  CnfFormula residual = formula;
  int assigned = 0;
  for (const Clause& c : residual.clauses)
    if (c.empty()) tr.conflict = true;

  while (!tr.conflict) {
    std::vector<int> occ = occurring_variables(residual);
    if (static_cast<int>(occ.size()) <= config.exact_threshold) {
      if (!config.external_counter.empty()) {
        // Renumber occurring variables densely and declare the unassigned
        // universe so the external tool's free-variable doubling matches M_c.
        CnfFormula renumbered;
        renumbered.num_vars = residual.num_vars - assigned;
        std::map<int, int> dense;
        for (std::size_t i = 0; i < occ.size(); ++i) dense[occ[i]] = static_cast<int>(i) + 1;
        for (const Clause& c : residual.clauses) {
          Clause mapped;
          for (const Literal& l : c) mapped.push_back({dense[l.var], l.positive});
          renumbered.clauses.push_back(std::move(mapped));
        }
        tr.residual_count = external_count(renumbered, config.external_counter);
      } else {
        mpz_class core = exact_count(residual, config.exact_threshold);
        // exact_count treats all num_vars as the universe; shrink to the
        // unassigned universe.
        tr.residual_count = core >> assigned;
      }
      break;
    }
    auto [graph, vars_behind] = detail::clause_graph(residual, occ);
    Beliefs beliefs;
    IterationStep step;
    step.occurring = static_cast<int>(occ.size());
    try {
      if (config.engine == Engine::BP) {
        BpRun run(graph, {}, config.bp);
        run.run();
        beliefs = run.beliefs();
        step.edges = run.stats().edges;
        step.messages = run.stats().messages;
        step.sweeps = run.stats().sweeps;
        step.converged = run.stats().converged;
      } else {
        CompressedFactorGraph cg = compress(graph, {}, config.mode);
        CbpRun run(cg, config.bp);
        run.run();
        beliefs = run.beliefs();
        step.edges = run.stats().edges;
        step.messages = run.stats().messages;
        step.sweeps = run.stats().sweeps;
        step.converged = run.stats().converged;
      }
    } catch (const ContradictionError&) {
      // The residual admits no model; this iteration contributes bound 0.
      tr.conflict = true;
      break;
    }
    std::vector<std::pair<int, double>> marginals;
    marginals.reserve(occ.size());
    for (std::size_t i = 0; i < occ.size(); ++i)
      marginals.emplace_back(vars_behind[i], beliefs[i][1]);
    int u = most_balanced_variable(marginals);
    bool value = rng.coin();
    step.picked_var = u;
    step.picked_value = value ? 1 : 0;
    tr.steps.push_back(step);
    ++tr.s;

    PropagationResult pr = condition_and_propagate(residual, Literal{u, value});
    assigned += 1 + static_cast<int>(pr.implied.size());
    residual = std::move(pr.residual);
    if (pr.conflict) tr.conflict = true;
  }

  if (tr.conflict) {
    tr.residual_count = 0;
    tr.bound = CountValue::zero();
  } else {
    tr.bound.mantissa = tr.residual_count;
    tr.bound.exp2 = mpq_class(tr.s) - config.alpha;
    if (tr.bound.mantissa == 0) tr.bound = CountValue::zero();
  }
  return tr;
}

/// t independent iterations; the reported lower bound is the minimum
/// iteration count, correct with probability 1 - 2^{-alpha t}.
inline CountResult run_count(const CnfFormula& formula, const CountConfig& config) {
  config.validate();
  CountResult result;
  result.engine = config.engine;
  result.seed = config.seed;
  double alpha_d = config.alpha.get_d();
  result.confidence = 1.0 - std::exp2(-alpha_d * config.iterations);
  for (int i = 0; i < config.iterations; ++i) {
    Rng rng(detail::stream_seed(config.seed, static_cast<std::uint64_t>(i)));
    IterationTrace tr = count_iteration(formula, config, rng);
    if (i == 0 || compare(tr.bound, result.lower_bound) < 0) {
      result.lower_bound = tr.bound;
      result.winning_iteration = i;
    }
    result.iterations.push_back(std::move(tr));
  }
  return result;
}

}  // namespace cbp
