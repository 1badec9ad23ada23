#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cbp/bp.hpp"
#include "cbp/cbp.hpp"
#include "cbp/lifting.hpp"
#include "cbp/model_count.hpp"

namespace cbp {

/// The dynamic smokers model: per-timestep Smokes/Cancer/Friends atoms,
/// weighted clauses for the t=0 priors, smoking-causes-cancer, friends-have-
/// similar-habits, and the two persistence clauses.
struct DmlnSpec {
  int num_people = 20;
  int num_timesteps = 10;
  // not-smokes prior, not-cancer prior, not-friends prior,
  // smokes=>cancer, friends=>similar smoking, friends persist, smokers persist
  std::array<double, 7> weights = {1.4, 2.3, 4.6, 2.0, 2.0, 5.0, 5.0};
  bool include_reflexive_friends = true;

  void validate() const {
    if (num_people < 1) throw ValidationError("num_people must be >= 1");
    if (num_timesteps < 1) throw ValidationError("num_timesteps must be >= 1");
    for (double w : weights)
      if (!std::isfinite(w)) throw ValidationError("clause weights must be finite");
  }
};

struct DmlnEvidenceSpec {
  double fraction = 0.0;       // observed share of people
  int friends_per_person = 5;  // positive Friends observations per observed person
  std::uint64_t seed = 0;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in [0,1]");
    if (friends_per_person < 0) throw ValidationError("friends_per_person must be >= 0");
  }
};

/// Atom ids of one grounding, laid out time-major (all atoms of timestep t
/// before t+1) and Smokes, Cancer, Friends within a timestep. Variable ids in
/// this order double as the forwards-backwards node order.
class DmlnIndex {
 public:
  explicit DmlnIndex(const DmlnSpec& spec)
      : n_(spec.num_people), t_(spec.num_timesteps), reflexive_(spec.include_reflexive_friends) {
    pairs_per_t_ = reflexive_ ? n_ * n_ : n_ * (n_ - 1);
    per_t_ = 2 * n_ + pairs_per_t_;
  }

  int num_people() const { return n_; }
  int num_timesteps() const { return t_; }
  int num_atoms() const { return per_t_ * t_; }
  int pairs_per_timestep() const { return pairs_per_t_; }

  VarId smokes(int x, int t) const { return t * per_t_ + x; }
  VarId cancer(int x, int t) const { return t * per_t_ + n_ + x; }
  VarId friends(int x, int y, int t) const {
    int pair;
    if (reflexive_) {
      pair = x * n_ + y;
    } else {
      pair = x * (n_ - 1) + (y < x ? y : y - 1);
    }
    return t * per_t_ + 2 * n_ + pair;
  }

 private:
  int n_, t_, reflexive_, pairs_per_t_, per_t_;
};

namespace detail {

/// Log-linear clause factor: exp(w) where the clause holds, 1 elsewhere.
/// `truth` sees the boolean states of the distinct atoms in `args`.
template <typename TruthFn>
Factor clause_factor(FactorId id, std::vector<VarId> args, double weight, TruthFn truth) {
  std::vector<int> cards(args.size(), 2);
  std::size_t size = static_cast<std::size_t>(1) << args.size();
  std::vector<double> values(size, 1.0);
  double ew = std::exp(weight);
  std::vector<bool> st(args.size());
  for (std::size_t flat = 0; flat < size; ++flat) {
    for (std::size_t p = 0; p < args.size(); ++p)
      st[p] = ((flat >> (args.size() - 1 - p)) & 1) != 0;  // arg 0 most significant
    if (truth(st)) values[flat] = ew;
  }
  Factor f;
  f.id = id;
  f.args = std::move(args);
  f.table = Potential(std::move(cards), std::move(values));
  return f;
}

}  // namespace detail

/// Grounds the model: one binary variable per atom, one factor per ground
/// clause. Inter-time clauses ground for t with t+1 < T; everything else for
/// every timestep.
inline FactorGraph ground_dmln(const DmlnSpec& spec) {
  spec.validate();
  DmlnIndex idx(spec);
  int n = spec.num_people, tmax = spec.num_timesteps;

  std::vector<Variable> vars(static_cast<std::size_t>(idx.num_atoms()));
  for (int t = 0; t < tmax; ++t) {
    for (int x = 0; x < n; ++x) {
      VarId s = idx.smokes(x, t);
      vars[static_cast<std::size_t>(s)] = {s, 2, "Smokes(" + std::to_string(x) + "," + std::to_string(t) + ")"};
      VarId c = idx.cancer(x, t);
      vars[static_cast<std::size_t>(c)] = {c, 2, "Cancer(" + std::to_string(x) + "," + std::to_string(t) + ")"};
      for (int y = 0; y < n; ++y) {
        if (x == y && !spec.include_reflexive_friends) continue;
        VarId f = idx.friends(x, y, t);
        vars[static_cast<std::size_t>(f)] = {f, 2,
                                             "Friends(" + std::to_string(x) + "," + std::to_string(y) +
                                                 "," + std::to_string(t) + ")"};
      }
    }
  }

  std::vector<Factor> factors;
  auto next_id = [&] { return static_cast<FactorId>(factors.size()); };
  const auto& w = spec.weights;
  for (int t = 0; t < tmax; ++t) {
    if (t == 0) {
      for (int x = 0; x < n; ++x)
        factors.push_back(detail::clause_factor(next_id(), {idx.smokes(x, 0)}, w[0],
                                                [](const std::vector<bool>& s) { return !s[0]; }));
      for (int x = 0; x < n; ++x)
        factors.push_back(detail::clause_factor(next_id(), {idx.cancer(x, 0)}, w[1],
                                                [](const std::vector<bool>& s) { return !s[0]; }));
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
          if (x == y && !spec.include_reflexive_friends) continue;
          factors.push_back(detail::clause_factor(next_id(), {idx.friends(x, y, 0)}, w[2],
                                                  [](const std::vector<bool>& s) { return !s[0]; }));
        }
    }
    for (int x = 0; x < n; ++x)
      factors.push_back(detail::clause_factor(
          next_id(), {idx.smokes(x, t), idx.cancer(x, t)}, w[3],
          [](const std::vector<bool>& s) { return !s[0] || s[1]; }));
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        if (x == y) {
          if (!spec.include_reflexive_friends) continue;
          // Friends(x,x,t) => (Smokes(x,t) <=> Smokes(x,t)) holds vacuously.
          factors.push_back(detail::clause_factor(next_id(),
                                                  {idx.friends(x, x, t), idx.smokes(x, t)}, w[4],
                                                  [](const std::vector<bool>&) { return true; }));
        } else {
          factors.push_back(detail::clause_factor(
              next_id(), {idx.friends(x, y, t), idx.smokes(x, t), idx.smokes(y, t)}, w[4],
              [](const std::vector<bool>& s) { return !s[0] || s[1] == s[2]; }));
        }
      }
    if (t + 1 < tmax) {
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
          if (x == y && !spec.include_reflexive_friends) continue;
          factors.push_back(detail::clause_factor(
              next_id(), {idx.friends(x, y, t), idx.friends(x, y, t + 1)}, w[5],
              [](const std::vector<bool>& s) { return s[0] == s[1]; }));
        }
      for (int x = 0; x < n; ++x)
        factors.push_back(detail::clause_factor(
            next_id(), {idx.smokes(x, t), idx.smokes(x, t + 1)}, w[6],
            [](const std::vector<bool>& s) { return s[0] == s[1]; }));
    }
  }
  return FactorGraph::build(std::move(vars), std::move(factors));
}

/// Observations for a random share of the people: one random timestep per
/// observed person carrying a random Smokes value plus `friends_per_person`
/// positive Friends observations. Cancer stays unobserved everywhere.
inline Evidence generate_evidence(const DmlnSpec& spec, const DmlnEvidenceSpec& espec) {
  spec.validate();
  espec.validate();
  DmlnIndex idx(spec);
  int n = spec.num_people;
  int pool = spec.include_reflexive_friends ? n : n - 1;
  if (espec.friends_per_person > pool)
    throw ValidationError("friends_per_person exceeds the available people");
  int k = static_cast<int>(std::ceil(espec.fraction * n - 1e-9));
  if (k < 0) k = 0;
  if (k > n) k = n;
  Rng rng(espec.seed);
  Evidence ev;
  for (int x : rng.sample(n, k)) {
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_timesteps)));
    ev[idx.smokes(x, t)] = rng.coin() ? 1 : 0;
    std::vector<int> targets;
    for (int y = 0; y < n; ++y)
      if (y != x || spec.include_reflexive_friends) targets.push_back(y);
    for (int j : rng.sample(static_cast<int>(targets.size()), espec.friends_per_person))
      ev[idx.friends(x, targets[static_cast<std::size_t>(j)], t)] = 1;
  }
  return ev;
}

struct CancerBelief {
  int person = 0;
  int timestep = 0;
  double p_ff = 0.0;     // P(Cancer) under FF
  double p_lfoff = 0.0;  // P(Cancer) under LFOFF
};

struct ComparisonReport {
  long long edges_ff = 0;
  long long edges_lfoff = 0;
  long long messages_ff = 0;
  long long messages_lfoff = 0;
  double ratio_edges = 1.0;
  double ratio_messages = 1.0;
  double max_belief_diff = 0.0;
  int sweeps = 0;
  std::vector<CancerBelief> cancer;
};

/// FF (BP, forwards-backwards schedule) against LFOFF (compress + counting BP,
/// same schedule and sweep budget). Fails loudly if the Cancer beliefs
/// diverge beyond 1e-6.
inline ComparisonReport run_comparison(const DmlnSpec& spec, const DmlnEvidenceSpec& espec,
                                       int sweeps = 1) {
  if (sweeps < 1) throw ValidationError("sweeps must be >= 1");
  FactorGraph g = ground_dmln(spec);
  Evidence ev = generate_evidence(spec, espec);

  BpConfig cfg;
  cfg.damping = 0.0;  // plain factored-frontier message passing
  cfg.tolerance = 1e-300;
  cfg.max_sweeps = sweeps;
  cfg.schedule = Schedule::ForwardsBackwards;  // variable ids are FB-ordered

  BpRun ff(g, ev, cfg);
  ff.run();
  Beliefs b_ff = ff.beliefs();

  CompressedFactorGraph cg = compress(g, ev, PositionMode::Commutative);
  CbpRun lfoff(cg, cfg);
  lfoff.run();
  Beliefs b_lfoff = lfoff.beliefs();

  ComparisonReport rep;
  rep.sweeps = sweeps;
  rep.edges_ff = g.edge_count();
  rep.edges_lfoff = static_cast<long long>(cg.edges.size());
  rep.messages_ff = ff.stats().messages;
  rep.messages_lfoff = lfoff.stats().messages;
  rep.ratio_edges = static_cast<double>(rep.edges_lfoff) / static_cast<double>(rep.edges_ff);
  rep.ratio_messages = static_cast<double>(rep.messages_lfoff) / static_cast<double>(rep.messages_ff);

  DmlnIndex idx(spec);
  for (int t = 0; t < spec.num_timesteps; ++t)
    for (int x = 0; x < spec.num_people; ++x) {
      VarId c = idx.cancer(x, t);
      const auto& ba = b_ff[static_cast<std::size_t>(c)];
      const auto& bb = b_lfoff[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < ba.size(); ++i)
        rep.max_belief_diff = std::max(rep.max_belief_diff, std::abs(ba[i] - bb[i]));
      rep.cancer.push_back({x, t, ba[1], bb[1]});
    }
  if (rep.max_belief_diff > 1e-6)
    throw Error("FF and LFOFF beliefs diverge by " + std::to_string(rep.max_belief_diff) +
                " (> 1e-6)");
  return rep;
}

}  // namespace cbp
