#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cbp/dmln.hpp"
#include "support.hpp"

using namespace cbp;
using Catch::Approx;

namespace {

// Independent grounding-size oracle: walk every template and count.
struct Sizes {
  long long atoms = 0;
  long long factors = 0;
};

Sizes enumerate_sizes(int n, int t, bool reflexive) {
  Sizes s;
  long long pairs = reflexive ? static_cast<long long>(n) * n : static_cast<long long>(n) * (n - 1);
  s.atoms = (2ll * n + pairs) * t;
  s.factors = 0;
  s.factors += 2ll * n + pairs;              // t=0 priors
  s.factors += static_cast<long long>(n) * t;  // smokes => cancer
  s.factors += pairs * t;                    // friendship similarity
  s.factors += pairs * (t - 1);              // friends persist
  s.factors += static_cast<long long>(n) * (t - 1);  // smokers persist
  return s;
}

}  // namespace

TEST_CASE("grounding size for the two-person two-step model") {
  DmlnSpec spec;
  spec.num_people = 2;
  spec.num_timesteps = 2;
  FactorGraph g = ground_dmln(spec);
  REQUIRE(g.num_variables() == 16);  // 4 Smokes + 4 Cancer + 8 Friends
  REQUIRE(g.num_factors() == 26);    // 8 priors + 4 SC + 8 similarity + 4 + 2 persistence
}

TEST_CASE("grounding sizes match independent enumeration") {
  for (int n = 1; n <= 5; ++n)
    for (int t = 1; t <= 4; ++t)
      for (bool reflexive : {true, false}) {
        DmlnSpec spec;
        spec.num_people = n;
        spec.num_timesteps = t;
        spec.include_reflexive_friends = reflexive;
        FactorGraph g = ground_dmln(spec);
        Sizes want = enumerate_sizes(n, t, reflexive);
        INFO("n " << n << " t " << t << " reflexive " << reflexive);
        REQUIRE(g.num_variables() == want.atoms);
        REQUIRE(g.num_factors() == want.factors);
      }
}

TEST_CASE("the no-smoking prior grounds to the expected log-linear table") {
  DmlnSpec spec;
  spec.num_people = 1;
  spec.num_timesteps = 1;
  spec.include_reflexive_friends = false;
  FactorGraph g = ground_dmln(spec);
  // Smokes prior first: [e^1.4 (false), 1 (true)].
  const Potential& t = g.factor(0).table;
  REQUIRE(t.values()[0] == Approx(std::exp(1.4)));
  REQUIRE(t.values()[1] == 1.0);
}

TEST_CASE("evidence generation respects the observed fraction") {
  DmlnSpec spec;
  DmlnIndex idx(spec);
  SECTION("no observations at r=0") {
    REQUIRE(generate_evidence(spec, {0.0, 5, 1}).empty());
  }
  SECTION("full observation at r=1") {
    Evidence ev = generate_evidence(spec, {1.0, 5, 1});
    int smokes = 0, friends = 0, cancer = 0;
    for (auto [v, s] : ev) {
      std::string label = ground_dmln(spec).variable(v).label;
      if (label.starts_with("Smokes")) ++smokes;
      if (label.starts_with("Friends")) {
        ++friends;
        REQUIRE(s == 1);
      }
      if (label.starts_with("Cancer")) ++cancer;
    }
    REQUIRE(smokes == 20);
    REQUIRE(friends == 100);
    REQUIRE(cancer == 0);
  }
  SECTION("a quarter of twenty people is five") {
    Evidence ev = generate_evidence(spec, {0.25, 5, 7});
    int smokes = 0;
    FactorGraph g = ground_dmln(spec);
    for (auto [v, s] : ev)
      if (g.variable(v).label.starts_with("Smokes")) ++smokes;
    REQUIRE(smokes == 5);
  }
  SECTION("too many friends requested") {
    DmlnSpec tiny;
    tiny.num_people = 3;
    tiny.include_reflexive_friends = false;
    REQUIRE_THROWS_AS(generate_evidence(tiny, {1.0, 5, 1}), ValidationError);
  }
}

TEST_CASE("FF and LFOFF agree on a small model") {
  DmlnSpec spec;
  spec.num_people = 4;
  spec.num_timesteps = 3;
  for (double r : {0.0, 0.5, 1.0}) {
    DmlnEvidenceSpec espec;
    espec.fraction = r;
    espec.friends_per_person = 2;
    espec.seed = 99;
    ComparisonReport rep = run_comparison(spec, espec, 1);
    INFO("r = " << r);
    REQUIRE(rep.max_belief_diff <= 1e-6);
    REQUIRE(rep.ratio_messages <= 1.0);
    REQUIRE(rep.cancer.size() == 12);
  }
}

TEST_CASE("FF and LFOFF still agree after several sweeps") {
  DmlnSpec spec;
  spec.num_people = 3;
  spec.num_timesteps = 3;
  DmlnEvidenceSpec espec;
  espec.fraction = 0.5;
  espec.friends_per_person = 1;
  espec.seed = 5;
  ComparisonReport rep = run_comparison(spec, espec, 5);
  REQUIRE(rep.max_belief_diff <= 1e-6);
}

TEST_CASE("full symmetry compresses people away at r=0") {
  DmlnSpec spec;
  spec.num_people = 8;
  spec.num_timesteps = 4;
  ComparisonReport rep = run_comparison(spec, {0.0, 0, 1}, 1);
  REQUIRE(rep.ratio_messages < 0.5);
  // Breaking the symmetry with full evidence costs messages.
  DmlnEvidenceSpec full;
  full.fraction = 1.0;
  full.friends_per_person = 3;
  full.seed = 1;
  ComparisonReport rep_full = run_comparison(spec, full, 1);
  REQUIRE(rep_full.ratio_messages >= rep.ratio_messages);
}

TEST_CASE("spec validation") {
  DmlnSpec spec;
  spec.num_people = 0;
  REQUIRE_THROWS_AS(ground_dmln(spec), ValidationError);
  DmlnSpec ok;
  DmlnEvidenceSpec bad;
  bad.fraction = 1.5;
  REQUIRE_THROWS_AS(generate_evidence(ok, bad), ValidationError);
}
