#include <catch2/catch_amalgamated.hpp>

#include "lipidforge/descriptors.hpp"
#include "lipidforge/smiles.hpp"
#include "test_util.hpp"

using namespace lf;

TEST_CASE("molecular weight") {
  CHECK(molecular_weight(parse_smiles("C")) == Catch::Approx(16.04).margin(0.01));
  CHECK(molecular_weight(parse_smiles("O")) == Catch::Approx(18.02).margin(0.01));
  CHECK(molecular_weight(parse_smiles("CCO")) == Catch::Approx(46.07).margin(0.01));
  CHECK_THROWS(parse_smiles(""));  // no zero-mass molecules exist
}

TEST_CASE("logP sign checks") {
  CHECK(log_p(parse_smiles("CCCCCCCCCCCCCCCC")) > 0.0);  // hexadecane
  CHECK(log_p(parse_smiles("NCCO")) < 0.0);              // ethanolamine
  CHECK(log_p(parse_smiles("CCCCCCCC")) > log_p(parse_smiles("CCCC")));
}

TEST_CASE("logP strictly increases with chain extension") {
  std::string s = "CCCC";
  double prev = log_p(parse_smiles(s));
  for (int i = 0; i < 6; ++i) {
    s += "C";
    double cur = log_p(parse_smiles(s));
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("shipped logP table matches embedded defaults") {
  LogPTable file = LogPTable::load(std::string(LF_DATA_DIR) + "/logp_contrib.txt");
  CHECK(file.entries() == LogPTable::defaults().entries());
}

TEST_CASE("logP permutation invariance") {
  std::mt19937_64 rng(3);
  for (const auto& s : testutil::corpus()) {
    Molecule m = parse_smiles(s);
    double ref = log_p(m);
    double w = molecular_weight(m);
    for (int i = 0; i < 3; ++i) {
      Molecule p = testutil::permute_atoms(m, rng);
      CHECK(log_p(p) == Catch::Approx(ref).epsilon(1e-12));
      CHECK(molecular_weight(p) == Catch::Approx(w).epsilon(1e-12));
    }
  }
}

TEST_CASE("functional groups: glycine") {
  auto r = functional_groups(parse_smiles("NCC(=O)O"));
  CHECK(r.carboxyl_count == 1);
  CHECK(r.hydroxyl_count == 0);
  CHECK(r.amine_count == 1);
}

TEST_CASE("functional groups: amide exclusion") {
  auto r = functional_groups(parse_smiles("CC(N)=O"));  // acetamide
  CHECK(r.amine_count == 0);
  REQUIRE(r.excluded_amine_sites.size() == 1);
  CHECK(r.excluded_amine_sites[0].reason == AmineExclusion::AmideAdjacent);
}

TEST_CASE("functional groups: ethanol") {
  auto r = functional_groups(parse_smiles("CCO"));
  CHECK(r.hydroxyl_count == 1);
  CHECK(r.carboxyl_count == 0);
  CHECK(r.amine_count == 0);
}

TEST_CASE("functional groups: N-N and quaternary exclusions") {
  auto hydrazine = functional_groups(parse_smiles("CNNC"));
  CHECK(hydrazine.amine_count == 0);
  CHECK(hydrazine.excluded_amine_sites.size() == 2);
  CHECK(hydrazine.excluded_amine_sites[0].reason == AmineExclusion::NNLinked);

  auto tma = functional_groups(parse_smiles("C[N+](C)(C)C"));
  CHECK(tma.amine_count == 0);
  REQUIRE(tma.excluded_amine_sites.size() == 1);
  CHECK(tma.excluded_amine_sites[0].reason == AmineExclusion::Quaternary);
}

TEST_CASE("functional groups: amine classes and counts") {
  CHECK(functional_groups(parse_smiles("CCN")).amine_count == 1);
  CHECK(functional_groups(parse_smiles("CNC")).amine_count == 1);
  CHECK(functional_groups(parse_smiles("CN(C)C")).amine_count == 1);
  CHECK(functional_groups(parse_smiles("NCCN")).amine_count == 2);
  // pyridine N counts, pyrrole NH does not
  CHECK(functional_groups(parse_smiles("c1ccncc1")).amine_count == 1);
  CHECK(functional_groups(parse_smiles("c1cc[nH]c1")).amine_count == 0);
}

TEST_CASE("functional group counts invariant under reordering") {
  std::mt19937_64 rng(11);
  for (const char* s : {"NCC(=O)O", "NCCNCCO", "OC(=O)CCC(=O)O", "NCCc1ccncc1"}) {
    Molecule m = parse_smiles(s);
    auto ref = functional_groups(m);
    for (int i = 0; i < 5; ++i) {
      auto r = functional_groups(testutil::permute_atoms(m, rng));
      CHECK(r.carboxyl_count == ref.carboxyl_count);
      CHECK(r.hydroxyl_count == ref.hydroxyl_count);
      CHECK(r.amine_count == ref.amine_count);
    }
  }
}

TEST_CASE("carboxyl oxygens are not double counted as hydroxyl") {
  auto r = functional_groups(parse_smiles("OC(=O)CCC(=O)O"));
  CHECK(r.carboxyl_count == 2);
  CHECK(r.hydroxyl_count == 0);
}
