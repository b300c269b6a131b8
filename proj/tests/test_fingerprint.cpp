#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "lipidforge/fingerprint.hpp"
#include "lipidforge/smiles.hpp"
#include "test_util.hpp"

using namespace lf;

TEST_CASE("radius zero on methane sets exactly one bit") {
  Fingerprint fp = morgan_fingerprint(parse_smiles("C"), 0, 1024);
  CHECK(fp.popcount() == 1);
}

TEST_CASE("isomorphic molecules share fingerprints") {
  Fingerprint a = morgan_fingerprint(parse_smiles("CCO"), 2, 1024);
  Fingerprint b = morgan_fingerprint(parse_smiles("OCC"), 2, 1024);
  CHECK(a.words == b.words);
}

TEST_CASE("popcount bounded by distinct atom environments") {
  // environments: one id per atom per round (radius+1 rounds)
  Molecule m = parse_smiles("NCCc1ccncc1");
  Fingerprint fp = morgan_fingerprint(m, 2, 1024);
  int max_envs = static_cast<int>(m.num_atoms()) * 3;
  CHECK(fp.popcount() >= 1);
  CHECK(fp.popcount() <= max_envs);
}

TEST_CASE("permutation invariance of fingerprints") {
  std::mt19937_64 rng(7);
  for (const auto& s : testutil::corpus()) {
    Molecule m = parse_smiles(s);
    Fingerprint ref = morgan_fingerprint(m, 2, 1024);
    for (int i = 0; i < 5; ++i) {
      Molecule p = testutil::permute_atoms(m, rng);
      CHECK(morgan_fingerprint(p, 2, 1024).words == ref.words);
    }
  }
}

TEST_CASE("parameter validation") {
  Molecule m = parse_smiles("CC");
  CHECK_THROWS(morgan_fingerprint(m, -1, 1024));
  CHECK_THROWS(morgan_fingerprint(m, 2, 100));
  CHECK_THROWS(morgan_fingerprint(m, 2, 32));
}

TEST_CASE("tanimoto arithmetic") {
  Fingerprint x = morgan_fingerprint(parse_smiles("NCCO"), 2, 1024);
  CHECK(tanimoto(x, x) == 1.0);

  Fingerprint a, b;
  a.nbits = b.nbits = 64;
  a.words.assign(1, 0);
  b.words.assign(1, 0);
  a.set(0); a.set(1);       // 0b0011
  b.set(1); b.set(2);       // 0b0110
  CHECK(tanimoto(a, b) == Catch::Approx(1.0 / 3.0));

  Fingerprint c, d;
  c.nbits = d.nbits = 64;
  c.words.assign(1, 0);
  d.words.assign(1, 0);
  c.set(3);
  d.set(9);
  CHECK(tanimoto(c, d) == 0.0);
  CHECK(tanimoto(c, d) == tanimoto(d, c));

  Fingerprint e;
  e.nbits = 128;
  e.words.assign(2, 0);
  e.set(0);
  CHECK_THROWS(tanimoto(c, e));  // length mismatch
}
