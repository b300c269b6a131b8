#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "lipidforge/isomorphism.hpp"
#include "lipidforge/reaction.hpp"
#include "test_util.hpp"

using namespace lf;

namespace {

const TemplateRegistry& registry() {
  static TemplateRegistry reg =
      load_templates(std::string(LF_DATA_DIR) + "/reaction_templates.txt");
  return reg;
}

std::map<Element, int> element_counts(const Molecule& m) {
  std::map<Element, int> c;
  for (const Atom& a : m.atoms) ++c[a.element];
  return c;
}

}  // namespace

TEST_CASE("template file loads all templates") {
  const auto& reg = registry();
  CHECK(reg.templates.size() == 13);
  CHECK(reg.find("amide_coupling") != nullptr);
  CHECK(reg.find("no_such_template") == nullptr);
}

TEST_CASE("pattern parse errors") {
  CHECK_THROWS_AS(detail::parse_pattern("[C:1"), TemplateError);
  CHECK_THROWS_AS(detail::parse_pattern("C(C"), TemplateError);
  CHECK_THROWS_AS(detail::parse_pattern("C1CC"), TemplateError);
  CHECK_THROWS_AS(detail::parse_pattern("[Q:1]"), TemplateError);
  CHECK_THROWS_AS(detail::parse_pattern(""), TemplateError);
}

TEST_CASE("template DSL errors carry line numbers") {
  auto write_tmp = [](const std::string& body) {
    std::string path = "/tmp/lf_templates_test.txt";
    std::ofstream out(path);
    out << body;
    return path;
  };
  // duplicate id
  std::string dup =
      "template t1\narity 2\npattern1 [N:1]\npattern2 [C:2]\nbond + 1 2\nend\n"
      "template t1\narity 2\npattern1 [N:3]\npattern2 [C:4]\nbond + 3 4\nend\n";
  CHECK_THROWS_WITH(load_templates(write_tmp(dup)),
                    Catch::Matchers::ContainsSubstring("line 7"));
  // unmapped edit label
  std::string bad_label =
      "template t1\narity 2\npattern1 [N:1]\npattern2 [C:2]\nbond + 1 9\nend\n";
  CHECK_THROWS_AS(load_templates(write_tmp(bad_label)), TemplateError);
  // unterminated block
  CHECK_THROWS_AS(load_templates(write_tmp("template t1\narity 2\n")), TemplateError);
  // empty file warns
  std::vector<std::string> warnings;
  load_templates(write_tmp("# nothing here\n"), &warnings);
  CHECK(warnings.size() == 1);
}

TEST_CASE("amide coupling: amine + acid") {
  Molecule amine = parse_smiles("CCN");
  Molecule acid = parse_smiles("CC(=O)O");
  auto products = enumerate_products(registry(), amine, acid);
  REQUIRE(products.size() == 1);
  CHECK(products[0].first == "amide_coupling");
  const Molecule& p = products[0].second;
  // 3 + 4 reactant atoms minus the water oxygen
  CHECK(p.num_atoms() == 6);
  CHECK(isomorphic(p, parse_smiles("CCNC(C)=O")));
  // hand-checked hydrogen bookkeeping: amide N keeps exactly one H
  for (const Atom& a : p.atoms) {
    if (a.element == Element::N) CHECK(a.implicit_h == 1);
  }
}

TEST_CASE("amide coupling is order independent") {
  Molecule amine = parse_smiles("CCN");
  Molecule acid = parse_smiles("CC(=O)O");
  auto fwd = enumerate_products(registry(), amine, acid);
  auto rev = enumerate_products(registry(), acid, amine);
  REQUIRE(fwd.size() == 1);
  REQUIRE(rev.size() == 1);
  CHECK(canonical_smiles(fwd[0].second) == canonical_smiles(rev[0].second));
}

TEST_CASE("esterification") {
  auto products = enumerate_products(registry(), parse_smiles("CCO"), parse_smiles("CC(=O)O"));
  REQUIRE(products.size() == 1);
  CHECK(products[0].first == "ester_formation");
  CHECK(isomorphic(products[0].second, parse_smiles("CCOC(C)=O")));
}

TEST_CASE("two amine sites give two distinct products") {
  // primary and secondary amines in the same molecule
  Molecule diamine = parse_smiles("NCCNC");
  auto products = enumerate_products(registry(), diamine, parse_smiles("CC(=O)O"));
  REQUIRE(products.size() == 2);
  std::set<std::string> smi;
  for (const auto& [id, p] : products) {
    CHECK(id == "amide_coupling");
    smi.insert(canonical_smiles(p));
  }
  CHECK(smi.size() == 2);
}

TEST_CASE("symmetric diacid gives one deduplicated product") {
  auto products = enumerate_products(registry(), parse_smiles("CCN"),
                                     parse_smiles("OC(=O)CCC(=O)O"));
  REQUIRE(products.size() == 1);
}

TEST_CASE("n-alkylation consumes the halide") {
  auto products = enumerate_products(registry(), parse_smiles("CCN"),
                                     parse_smiles("CCCCCCBr"));
  REQUIRE(products.size() == 1);
  CHECK(products[0].first == "n_alkylation_br");
  CHECK(isomorphic(products[0].second, parse_smiles("CCNCCCCCC")));
  CHECK(element_counts(products[0].second).count(Element::Br) == 0);
}

TEST_CASE("michael addition saturates the acceptor") {
  auto products = enumerate_products(registry(), parse_smiles("CCN"),
                                     parse_smiles("C=CC(=O)OC"));
  REQUIRE(products.size() == 1);
  CHECK(products[0].first == "michael_addition");
  CHECK(isomorphic(products[0].second, parse_smiles("CCNCCC(=O)OC")));
}

TEST_CASE("epoxide opening yields a hydroxyl") {
  auto products = enumerate_products(registry(), parse_smiles("CCN"),
                                     parse_smiles("CCC1CO1"));
  REQUIRE(!products.empty());
  bool found = false;
  for (const auto& [id, p] : products) {
    if (id != "epoxide_amine_opening") continue;
    auto fg = functional_groups(p);
    CHECK(fg.hydroxyl_count == 1);
    found = true;
  }
  CHECK(found);
}

TEST_CASE("urea and carbamate formation") {
  Molecule iso = parse_smiles("CCN=C=O");
  auto urea = enumerate_products(registry(), parse_smiles("CCN"), iso);
  REQUIRE(urea.size() == 1);
  CHECK(urea[0].first == "urea_formation");
  CHECK(isomorphic(urea[0].second, parse_smiles("CCNC(=O)NCC")));

  auto carb = enumerate_products(registry(), parse_smiles("CCO"), iso);
  REQUIRE(carb.size() == 1);
  CHECK(carb[0].first == "carbamate_formation");
  CHECK(isomorphic(carb[0].second, parse_smiles("CCOC(=O)NCC")));
}

TEST_CASE("acyl chloride routes") {
  Molecule acl = parse_smiles("CCC(=O)Cl");
  auto am = enumerate_products(registry(), parse_smiles("CNC"), acl);
  REQUIRE(am.size() == 1);
  CHECK(am[0].first == "acyl_chloride_amide");
  auto es = enumerate_products(registry(), parse_smiles("CCO"), acl);
  REQUIRE(es.size() == 1);
  CHECK(es[0].first == "acyl_chloride_ester");
}

TEST_CASE("amide nitrogen is not a reactive amine") {
  // acetamide N is excluded, so it cannot couple again
  CHECK_FALSE(can_react(registry(), parse_smiles("CC(N)=O"), parse_smiles("CC(=O)O")));
  CHECK(can_react(registry(), parse_smiles("CCN"), parse_smiles("CC(=O)O")));
  CHECK_FALSE(can_react(registry(), parse_smiles("CCC"), parse_smiles("CCCC")));
}

TEST_CASE("tertiary amines cannot alkylate further") {
  CHECK_FALSE(can_react(registry(), parse_smiles("CN(C)C"), parse_smiles("CCBr")));
}

TEST_CASE("matches deduplicates pattern automorphisms") {
  const ReactionTemplate* t = registry().find("amide_coupling");
  REQUIRE(t != nullptr);
  Molecule amine = parse_smiles("CCN");
  Molecule acid = parse_smiles("CC(=O)O");
  auto ms = matches(*t, {&amine, &acid});
  CHECK(ms.size() == 1);
}

TEST_CASE("heavy atoms are conserved across every template") {
  const auto& reg = registry();
  const char* nucleophiles[] = {"CCN", "NCCN", "CNC", "CCO", "OCCO", "NCCO",
                                "NCCc1ccncc1", "CC(C)N", "OCC(O)CO"};
  const char* partners[] = {"CC(=O)O",    "CCCCCC(=O)O", "CCCCBr", "CCCCCCCl",
                            "CCI",        "C=CC(=O)OC",  "CCC1CO1", "CCN=C=O",
                            "CCC(=O)Cl",  "CCCCC=O",     "OC(=O)CCC(=O)O"};
  int checked = 0;
  for (const char* ns : nucleophiles) {
    for (const char* ps : partners) {
      Molecule a = parse_smiles(ns);
      Molecule b = parse_smiles(ps);
      auto sum = element_counts(a);
      for (auto [e, c] : element_counts(b)) sum[e] += c;
      for (const auto& [id, prod] : enumerate_products(reg, a, b)) {
        const ReactionTemplate* t = reg.find(id);
        REQUIRE(t != nullptr);
        int leaves = 0;
        for (const auto& e : t->edits) {
          leaves += e.kind == TemplateEdit::Kind::Leave;
        }
        auto pc = element_counts(prod);
        int missing = 0;
        for (auto [e, c] : sum) {
          int have = pc.count(e) ? pc[e] : 0;
          CHECK(have <= c);
          missing += c - have;
        }
        // only the explicit leaving atoms may disappear
        CHECK(missing == leaves);
        CHECK(prod.connected());
        prod.check_valid();
        ++checked;
      }
    }
  }
  CHECK(checked >= 100);
}
