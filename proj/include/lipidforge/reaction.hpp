#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/descriptors.hpp"
#include "lipidforge/molecule.hpp"
#include "lipidforge/smiles.hpp"

namespace lf {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- substructure patterns -------------------------------------------------

struct PatternAtom {
  std::optional<Element> element;
  std::optional<bool> aromatic;
  int min_h = 0;
  std::optional<int> charge;
  bool halogen = false;
  bool amine = false;  // reactive amine nitrogen (exclusions applied)
  std::optional<bool> in_ring;
  int map = 0;  // 0 = unmapped
};

struct PatternBond {
  int a;
  int b;
  BondOrder order = BondOrder::Single;
  bool any = false;
};

struct Pattern {
  std::vector<PatternAtom> atoms;
  std::vector<PatternBond> bonds;
};

namespace detail {

// Mini linear pattern grammar: atom terms are bare element symbols or
// bracket expressions `[pred;pred;...:map]`; predicates are an element
// symbol, `a`/`A` (aromatic/aliphatic), `X` (halogen), `am` (reactive
// amine), `R`/`!R` (ring membership), `Hn` (minimum hydrogen count) and
// `+`/`-`/`0` (charge). Bonds: default single, `=`, `#`, `~` (any);
// branches in parentheses; single-digit ring closures.
inline Pattern parse_pattern(const std::string& text) {
  Pattern p;
  std::vector<int> stack;
  int prev = -1;
  char pending = 0;
  std::map<int, int> ring_open;

  auto link = [&](int from, int to) {
    PatternBond b;
    b.a = from;
    b.b = to;
    switch (pending) {
      case 0: b.order = BondOrder::Single; break;
      case '=': b.order = BondOrder::Double; break;
      case '#': b.order = BondOrder::Triple; break;
      case '~': b.any = true; break;
    }
    p.bonds.push_back(b);
    pending = 0;
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '(') {
      stack.push_back(prev);
      ++i;
    } else if (c == ')') {
      if (stack.empty()) throw TemplateError("pattern: unmatched ')'");
      prev = stack.back();
      stack.pop_back();
      ++i;
    } else if (c == '=' || c == '#' || c == '~') {
      pending = c;
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      int d = c - '0';
      auto it = ring_open.find(d);
      if (it == ring_open.end()) {
        ring_open[d] = prev;
      } else {
        link(it->second, prev);
        ring_open.erase(it);
      }
      ++i;
    } else if (c == '[') {
      std::size_t close = text.find(']', i);
      if (close == std::string::npos) throw TemplateError("pattern: unmatched '['");
      std::string body = text.substr(i + 1, close - i - 1);
      PatternAtom a;
      auto colon = body.rfind(':');
      if (colon != std::string::npos) {
        a.map = std::stoi(body.substr(colon + 1));
        body = body.substr(0, colon);
      }
      std::stringstream ss(body);
      std::string tok;
      while (std::getline(ss, tok, ';')) {
        if (tok.empty()) continue;
        if (tok == "a") a.aromatic = true;
        else if (tok == "A") a.aromatic = false;
        else if (tok == "X") a.halogen = true;
        else if (tok == "am") a.amine = true;
        else if (tok == "R") a.in_ring = true;
        else if (tok == "!R") a.in_ring = false;
        else if (tok == "+") a.charge = 1;
        else if (tok == "-") a.charge = -1;
        else if (tok == "0") a.charge = 0;
        else if (tok[0] == 'H' && tok.size() >= 2 &&
                 std::isdigit(static_cast<unsigned char>(tok[1]))) {
          a.min_h = tok[1] - '0';
        } else if (auto e = element_from_symbol(tok)) {
          a.element = *e;
        } else {
          throw TemplateError("pattern: unknown predicate '" + tok + "'");
        }
      }
      int idx = static_cast<int>(p.atoms.size());
      p.atoms.push_back(a);
      if (prev >= 0) link(prev, idx);
      prev = idx;
      i = close + 1;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      ++i;
      if (i < n && std::islower(static_cast<unsigned char>(text[i])) &&
          element_from_symbol(sym + text[i])) {
        sym += text[i];
        ++i;
      }
      auto e = element_from_symbol(sym);
      if (!e) throw TemplateError("pattern: unknown element '" + sym + "'");
      PatternAtom a;
      a.element = *e;
      a.aromatic = false;
      int idx = static_cast<int>(p.atoms.size());
      p.atoms.push_back(a);
      if (prev >= 0) link(prev, idx);
      prev = idx;
    } else {
      throw TemplateError(std::string("pattern: unexpected character '") + c + "'");
    }
  }
  if (!stack.empty()) throw TemplateError("pattern: unmatched '('");
  if (!ring_open.empty()) throw TemplateError("pattern: unmatched ring closure");
  if (p.atoms.empty()) throw TemplateError("pattern: empty");
  return p;
}

// Per-molecule context for the `am` predicate.
inline std::vector<char> reactive_amine_mask(const Molecule& m) {
  std::vector<char> mask(m.num_atoms(), 0);
  for (int idx : functional_groups(m).amine_sites) {
    if (!m.atoms[idx].aromatic) mask[idx] = 1;
  }
  return mask;
}

inline bool pattern_atom_matches(const PatternAtom& pa, const Molecule& m, int ai,
                                 const std::vector<char>& amine_mask) {
  const Atom& a = m.atoms[ai];
  if (pa.element && a.element != *pa.element) return false;
  if (pa.aromatic && a.aromatic != *pa.aromatic) return false;
  if (pa.charge && a.formal_charge != *pa.charge) return false;
  if (a.implicit_h < pa.min_h) return false;
  if (pa.halogen && !is_halogen(a.element)) return false;
  if (pa.amine && !amine_mask[ai]) return false;
  if (pa.in_ring && a.in_ring != *pa.in_ring) return false;
  return true;
}

inline bool pattern_bond_matches(const PatternBond& pb, const Bond& b) {
  return pb.any || pb.order == b.order;
}

// All embeddings of `pat` into `mol`, deduplicated by matched atom set plus
// mapped-label assignment (collapses pattern automorphisms).
inline std::vector<std::map<int, int>> match_pattern(const Pattern& pat,
                                                     const Molecule& mol) {
  std::vector<std::map<int, int>> result;
  if (pat.atoms.size() > mol.num_atoms()) return result;
  std::vector<char> amine_mask = reactive_amine_mask(mol);

  std::vector<std::vector<int>> pat_adj(pat.atoms.size());
  for (std::size_t bi = 0; bi < pat.bonds.size(); ++bi) {
    pat_adj[pat.bonds[bi].a].push_back(static_cast<int>(bi));
    pat_adj[pat.bonds[bi].b].push_back(static_cast<int>(bi));
  }

  std::vector<int> assign(pat.atoms.size(), -1);
  std::vector<char> used(mol.num_atoms(), 0);
  std::set<std::pair<std::vector<int>, std::vector<std::pair<int, int>>>> seen;

  auto record = [&]() {
    std::vector<int> all(assign);
    std::sort(all.begin(), all.end());
    std::vector<std::pair<int, int>> mapped;
    for (std::size_t i = 0; i < pat.atoms.size(); ++i) {
      if (pat.atoms[i].map > 0) mapped.push_back({pat.atoms[i].map, assign[i]});
    }
    std::sort(mapped.begin(), mapped.end());
    if (seen.insert({all, mapped}).second) {
      std::map<int, int> binding;
      for (auto [label, atom] : mapped) binding[label] = atom;
      // keep the full assignment under label 0 offsets? bindings carry
      // mapped labels only; unmapped atoms only constrain.
      result.push_back(std::move(binding));
    }
  };

  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == pat.atoms.size()) {
      record();
      return;
    }
    // next pattern atom: prefer one adjacent to the assigned core
    int pi = -1;
    for (std::size_t i = 0; i < pat.atoms.size(); ++i) {
      if (assign[i] >= 0) continue;
      bool frontier = false;
      for (int bi : pat_adj[i]) {
        const PatternBond& pb = pat.bonds[bi];
        int other = pb.a == static_cast<int>(i) ? pb.b : pb.a;
        if (assign[other] >= 0) { frontier = true; break; }
      }
      if (frontier) { pi = static_cast<int>(i); break; }
      if (pi < 0) pi = static_cast<int>(i);
    }
    for (std::size_t mi = 0; mi < mol.num_atoms(); ++mi) {
      if (used[mi]) continue;
      if (!pattern_atom_matches(pat.atoms[pi], mol, static_cast<int>(mi), amine_mask)) {
        continue;
      }
      bool ok = true;
      for (int bi : pat_adj[pi]) {
        const PatternBond& pb = pat.bonds[bi];
        int other = pb.a == pi ? pb.b : pb.a;
        if (assign[other] < 0) continue;
        const Bond* mb = mol.bond_between(static_cast<int>(mi), assign[other]);
        if (!mb || !pattern_bond_matches(pb, *mb)) { ok = false; break; }
      }
      if (!ok) continue;
      assign[pi] = static_cast<int>(mi);
      used[mi] = 1;
      rec(depth + 1);
      assign[pi] = -1;
      used[mi] = 0;
    }
  };
  rec(0);
  return result;
}

}  // namespace detail

// --- reaction templates ----------------------------------------------------

struct TemplateEdit {
  enum class Kind { AddBond, RemoveBond, Leave } kind;
  int label_a = 0;
  int label_b = 0;
  BondOrder order = BondOrder::Single;
};

struct ReactionTemplate {
  std::string id;
  std::string name;
  int arity = 2;
  std::vector<Pattern> reactant_patterns;
  std::vector<TemplateEdit> edits;
  bool tail_consuming = true;
};

// One substructure embedding per reactant slot: label -> (slot, atom index).
struct Binding {
  std::map<int, std::pair<int, int>> map;
};

struct TemplateRegistry {
  std::vector<ReactionTemplate> templates;

  const ReactionTemplate* find(const std::string& id) const {
    for (const auto& t : templates) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
};

namespace detail {

inline void validate_template(const ReactionTemplate& t) {
  std::set<int> labels;
  for (const auto& pat : t.reactant_patterns) {
    for (const auto& a : pat.atoms) {
      if (a.map > 0 && !labels.insert(a.map).second) {
        throw TemplateError("template " + t.id + ": duplicate map label " +
                            std::to_string(a.map));
      }
    }
  }
  for (const auto& e : t.edits) {
    if (!labels.count(e.label_a) ||
        (e.kind != TemplateEdit::Kind::Leave && !labels.count(e.label_b))) {
      throw TemplateError("template " + t.id + ": edit references unmapped label");
    }
  }
  if (t.arity < 1 || t.arity > 2 ||
      static_cast<int>(t.reactant_patterns.size()) != t.arity) {
    throw TemplateError("template " + t.id + ": arity/pattern mismatch");
  }
}

}  // namespace detail

// Loads the template DSL: one block per template, `template <id>` ..
// `end`, with `arity`, `pattern1`/`pattern2`, `bond +|- <a> <b> [order]`,
// `leave <label>` and optional `name`/`tail_consuming` lines.
inline TemplateRegistry load_templates(const std::string& path,
                                       std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw TemplateError("cannot open template file: " + path);
  TemplateRegistry reg;
  std::string line;
  int lineno = 0;
  std::optional<ReactionTemplate> cur;
  std::set<std::string> ids;

  auto fail = [&](const std::string& msg) {
    throw TemplateError("template file line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "template") {
      if (cur) fail("nested template block");
      cur.emplace();
      if (!(ss >> cur->id)) fail("missing template id");
      if (!ids.insert(cur->id).second) fail("duplicate template id " + cur->id);
    } else if (!cur) {
      fail("directive outside template block");
    } else if (key == "name") {
      std::string rest;
      std::getline(ss, rest);
      cur->name = rest.empty() ? "" : rest.substr(rest.find_first_not_of(' '));
    } else if (key == "arity") {
      if (!(ss >> cur->arity)) fail("bad arity");
    } else if (key == "pattern1" || key == "pattern2") {
      std::string expr;
      if (!(ss >> expr)) fail("missing pattern expression");
      int slot = key == "pattern1" ? 0 : 1;
      if (static_cast<int>(cur->reactant_patterns.size()) != slot) {
        fail("patterns must appear in slot order");
      }
      try {
        cur->reactant_patterns.push_back(detail::parse_pattern(expr));
      } catch (const TemplateError& e) {
        fail(e.what());
      }
    } else if (key == "bond") {
      std::string sign;
      TemplateEdit e;
      if (!(ss >> sign >> e.label_a >> e.label_b)) fail("bad bond edit");
      if (sign == "+") e.kind = TemplateEdit::Kind::AddBond;
      else if (sign == "-") e.kind = TemplateEdit::Kind::RemoveBond;
      else fail("bond edit sign must be + or -");
      std::string ord;
      if (ss >> ord) {
        if (ord == "single") e.order = BondOrder::Single;
        else if (ord == "double") e.order = BondOrder::Double;
        else if (ord == "triple") e.order = BondOrder::Triple;
        else fail("unknown bond order " + ord);
      }
      cur->edits.push_back(e);
    } else if (key == "leave") {
      TemplateEdit e;
      e.kind = TemplateEdit::Kind::Leave;
      if (!(ss >> e.label_a)) fail("bad leave edit");
      cur->edits.push_back(e);
    } else if (key == "tail_consuming") {
      std::string v;
      ss >> v;
      cur->tail_consuming = v != "false" && v != "0";
    } else if (key == "end") {
      try {
        detail::validate_template(*cur);
      } catch (const TemplateError& e) {
        fail(e.what());
      }
      reg.templates.push_back(std::move(*cur));
      cur.reset();
    } else {
      fail("unknown directive " + key);
    }
  }
  if (cur) throw TemplateError("unterminated template block: " + cur->id);
  if (reg.templates.empty() && warnings) {
    warnings->push_back("template file contains no templates: " + path);
  }
  return reg;
}

// All distinct embeddings of the template's patterns into the reactants.
inline std::vector<Binding> matches(const ReactionTemplate& t,
                                    const std::vector<const Molecule*>& reactants) {
  if (static_cast<int>(reactants.size()) != t.arity) {
    throw TemplateError("template " + t.id + ": reactant count mismatch");
  }
  std::vector<std::vector<std::map<int, int>>> per_slot;
  for (int s = 0; s < t.arity; ++s) {
    per_slot.push_back(detail::match_pattern(t.reactant_patterns[s], *reactants[s]));
    if (per_slot.back().empty()) return {};
  }
  std::vector<Binding> out;
  if (t.arity == 1) {
    for (const auto& e : per_slot[0]) {
      Binding b;
      for (auto [label, atom] : e) b.map[label] = {0, atom};
      out.push_back(std::move(b));
    }
    return out;
  }
  for (const auto& e0 : per_slot[0]) {
    for (const auto& e1 : per_slot[1]) {
      Binding b;
      for (auto [label, atom] : e0) b.map[label] = {0, atom};
      for (auto [label, atom] : e1) b.map[label] = {1, atom};
      out.push_back(std::move(b));
    }
  }
  return out;
}

class ApplyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Applies the template's graph edits to the combined reactants. Throws
// ApplyError when the edit sequence is not valence-feasible or the product
// is disconnected.
inline Molecule apply(const ReactionTemplate& t,
                      const std::vector<const Molecule*>& reactants,
                      const Binding& binding) {
  // combine reactants into one working graph
  Molecule work;
  std::vector<int> offset(reactants.size(), 0);
  for (std::size_t r = 0; r < reactants.size(); ++r) {
    offset[r] = static_cast<int>(work.atoms.size());
    for (const Atom& a : reactants[r]->atoms) work.atoms.push_back(a);
    for (const Bond& b : reactants[r]->bonds) {
      work.bonds.push_back({b.a + offset[r], b.b + offset[r], b.order});
    }
  }
  std::vector<char> alive(work.atoms.size(), 1);

  auto resolve = [&](int label) {
    auto it = binding.map.find(label);
    if (it == binding.map.end()) {
      throw ApplyError("binding missing label " + std::to_string(label));
    }
    return offset[it->second.first] + it->second.second;
  };

  auto h_of = [&](BondOrder o) { return bond_valence_x2(o) / 2; };

  for (const TemplateEdit& e : t.edits) {
    switch (e.kind) {
      case TemplateEdit::Kind::RemoveBond: {
        int a = resolve(e.label_a), b = resolve(e.label_b);
        auto it = std::find_if(work.bonds.begin(), work.bonds.end(), [&](const Bond& bd) {
          return (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a);
        });
        if (it == work.bonds.end()) throw ApplyError("bond to remove not present");
        int restore = h_of(it->order);
        work.atoms[a].implicit_h += restore;
        work.atoms[b].implicit_h += restore;
        work.bonds.erase(it);
        break;
      }
      case TemplateEdit::Kind::Leave: {
        int a = resolve(e.label_a);
        for (const Bond& bd : work.bonds) {
          if (bd.a == a || bd.b == a) {
            throw ApplyError("leaving atom still bonded");
          }
        }
        alive[a] = 0;
        break;
      }
      case TemplateEdit::Kind::AddBond: {
        int a = resolve(e.label_a), b = resolve(e.label_b);
        if (!alive[a] || !alive[b]) throw ApplyError("bond to deleted atom");
        for (const Bond& bd : work.bonds) {
          if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) {
            throw ApplyError("bond already present");
          }
        }
        int need = h_of(e.order);
        if (work.atoms[a].implicit_h < need || work.atoms[b].implicit_h < need) {
          throw ApplyError("valence violation: no hydrogen to displace");
        }
        work.atoms[a].implicit_h -= need;
        work.atoms[b].implicit_h -= need;
        work.bonds.push_back({a, b, e.order});
        break;
      }
    }
  }

  // compact deleted atoms
  Molecule product;
  std::vector<int> remap(work.atoms.size(), -1);
  for (std::size_t i = 0; i < work.atoms.size(); ++i) {
    if (alive[i]) {
      remap[i] = static_cast<int>(product.atoms.size());
      product.atoms.push_back(work.atoms[i]);
    }
  }
  for (const Bond& b : work.bonds) {
    if (remap[b.a] < 0 || remap[b.b] < 0) throw ApplyError("dangling bond");
    product.bonds.push_back({remap[b.a], remap[b.b], b.order});
  }
  product.finalize();
  if (!product.connected()) throw ApplyError("disconnected product");
  for (std::size_t i = 0; i < product.num_atoms(); ++i) {
    const Atom& a = product.atoms[i];
    // Aromatic atoms are never edited by templates; their pi electrons are
    // accounted by the parser, so only the sigma framework is bounded here.
    // Summing 1.5 per aromatic bond would overcount pyrrole-type nitrogen,
    // whose third connection displaces the ring double bond, not a hydrogen.
    int used = a.aromatic
                   ? product.degree(static_cast<int>(i)) + a.implicit_h
                   : (product.bond_valence_sum_x2(static_cast<int>(i)) + 1) / 2 +
                         a.implicit_h;
    if (used > element_info(a.element).max_valence + std::max(0, a.formal_charge)) {
      throw ApplyError("valence violation in product");
    }
  }
  product.check_valid();
  return product;
}

// Deterministic forward enumeration: every (template, binding) product of
// state+block in either reactant order, deduplicated by canonical SMILES
// and sorted by (template order, canonical SMILES).
inline std::vector<std::pair<std::string, Molecule>> enumerate_products(
    const TemplateRegistry& reg, const Molecule& state, const Molecule& block) {
  struct Entry {
    std::size_t template_order;
    std::string template_id;
    std::string smiles;
    Molecule product;
  };
  std::vector<Entry> entries;
  for (std::size_t ti = 0; ti < reg.templates.size(); ++ti) {
    const ReactionTemplate& t = reg.templates[ti];
    if (t.arity != 2) continue;
    const std::array<std::vector<const Molecule*>, 2> orders = {
        std::vector<const Molecule*>{&state, &block},
        std::vector<const Molecule*>{&block, &state}};
    for (const auto& reactants : orders) {
      for (const Binding& b : matches(t, reactants)) {
        try {
          Molecule prod = apply(t, reactants, b);
          entries.push_back({ti, t.id, canonical_smiles(prod), std::move(prod)});
        } catch (const ApplyError&) {
          // infeasible embedding, skip
        }
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return std::tie(x.template_order, x.smiles) < std::tie(y.template_order, y.smiles);
  });
  std::vector<std::pair<std::string, Molecule>> out;
  std::set<std::string> seen;
  for (auto& e : entries) {
    if (seen.insert(e.smiles).second) {
      out.push_back({e.template_id, std::move(e.product)});
    }
  }
  return out;
}

inline bool can_react(const TemplateRegistry& reg, const Molecule& state,
                      const Molecule& block) {
  for (const ReactionTemplate& t : reg.templates) {
    if (t.arity != 2) continue;
    const std::array<std::vector<const Molecule*>, 2> orders = {
        std::vector<const Molecule*>{&state, &block},
        std::vector<const Molecule*>{&block, &state}};
    for (const auto& reactants : orders) {
      for (const Binding& b : matches(t, reactants)) {
        try {
          apply(t, reactants, b);
          return true;
        } catch (const ApplyError&) {
        }
      }
    }
  }
  return false;
}

}  // namespace lf
