#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lipidforge/molecule.hpp"

namespace lf {

class SmilesError : public std::runtime_error {
 public:
  SmilesError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"),
        position(pos) {}
  std::size_t position;
};

namespace detail {

struct PendingBond {
  bool present = false;
  BondOrder order = BondOrder::Single;
  bool explicit_single = false;
};

inline int allowed_valence(Element e, int used) {
  // smallest standard valence that accommodates the bonds present
  if (e == Element::P) return used > 3 ? 5 : 3;
  if (e == Element::S) return used > 4 ? 6 : (used > 2 ? 4 : 2);
  return element_info(e).default_valence;
}

// Hydrogen count inferred for a bracket-free atom. Aromatic atoms follow the
// Daylight convention: one valence slot is reserved for the pi system, so
// pyrrole-type NH must be written [nH].
inline int infer_implicit_h(const Molecule& m, int atom) {
  const Atom& a = m.atoms[atom];
  if (a.aromatic) {
    return std::max(0, element_info(a.element).default_valence - (m.degree(atom) + 1));
  }
  int used = (m.bond_valence_sum_x2(atom) + 1) / 2;
  return std::max(0, allowed_valence(a.element, used) - used);
}

}  // namespace detail

// Parses the organic-subset SMILES dialect: bracket atoms with charge and
// explicit H, branches, ring closures (incl. %nn), bond symbols - = # :,
// aromatic lowercase. Stereo marks (/ \ @) are discarded with a warning.
inline Molecule parse_smiles(std::string_view text,
                             std::vector<std::string>* warnings = nullptr) {
  if (text.empty()) throw SmilesError("empty SMILES", 0);

  Molecule mol;
  std::vector<char> bracket(0);  // per-atom: explicit H given, skip inference
  std::vector<int> stack;
  int prev = -1;
  detail::PendingBond pending;
  struct RingOpen {
    int atom;
    detail::PendingBond bond;
    std::size_t pos;
  };
  std::map<int, RingOpen> ring_open;

  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  auto add_atom = [&](Element e, bool aromatic, int charge, int hcount,
                      bool is_bracket, std::size_t pos) {
    if (aromatic && !aromatic_capable(e)) {
      throw SmilesError("element cannot be aromatic", pos);
    }
    Atom a;
    a.element = e;
    a.aromatic = aromatic;
    a.formal_charge = charge;
    a.implicit_h = hcount;
    int idx = static_cast<int>(mol.atoms.size());
    mol.atoms.push_back(a);
    bracket.push_back(is_bracket ? 1 : 0);
    if (prev >= 0) {
      BondOrder order;
      if (pending.present) {
        order = pending.order;
      } else if (mol.atoms[prev].aromatic && aromatic) {
        order = BondOrder::Aromatic;  // demoted later if not in a ring
      } else {
        order = BondOrder::Single;
      }
      mol.bonds.push_back({prev, idx, order});
    }
    pending = {};
    prev = idx;
  };

  auto close_ring = [&](int number, std::size_t pos) {
    if (prev < 0) throw SmilesError("ring closure before any atom", pos);
    auto it = ring_open.find(number);
    if (it == ring_open.end()) {
      ring_open[number] = {prev, pending, pos};
      pending = {};
      return;
    }
    RingOpen open = it->second;
    ring_open.erase(it);
    if (open.atom == prev) throw SmilesError("ring closure to same atom", pos);
    BondOrder order;
    if (pending.present && open.bond.present &&
        pending.order != open.bond.order) {
      throw SmilesError("conflicting ring-closure bond orders", pos);
    }
    if (pending.present) {
      order = pending.order;
    } else if (open.bond.present) {
      order = open.bond.order;
    } else if (mol.atoms[open.atom].aromatic && mol.atoms[prev].aromatic) {
      order = BondOrder::Aromatic;
    } else {
      order = BondOrder::Single;
    }
    for (const Bond& b : mol.bonds) {
      if ((b.a == open.atom && b.b == prev) || (b.a == prev && b.b == open.atom)) {
        throw SmilesError("duplicate ring-closure bond", pos);
      }
    }
    mol.bonds.push_back({open.atom, prev, order});
    pending = {};
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '(') {
      if (prev < 0) throw SmilesError("branch before any atom", i);
      stack.push_back(prev);
      ++i;
    } else if (c == ')') {
      if (stack.empty()) throw SmilesError("unmatched ')'", i);
      prev = stack.back();
      stack.pop_back();
      ++i;
    } else if (c == '-') {
      pending = {true, BondOrder::Single, true};
      ++i;
    } else if (c == '=') {
      pending = {true, BondOrder::Double, false};
      ++i;
    } else if (c == '#') {
      pending = {true, BondOrder::Triple, false};
      ++i;
    } else if (c == ':') {
      pending = {true, BondOrder::Aromatic, false};
      ++i;
    } else if (c == '/' || c == '\\') {
      warn("stereo bond mark discarded");
      pending = {true, BondOrder::Single, false};
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      close_ring(c - '0', i);
      ++i;
    } else if (c == '%') {
      if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text[i + 2]))) {
        throw SmilesError("malformed %nn ring closure", i);
      }
      close_ring((text[i + 1] - '0') * 10 + (text[i + 2] - '0'), i);
      i += 3;
    } else if (c == '[') {
      std::size_t start = i;
      ++i;
      // isotope digits: parsed and discarded
      bool had_isotope = false;
      while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
        had_isotope = true;
        ++i;
      }
      if (had_isotope) warn("isotope label discarded");
      if (i >= n) throw SmilesError("unterminated bracket atom", start);
      bool aromatic = false;
      std::string sym;
      if (std::islower(static_cast<unsigned char>(text[i]))) {
        aromatic = true;
        sym = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
        ++i;
      } else if (std::isupper(static_cast<unsigned char>(text[i]))) {
        sym = text[i];
        ++i;
        if (i < n && std::islower(static_cast<unsigned char>(text[i])) &&
            text[i] != 'h' &&
            element_from_symbol(sym + text[i]).has_value()) {
          sym += text[i];
          ++i;
        }
      } else {
        throw SmilesError("expected element symbol in bracket", i);
      }
      auto elem = element_from_symbol(sym);
      if (!elem) throw SmilesError("unsupported element '" + sym + "'", start);
      while (i < n && (text[i] == '@')) {
        warn("chirality mark discarded");
        ++i;
        if (i < n && text[i] == '@') ++i;
      }
      int hcount = 0;
      if (i < n && text[i] == 'H') {
        ++i;
        hcount = 1;
        if (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
          hcount = text[i] - '0';
          ++i;
        }
      }
      int charge = 0;
      if (i < n && (text[i] == '+' || text[i] == '-')) {
        int sign = text[i] == '+' ? 1 : -1;
        char sc = text[i];
        ++i;
        charge = sign;
        if (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
          charge = sign * (text[i] - '0');
          ++i;
        } else {
          while (i < n && text[i] == sc) {
            charge += sign;
            ++i;
          }
        }
      }
      if (charge < -2 || charge > 2) {
        throw SmilesError("formal charge out of supported range", start);
      }
      if (i >= n || text[i] != ']') {
        throw SmilesError("expected ']'", i < n ? i : n - 1);
      }
      ++i;
      add_atom(*elem, aromatic, charge, hcount, true, start);
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      std::size_t pos = i;
      ++i;
      if (i < n && std::islower(static_cast<unsigned char>(text[i])) &&
          element_from_symbol(sym + text[i]).has_value()) {
        sym += text[i];
        ++i;
      }
      auto elem = element_from_symbol(sym);
      if (!elem || !element_info(*elem).organic_subset) {
        throw SmilesError("unsupported element '" + sym + "'", pos);
      }
      add_atom(*elem, false, 0, 0, false, pos);
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      auto elem = element_from_symbol(sym);
      if (!elem) throw SmilesError("unsupported aromatic atom", i);
      add_atom(*elem, true, 0, 0, false, i);
      ++i;
    } else if (c == '.') {
      throw SmilesError("multi-fragment SMILES not supported", i);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      break;  // trailing whitespace / inline comment
    } else {
      throw SmilesError(std::string("unexpected character '") + c + "'", i);
    }
  }
  if (!stack.empty()) throw SmilesError("unmatched '('", n - 1);
  if (!ring_open.empty()) {
    throw SmilesError("unmatched ring closure " +
                          std::to_string(ring_open.begin()->first),
                      ring_open.begin()->second.pos);
  }
  if (pending.present) throw SmilesError("dangling bond symbol", n - 1);
  if (mol.atoms.empty()) throw SmilesError("no atoms", 0);

  mol.finalize();

  // Default-aromatic bonds between two lowercase atoms that are not ring
  // bonds (e.g. the biphenyl linker) are plain single bonds.
  bool changed = false;
  for (std::size_t bi = 0; bi < mol.bonds.size(); ++bi) {
    if (mol.bonds[bi].order == BondOrder::Aromatic && !mol.bond_in_ring(static_cast<int>(bi))) {
      mol.bonds[bi].order = BondOrder::Single;
      changed = true;
    }
  }
  (void)changed;

  // Kekule-form aromatic perception: 5/6-rings of sp2 atoms with a pi count
  // of six are rewritten with aromatic atoms and bonds.
  for (const auto& ring : mol.rings()) {
    if (ring.size() != 5 && ring.size() != 6) continue;
    bool ok = true;
    int pi = 0;
    std::vector<char> in_this(mol.num_atoms(), 0);
    std::vector<int> lone_pair_donors;
    for (int a : ring) in_this[a] = 1;
    for (int a : ring) {
      const Atom& atom = mol.atoms[a];
      if (!aromatic_capable(atom.element)) { ok = false; break; }
      if (atom.aromatic) { pi += 1; continue; }
      bool endo_double = false, exo_double = false;
      for (int bi : mol.incident_bonds(a)) {
        const Bond& b = mol.bonds[bi];
        if (b.order == BondOrder::Double) {
          if (in_this[b.other(a)]) endo_double = true;
          else exo_double = true;
        }
        if (b.order == BondOrder::Triple) { ok = false; }
      }
      if (endo_double) {
        pi += 1;
      } else if (exo_double) {
        ok = false;  // quinone-like, not aromatic
      } else if (atom.element != Element::C) {
        pi += 2;  // heteroatom lone pair
        lone_pair_donors.push_back(a);
      } else {
        ok = false;  // saturated ring carbon
      }
      if (!ok) break;
    }
    if (!ok || pi != 6) continue;
    // Lone-pair donors (pyrrole-type N, furan O) keep the hydrogen count
    // they had in the Kekule form; aromatic H inference would drop it.
    for (int a : lone_pair_donors) {
      if (!bracket[a]) {
        int used = (mol.bond_valence_sum_x2(a) + 1) / 2;
        mol.atoms[a].implicit_h = std::max(
            0, detail::allowed_valence(mol.atoms[a].element, used) - used);
        bracket[a] = 1;
      }
    }
    for (int a : ring) mol.atoms[a].aromatic = true;
    for (std::size_t k = 0; k < ring.size(); ++k) {
      int u = ring[k], v = ring[(k + 1) % ring.size()];
      for (Bond& b : mol.bonds) {
        if ((b.a == u && b.b == v) || (b.a == v && b.b == u)) {
          b.order = BondOrder::Aromatic;
        }
      }
    }
  }

  // Implicit hydrogen fill for non-bracket atoms, plus valence checks.
  for (std::size_t ai = 0; ai < mol.num_atoms(); ++ai) {
    Atom& a = mol.atoms[ai];
    if (a.aromatic && !a.in_ring) {
      throw SmilesError("aromatic atom outside any ring", 0);
    }
    if (!bracket[ai]) {
      if (!a.aromatic) {
        int used = (mol.bond_valence_sum_x2(static_cast<int>(ai)) + 1) / 2;
        if (used > element_info(a.element).max_valence) {
          throw SmilesError("valence violation on " +
                                std::string(element_symbol(a.element)),
                            0);
        }
      }
      a.implicit_h = detail::infer_implicit_h(mol, static_cast<int>(ai));
    } else {
      int used = a.aromatic
                     ? mol.degree(static_cast<int>(ai))
                     : (mol.bond_valence_sum_x2(static_cast<int>(ai)) + 1) / 2;
      int cap = element_info(a.element).max_valence +
                std::max(0, a.formal_charge);
      if (used + a.implicit_h > cap) {
        throw SmilesError("valence violation on bracket atom", 0);
      }
    }
  }

  mol.check_valid();
  return mol;
}

// ---------------------------------------------------------------------------
// Canonical atom ranking: iterative neighborhood refinement with
// deterministic tie-breaking (lowest input index within the smallest
// unresolved class, then re-refinement).

inline std::vector<int> canonical_ranks(const Molecule& m) {
  const int n = static_cast<int>(m.num_atoms());
  std::vector<int> rank(n, 0);

  {
    std::vector<std::tuple<int, int, int, int, int>> keys(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
      const Atom& a = m.atoms[i];
      keys[i] = {static_cast<int>(a.element), m.degree(i), a.formal_charge,
                 a.implicit_h, a.aromatic ? 1 : 0};
      order[i] = i;
    }
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return keys[x] < keys[y]; });
    int r = 0;
    for (int k = 0; k < n; ++k) {
      if (k > 0 && keys[order[k]] != keys[order[k - 1]]) ++r;
      rank[order[k]] = r;
    }
  }

  auto count_classes = [&]() {
    return *std::max_element(rank.begin(), rank.end()) + 1;
  };

  auto refine = [&]() {
    int classes = count_classes();
    while (classes < n) {
      std::vector<std::pair<int, std::vector<std::pair<int, int>>>> keys(n);
      for (int i = 0; i < n; ++i) {
        keys[i].first = rank[i];
        for (int bi : m.incident_bonds(i)) {
          const Bond& b = m.bonds[bi];
          keys[i].second.push_back({static_cast<int>(b.order), rank[b.other(i)]});
        }
        std::sort(keys[i].second.begin(), keys[i].second.end());
      }
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](int x, int y) { return keys[x] < keys[y]; });
      std::vector<int> next(n);
      int r = 0;
      for (int k = 0; k < n; ++k) {
        if (k > 0 && keys[order[k]] != keys[order[k - 1]]) ++r;
        next[order[k]] = r;
      }
      int next_classes = r + 1;
      if (next_classes == classes) break;
      rank = std::move(next);
      classes = next_classes;
    }
    return classes;
  };

  int classes = refine();
  while (classes < n) {
    // break the lowest tied class at its lowest-index member
    int target = -1;
    for (int r = 0;; ++r) {
      int count = 0;
      for (int i = 0; i < n; ++i) count += rank[i] == r;
      if (count > 1) { target = r; break; }
    }
    int chosen = -1;
    for (int i = 0; i < n; ++i) {
      if (rank[i] == target) { chosen = i; break; }
    }
    for (int i = 0; i < n; ++i) {
      rank[i] = rank[i] * 2 + (i == chosen ? 0 : 1);
    }
    // renumber densely
    std::vector<int> vals(rank);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (int i = 0; i < n; ++i) {
      rank[i] = static_cast<int>(
          std::lower_bound(vals.begin(), vals.end(), rank[i]) - vals.begin());
    }
    classes = refine();
  }
  return rank;
}

namespace detail {

inline void write_atom(const Molecule& m, int atom, std::string& out) {
  const Atom& a = m.atoms[atom];
  std::string sym(element_symbol(a.element));
  if (a.aromatic) {
    for (char& c : sym) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  bool need_bracket = a.formal_charge != 0 ||
                      infer_implicit_h(m, atom) != a.implicit_h ||
                      !element_info(a.element).organic_subset;
  if (!need_bracket) {
    out += sym;
    return;
  }
  out += '[';
  out += sym;
  if (a.implicit_h == 1) {
    out += 'H';
  } else if (a.implicit_h > 1) {
    out += 'H';
    out += std::to_string(a.implicit_h);
  }
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? '+' : '-';
    int mag = std::abs(a.formal_charge);
    if (mag > 1) out += std::to_string(mag);
  }
  out += ']';
}

inline void write_bond(const Molecule& m, const Bond& b, std::string& out) {
  switch (b.order) {
    case BondOrder::Single:
      if (m.atoms[b.a].aromatic && m.atoms[b.b].aromatic) out += '-';
      break;
    case BondOrder::Double: out += '='; break;
    case BondOrder::Triple: out += '#'; break;
    case BondOrder::Aromatic: break;
  }
}

}  // namespace detail

// Canonical SMILES: DFS from the rank-0 atom, neighbors in canonical-rank
// order, ring closures numbered in emission order. Two isomorphic molecules
// produce identical strings.
inline std::string write_smiles(const Molecule& m, const std::vector<int>& ranks) {
  const int n = static_cast<int>(m.num_atoms());
  if (n == 0) throw MoleculeError("cannot write empty molecule");
  if (!m.connected()) throw MoleculeError("cannot write disconnected molecule");

  int root = 0;
  for (int i = 0; i < n; ++i) {
    if (ranks[i] < ranks[root]) root = i;
  }

  // First pass: spanning DFS to classify ring-closure bonds.
  std::vector<char> visited(n, 0);
  std::vector<char> bond_used(m.num_bonds(), 0);
  std::vector<std::vector<std::pair<int, int>>> closures(n);  // (digit, bond)
  int next_digit = 1;

  struct Frame {
    int atom;
    std::vector<int> order;  // neighbor bond indices, canonical order
    std::size_t next = 0;
  };

  auto sorted_bonds = [&](int atom, int parent_bond) {
    std::vector<int> bis;
    for (int bi : m.incident_bonds(atom)) {
      if (bi != parent_bond) bis.push_back(bi);
    }
    std::sort(bis.begin(), bis.end(), [&](int x, int y) {
      return ranks[m.bonds[x].other(atom)] < ranks[m.bonds[y].other(atom)];
    });
    return bis;
  };

  {
    std::vector<Frame> stack;
    stack.push_back({root, sorted_bonds(root, -1), 0});
    visited[root] = 1;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next >= f.order.size()) {
        stack.pop_back();
        continue;
      }
      int bi = f.order[f.next++];
      if (bond_used[bi]) continue;
      int w = m.bonds[bi].other(f.atom);
      if (visited[w]) {
        bond_used[bi] = 1;
        int digit = next_digit++;
        closures[f.atom].push_back({digit, bi});
        closures[w].push_back({digit, bi});
      } else {
        bond_used[bi] = 1;
        visited[w] = 1;
        stack.push_back({w, sorted_bonds(w, bi), 0});
      }
    }
  }

  // Second pass: emit text along the same traversal.
  std::string out;
  std::vector<char> closure_opened(next_digit, 0);
  std::fill(visited.begin(), visited.end(), 0);
  std::fill(bond_used.begin(), bond_used.end(), 0);

  struct EmitFrame {
    int atom;
    std::vector<int> order;
    std::size_t next = 0;
    int emitted_children = 0;
  };

  auto emit_atom = [&](int atom) {
    detail::write_atom(m, atom, out);
    for (auto [digit, bi] : closures[atom]) {
      if (!closure_opened[digit]) {
        closure_opened[digit] = 1;
        detail::write_bond(m, m.bonds[bi], out);
      }
      if (digit > 9) {
        out += '%';
        out += std::to_string(digit / 10);
        out += std::to_string(digit % 10);
      } else {
        out += static_cast<char>('0' + digit);
      }
      bond_used[bi] = 1;
    }
  };

  std::vector<EmitFrame> stack;
  visited[root] = 1;
  emit_atom(root);
  stack.push_back({root, sorted_bonds(root, -1), 0, 0});
  while (!stack.empty()) {
    EmitFrame& f = stack.back();
    bool advanced = false;
    while (f.next < f.order.size()) {
      int bi = f.order[f.next++];
      int w = m.bonds[bi].other(f.atom);
      if (visited[w] || bond_used[bi]) continue;  // ring closure, already emitted
      // count remaining tree children to decide on branch parentheses
      int remaining = 0;
      for (std::size_t k = f.next; k < f.order.size(); ++k) {
        int wb = f.order[k];
        if (!visited[m.bonds[wb].other(f.atom)] && !bond_used[wb]) ++remaining;
      }
      bool branch = remaining > 0;
      if (branch) out += '(';
      detail::write_bond(m, m.bonds[bi], out);
      bond_used[bi] = 1;
      visited[w] = 1;
      emit_atom(w);
      stack.push_back({w, sorted_bonds(w, bi), 0, 0});
      if (branch) {
        // remember to close the parenthesis when w's subtree finishes
        stack.back().emitted_children = -1;  // marker
      }
      advanced = true;
      break;
    }
    if (!advanced) {
      bool close = f.emitted_children == -1;
      stack.pop_back();
      if (close) out += ')';
    }
  }
  return out;
}

inline std::string canonical_smiles(const Molecule& m) {
  return write_smiles(m, canonical_ranks(m));
}

}  // namespace lf
