#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "lipidforge/molecule.hpp"

namespace lf {

namespace detail {

// Multiset of heavy atoms by element, for fast mismatch rejection.
inline std::array<int, kElementCount> element_counts(const Molecule& m) {
  std::array<int, kElementCount> c{};
  for (const Atom& a : m.atoms) c[static_cast<std::size_t>(a.element)]++;
  return c;
}

inline bool atom_label_match(const Atom& a, const Atom& b) {
  return a.element == b.element && a.formal_charge == b.formal_charge;
}

struct IsoState {
  const Molecule* ga;
  const Molecule* gb;
  std::vector<int> map_ab;   // a-index -> b-index or -1
  std::vector<char> used_b;

  bool feasible(int va, int vb) const {
    if (!atom_label_match(ga->atoms[va], gb->atoms[vb])) return false;
    if (ga->degree(va) != gb->degree(vb)) return false;
    // every mapped neighbor of va must be a neighbor of vb with equal order
    for (int bi : ga->incident_bonds(va)) {
      const Bond& ab = ga->bonds[bi];
      int wa = ab.other(va);
      int wb = map_ab[wa];
      if (wb < 0) continue;
      const Bond* bb = gb->bond_between(vb, wb);
      if (!bb || bb->order != ab.order) return false;
    }
    // and mapped neighbors of vb must map back to neighbors of va
    for (int bi : gb->incident_bonds(vb)) {
      int wb = gb->bonds[bi].other(vb);
      if (!used_b[wb]) continue;
      // find preimage
      for (std::size_t i = 0; i < map_ab.size(); ++i) {
        if (map_ab[i] == wb) {
          if (!ga->bond_between(va, static_cast<int>(i))) return false;
          break;
        }
      }
    }
    return true;
  }

  bool search(std::size_t depth) {
    if (depth == ga->num_atoms()) return true;
    // prefer an unmapped atom adjacent to the mapped core
    int va = -1;
    for (std::size_t i = 0; i < map_ab.size(); ++i) {
      if (map_ab[i] >= 0) continue;
      bool frontier = false;
      for (int w : ga->neighbors(static_cast<int>(i))) {
        if (map_ab[w] >= 0) { frontier = true; break; }
      }
      if (frontier) { va = static_cast<int>(i); break; }
      if (va < 0) va = static_cast<int>(i);
    }
    for (std::size_t vb = 0; vb < gb->num_atoms(); ++vb) {
      if (used_b[vb]) continue;
      if (!feasible(va, static_cast<int>(vb))) continue;
      map_ab[va] = static_cast<int>(vb);
      used_b[vb] = 1;
      if (search(depth + 1)) return true;
      map_ab[va] = -1;
      used_b[vb] = 0;
    }
    return false;
  }
};

}  // namespace detail

// Exact graph isomorphism on (element, charge)-labelled atoms and
// order-labelled bonds. Backtracking with degree pruning.
inline bool isomorphic(const Molecule& a, const Molecule& b) {
  if (a.num_atoms() != b.num_atoms() || a.num_bonds() != b.num_bonds()) return false;
  if (detail::element_counts(a) != detail::element_counts(b)) return false;
  if (a.num_atoms() == 0) return true;
  detail::IsoState st;
  st.ga = &a;
  st.gb = &b;
  st.map_ab.assign(a.num_atoms(), -1);
  st.used_b.assign(b.num_atoms(), 0);
  return st.search(0);
}

namespace detail {

// Re-derive implicit hydrogens after an edit so the variant is a valid
// molecule; returns false when the edit is not valence-feasible.
inline bool refinalize_variant(Molecule& m) {
  m.finalize();
  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    Atom& a = m.atoms[i];
    int x2 = m.bond_valence_sum_x2(static_cast<int>(i));
    int used = (x2 + 1) / 2;
    if (a.aromatic) used = std::max(used, m.degree(static_cast<int>(i)) + 1);
    if (used > element_info(a.element).max_valence + std::max(0, a.formal_charge)) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

inline constexpr std::size_t kGedAtomLimit = 64;

// True iff the molecules are isomorphic or a single graph edit (add/delete a
// terminal atom with its bond, add/delete a bond, relabel an element, change
// a bond order) maps one onto the other. Single-edit enumeration plus the
// isomorphism check above.
inline bool ged_le_one(const Molecule& a, const Molecule& b) {
  if (a.num_atoms() > kGedAtomLimit || b.num_atoms() > kGedAtomLimit) {
    throw MoleculeError("ged_le_one: molecule exceeds 64 heavy atoms");
  }
  const long na = static_cast<long>(a.num_atoms());
  const long nb = static_cast<long>(b.num_atoms());
  const long ma = static_cast<long>(a.num_bonds());
  const long mb = static_cast<long>(b.num_bonds());

  if (na == nb && ma == mb) {
    if (isomorphic(a, b)) return true;
    // one relabel
    for (std::size_t i = 0; i < a.num_atoms(); ++i) {
      for (std::size_t e = 0; e < kElementCount; ++e) {
        Element el = static_cast<Element>(e);
        if (el == a.atoms[i].element) continue;
        Molecule v = a;
        v.atoms[i].element = el;
        if (!detail::refinalize_variant(v)) continue;
        if (isomorphic(v, b)) return true;
      }
    }
    // one bond-order change
    for (std::size_t bi = 0; bi < a.num_bonds(); ++bi) {
      for (BondOrder o : {BondOrder::Single, BondOrder::Double, BondOrder::Triple}) {
        if (o == a.bonds[bi].order) continue;
        Molecule v = a;
        v.bonds[bi].order = o;
        if (!detail::refinalize_variant(v)) continue;
        if (isomorphic(v, b)) return true;
      }
    }
    return false;
  }

  // delete one terminal atom (with its single incident bond) from the larger
  auto try_atom_deletion = [](const Molecule& big, const Molecule& small) {
    for (std::size_t i = 0; i < big.num_atoms(); ++i) {
      if (big.degree(static_cast<int>(i)) > 1) continue;
      std::vector<int> keep;
      for (std::size_t j = 0; j < big.num_atoms(); ++j) {
        if (j != i) keep.push_back(static_cast<int>(j));
      }
      Molecule v;
      std::vector<int> remap(big.num_atoms(), -1);
      for (std::size_t k = 0; k < keep.size(); ++k) {
        remap[keep[k]] = static_cast<int>(k);
        v.atoms.push_back(big.atoms[keep[k]]);
      }
      for (const Bond& bd : big.bonds) {
        if (remap[bd.a] >= 0 && remap[bd.b] >= 0) {
          v.bonds.push_back({remap[bd.a], remap[bd.b], bd.order});
        }
      }
      if (!detail::refinalize_variant(v)) continue;
      if (isomorphic(v, small)) return true;
    }
    return false;
  };

  if (na == nb + 1 && ma <= mb + 1) return try_atom_deletion(a, b);
  if (nb == na + 1 && mb <= ma + 1) return try_atom_deletion(b, a);

  if (na == nb && ma == mb + 1) {
    for (std::size_t bi = 0; bi < a.num_bonds(); ++bi) {
      Molecule v = a;
      v.bonds.erase(v.bonds.begin() + static_cast<long>(bi));
      if (!detail::refinalize_variant(v)) continue;
      if (isomorphic(v, b)) return true;
    }
    return false;
  }
  if (na == nb && mb == ma + 1) {
    for (std::size_t i = 0; i < a.num_atoms(); ++i) {
      for (std::size_t j = i + 1; j < a.num_atoms(); ++j) {
        if (a.bond_between(static_cast<int>(i), static_cast<int>(j))) continue;
        for (BondOrder o : {BondOrder::Single, BondOrder::Double, BondOrder::Triple}) {
          Molecule v = a;
          v.bonds.push_back({static_cast<int>(i), static_cast<int>(j), o});
          if (!detail::refinalize_variant(v)) continue;
          if (isomorphic(v, b)) return true;
        }
      }
    }
    return false;
  }
  return false;
}

}  // namespace lf
