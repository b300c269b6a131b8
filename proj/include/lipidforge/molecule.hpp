#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/elements.hpp"

namespace lf {

class MoleculeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Valence contribution of a bond; aromatic counts 1.5 (x2 to stay integral).
inline int bond_valence_x2(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 2;
    case BondOrder::Double: return 4;
    case BondOrder::Triple: return 6;
    case BondOrder::Aromatic: return 3;
  }
  return 2;
}

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  int implicit_h = 0;
  bool aromatic = false;
  bool in_ring = false;  // derived in finalize()
};

struct Bond {
  int a = -1;
  int b = -1;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == a ? b : a; }
};

// Attributed molecular graph. Treated as immutable once finalize() has run;
// every operation in the library takes it by const reference.
class Molecule {
 public:
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  std::size_t num_atoms() const { return atoms.size(); }
  std::size_t num_bonds() const { return bonds.size(); }
  bool empty() const { return atoms.empty(); }

  const std::vector<int>& neighbors(int atom) const { return adjacency_[atom]; }
  const std::vector<int>& incident_bonds(int atom) const { return incident_[atom]; }
  const std::vector<std::vector<int>>& rings() const { return rings_; }
  bool bond_in_ring(int bond_index) const { return ring_bond_[bond_index] != 0; }

  int degree(int atom) const { return static_cast<int>(adjacency_[atom].size()); }

  const Bond* bond_between(int a, int b) const {
    for (int bi : incident_[a]) {
      if (bonds[bi].other(a) == b) return &bonds[bi];
    }
    return nullptr;
  }

  // Sum of bond valences at an atom, doubled to keep aromatic halves integral.
  int bond_valence_sum_x2(int atom) const {
    int s = 0;
    for (int bi : incident_[atom]) s += bond_valence_x2(bonds[bi].order);
    return s;
  }

  bool connected() const {
    if (atoms.empty()) return true;
    std::vector<char> seen(atoms.size(), 0);
    std::deque<int> q{0};
    seen[0] = 1;
    std::size_t n = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      for (int w : adjacency_[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++n;
          q.push_back(w);
        }
      }
    }
    return n == atoms.size();
  }

  // Rebuilds adjacency, ring info and the in_ring flags. Must be called after
  // any structural construction; validates the basic graph invariants.
  void finalize() {
    build_adjacency();
    perceive_rings();
  }

  void check_valid() const {
    const int n = static_cast<int>(atoms.size());
    for (const Bond& b : bonds) {
      if (b.a < 0 || b.a >= n || b.b < 0 || b.b >= n) {
        throw MoleculeError("bond endpoint out of range");
      }
      if (b.a == b.b) throw MoleculeError("self-bond");
    }
    for (int i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < adjacency_[i].size(); ++j) {
        for (std::size_t k = j + 1; k < adjacency_[i].size(); ++k) {
          if (adjacency_[i][j] == adjacency_[i][k]) {
            throw MoleculeError("duplicate bond between atom pair");
          }
        }
      }
      const Atom& a = atoms[i];
      if (a.implicit_h < 0) throw MoleculeError("negative implicit hydrogen count");
      if (a.formal_charge < -2 || a.formal_charge > 2) {
        throw MoleculeError("formal charge out of range");
      }
    }
    for (const Bond& b : bonds) {
      if (b.order == BondOrder::Aromatic &&
          (!atoms[b.a].aromatic || !atoms[b.b].aromatic)) {
        throw MoleculeError("aromatic bond between non-aromatic atoms");
      }
    }
  }

 private:
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> incident_;
  std::vector<std::vector<int>> rings_;
  std::vector<char> ring_bond_;

  void build_adjacency() {
    adjacency_.assign(atoms.size(), {});
    incident_.assign(atoms.size(), {});
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      const Bond& b = bonds[i];
      adjacency_[b.a].push_back(b.b);
      adjacency_[b.b].push_back(b.a);
      incident_[b.a].push_back(static_cast<int>(i));
      incident_[b.b].push_back(static_cast<int>(i));
    }
  }

  // Ring bonds are the non-bridge edges; for each, a smallest ring through it
  // is recovered with a BFS that avoids the bond itself.
  void perceive_rings() {
    rings_.clear();
    for (Atom& a : atoms) a.in_ring = false;
    std::vector<char> is_bridge(bonds.size(), 1);
    find_bridges(is_bridge);
    ring_bond_.assign(bonds.size(), 0);
    for (std::size_t bi = 0; bi < bonds.size(); ++bi) {
      ring_bond_[bi] = is_bridge[bi] ? 0 : 1;
    }
    std::vector<std::vector<int>> seen_rings;
    for (std::size_t bi = 0; bi < bonds.size(); ++bi) {
      if (is_bridge[bi]) continue;
      std::vector<int> ring = smallest_ring_through(static_cast<int>(bi));
      if (ring.empty()) continue;
      std::vector<int> key = ring;
      std::sort(key.begin(), key.end());
      bool dup = false;
      for (const auto& r : seen_rings) {
        if (r == key) { dup = true; break; }
      }
      if (!dup) {
        seen_rings.push_back(key);
        rings_.push_back(ring);
        for (int a : ring) atoms[a].in_ring = true;
      } else {
        for (int a : ring) atoms[a].in_ring = true;
      }
    }
  }

  void find_bridges(std::vector<char>& is_bridge) {
    const int n = static_cast<int>(atoms.size());
    std::vector<int> disc(n, -1), low(n, 0);
    int timer = 0;
    // Iterative DFS; (vertex, parent bond, next neighbor slot).
    for (int start = 0; start < n; ++start) {
      if (disc[start] != -1) continue;
      std::vector<std::array<int, 3>> stack{{start, -1, 0}};
      disc[start] = low[start] = timer++;
      while (!stack.empty()) {
        const int v = stack.back()[0];
        const int pbond = stack.back()[1];
        if (stack.back()[2] < static_cast<int>(incident_[v].size())) {
          int bi = incident_[v][stack.back()[2]++];
          int w = bonds[bi].other(v);
          if (bi == pbond) continue;
          if (disc[w] == -1) {
            disc[w] = low[w] = timer++;
            stack.push_back({w, bi, 0});
          } else {
            low[v] = std::min(low[v], disc[w]);
            is_bridge[bi] = 0;
          }
        } else {
          stack.pop_back();
          if (!stack.empty()) {
            int parent = stack.back()[0];
            low[parent] = std::min(low[parent], low[v]);
            if (low[v] <= disc[parent]) is_bridge[pbond] = 0;
          }
        }
      }
    }
  }

  std::vector<int> smallest_ring_through(int bond_index) {
    const Bond& target = bonds[bond_index];
    std::vector<int> prev(atoms.size(), -1);
    std::vector<char> seen(atoms.size(), 0);
    std::deque<int> q{target.a};
    seen[target.a] = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      if (v == target.b) break;
      for (int bi : incident_[v]) {
        if (bi == bond_index) continue;
        int w = bonds[bi].other(v);
        if (!seen[w]) {
          seen[w] = 1;
          prev[w] = v;
          q.push_back(w);
        }
      }
    }
    if (!seen[target.b]) return {};
    std::vector<int> path;
    for (int v = target.b; v != -1; v = prev[v]) path.push_back(v);
    return path;  // closed by the target bond itself
  }
};

// Induced submolecule on `keep` (original atom indices). Bonds cut at the
// boundary are compensated with implicit hydrogens on the kept endpoint.
inline Molecule induced_fragment(const Molecule& m, const std::vector<int>& keep) {
  std::vector<int> remap(m.num_atoms(), -1);
  Molecule out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    remap[keep[i]] = static_cast<int>(i);
    out.atoms.push_back(m.atoms[keep[i]]);
  }
  for (const Bond& b : m.bonds) {
    int ra = remap[b.a], rb = remap[b.b];
    if (ra >= 0 && rb >= 0) {
      out.bonds.push_back({ra, rb, b.order});
    } else if (ra >= 0 || rb >= 0) {
      int kept = ra >= 0 ? ra : rb;
      // aromatic cut bonds compensate with a single H (3/2 rounds down)
      out.atoms[kept].implicit_h += bond_valence_x2(b.order) / 2;
    }
  }
  out.finalize();
  // A fragment cut out of an aromatic ring is no longer aromatic.
  for (std::size_t i = 0; i < out.atoms.size(); ++i) {
    if (out.atoms[i].aromatic && !out.atoms[i].in_ring) {
      out.atoms[i].aromatic = false;
    }
  }
  for (Bond& b : out.bonds) {
    if (b.order == BondOrder::Aromatic &&
        (!out.atoms[b.a].aromatic || !out.atoms[b.b].aromatic)) {
      b.order = BondOrder::Single;
    }
  }
  return out;
}

inline std::vector<std::vector<int>> connected_components(
    const Molecule& m, const std::vector<char>& mask) {
  std::vector<std::vector<int>> comps;
  std::vector<char> seen(m.num_atoms(), 0);
  for (std::size_t s = 0; s < m.num_atoms(); ++s) {
    if (!mask[s] || seen[s]) continue;
    std::vector<int> comp;
    std::deque<int> q{static_cast<int>(s)};
    seen[s] = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      comp.push_back(v);
      for (int w : m.neighbors(v)) {
        if (mask[w] && !seen[w]) {
          seen[w] = 1;
          q.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

}  // namespace lf
