#pragma once

#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/descriptors.hpp"
#include "lipidforge/molecule.hpp"

namespace lf {

enum class SiteKind { Acidic, Basic };

struct IonizableSite {
  int atom_index;
  SiteKind kind;
  double pka;
};

// --- pKa rule table --------------------------------------------------------

class PkaRules {
 public:
  struct Rule {
    SiteKind kind;
    double pka;
  };

  static PkaRules defaults() {
    PkaRules r;
    r.rules_ = {
        {"carboxyl", {SiteKind::Acidic, 4.2}},
        {"amine.primary", {SiteKind::Basic, 10.6}},
        {"amine.secondary", {SiteKind::Basic, 10.7}},
        {"amine.tertiary", {SiteKind::Basic, 9.8}},
        {"amine.aniline", {SiteKind::Basic, 4.6}},
        {"amine.pyridine", {SiteKind::Basic, 5.2}},
        {"amine.imidazole", {SiteKind::Basic, 7.0}},
    };
    return r;
  }

  static PkaRules load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pKa rule file: " + path);
    PkaRules r;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::istringstream ss(line);
      std::string cls, kind;
      double pka;
      if (!(ss >> cls)) continue;
      if (!(ss >> kind >> pka)) {
        throw std::runtime_error("pKa rule file line " + std::to_string(lineno) +
                                 ": expected <class> <kind> <pka>");
      }
      SiteKind k;
      if (kind == "acidic") k = SiteKind::Acidic;
      else if (kind == "basic") k = SiteKind::Basic;
      else {
        throw std::runtime_error("pKa rule file line " + std::to_string(lineno) +
                                 ": unknown kind " + kind);
      }
      if (!(pka > 0.0 && pka < 14.0)) {
        throw std::runtime_error("pKa rule file line " + std::to_string(lineno) +
                                 ": pKa out of (0,14)");
      }
      r.rules_[cls] = {k, pka};
    }
    return r;
  }

  const Rule& at(const std::string& cls) const {
    auto it = rules_.find(cls);
    if (it == rules_.end()) {
      throw std::runtime_error("no pKa rule for site class " + cls);
    }
    return it->second;
  }

  const std::map<std::string, Rule>& entries() const { return rules_; }

 private:
  std::map<std::string, Rule> rules_;
};

namespace detail {

// Smallest ring size through `atom`, 0 when the atom is not in a ring.
inline int smallest_ring_size(const Molecule& m, int atom) {
  if (!m.atoms[atom].in_ring) return 0;
  int best = 0;
  for (int bi : m.incident_bonds(atom)) {
    const Bond& b = m.bonds[bi];
    if (!m.bond_in_ring(bi)) continue;
    int target = b.other(atom);
    // shortest path atom -> target avoiding the direct bond
    std::deque<int> q{atom};
    std::vector<int> dist(m.num_atoms(), -1);
    dist[atom] = 0;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      for (int nb : m.neighbors(v)) {
        if (v == atom && nb == target) continue;
        if (dist[nb] < 0) {
          dist[nb] = dist[v] + 1;
          q.push_back(nb);
        }
      }
    }
    if (dist[target] > 0) {
      int size = dist[target] + 1;
      if (best == 0 || size < best) best = size;
    }
  }
  return best;
}

inline std::string amine_class(const Molecule& m, int atom) {
  const Atom& a = m.atoms[atom];
  if (a.aromatic) {
    return smallest_ring_size(m, atom) == 5 ? "amine.imidazole" : "amine.pyridine";
  }
  for (int nb : m.neighbors(atom)) {
    if (m.atoms[nb].aromatic) return "amine.aniline";
  }
  switch (m.degree(atom)) {
    case 1: return "amine.primary";
    case 2: return "amine.secondary";
    default: return "amine.tertiary";
  }
}

}  // namespace detail

inline std::vector<IonizableSite> assign_pka(const Molecule& m, const PkaRules& rules) {
  std::vector<IonizableSite> sites;
  FunctionalGroupReport fg = functional_groups(m);
  for (int c : fg.carboxyl_sites) {
    const auto& r = rules.at("carboxyl");
    sites.push_back({c, r.kind, r.pka});
  }
  for (int n : fg.amine_sites) {
    // Pyrrole-type aromatic nitrogen (three sigma bonds) donates its lone
    // pair to the ring and is not protonatable.
    if (m.atoms[n].aromatic && m.degree(n) == 3) continue;
    const auto& r = rules.at(detail::amine_class(m, n));
    sites.push_back({n, r.kind, r.pka});
  }
  return sites;
}

inline std::vector<IonizableSite> assign_pka(const Molecule& m) {
  static const PkaRules rules = PkaRules::defaults();
  return assign_pka(m, rules);
}

// --- Henderson-Hasselbalch -------------------------------------------------

inline double net_charge(const std::vector<IonizableSite>& sites, double ph) {
  double q = 0.0;
  for (const IonizableSite& s : sites) {
    if (s.kind == SiteKind::Basic) {
      q += 1.0 / (1.0 + std::pow(10.0, ph - s.pka));
    } else {
      q -= 1.0 / (1.0 + std::pow(10.0, s.pka - ph));
    }
  }
  return q;
}

struct IonizabilityConfig {
  double ph_neutral = 7.4;
  double ph_acidic = 5.0;
  double tau_neutral = 0.5;
  double tau_positive = 0.5;
};

inline bool is_ionizable(const Molecule& m, const PkaRules& rules,
                         const IonizabilityConfig& cfg = {}) {
  std::vector<IonizableSite> sites = assign_pka(m, rules);
  double q_neutral = net_charge(sites, cfg.ph_neutral);
  double q_acidic = net_charge(sites, cfg.ph_acidic);
  return std::fabs(q_neutral) < cfg.tau_neutral && q_acidic >= cfg.tau_positive;
}

inline bool is_ionizable(const Molecule& m, const IonizabilityConfig& cfg = {}) {
  static const PkaRules rules = PkaRules::defaults();
  return is_ionizable(m, rules, cfg);
}

// --- lipid-likeness surrogate ----------------------------------------------

struct LipidLikenessConfig {
  int min_chain_len = 6;   // atoms in the longest path of a tail component
  double mw_min = 400.0;
  double mw_max = 1200.0;
};

namespace detail {

// Acyclic all-carbon components adjacent to a heteroatom; returns the
// longest-path length (atom count) of each. Components are trees, so the
// longest path is the tree diameter (double BFS).
inline std::vector<int> tail_chain_lengths(const Molecule& m) {
  const int n = static_cast<int>(m.num_atoms());
  std::vector<char> chain(n, 0);
  for (int i = 0; i < n; ++i) {
    const Atom& a = m.atoms[i];
    chain[i] = a.element == Element::C && !a.aromatic && !a.in_ring;
  }
  std::vector<int> comp(n, -1);
  std::vector<int> lengths;
  for (int i = 0; i < n; ++i) {
    if (!chain[i] || comp[i] >= 0) continue;
    // collect the component
    std::vector<int> members;
    std::deque<int> q{i};
    comp[i] = static_cast<int>(lengths.size());
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      members.push_back(v);
      for (int nb : m.neighbors(v)) {
        if (chain[nb] && comp[nb] < 0) {
          comp[nb] = comp[i];
          q.push_back(nb);
        }
      }
    }
    bool linked = false;
    for (int v : members) {
      for (int nb : m.neighbors(v)) {
        if (m.atoms[nb].element == Element::N || m.atoms[nb].element == Element::O) {
          linked = true;
        }
      }
    }
    if (!linked) continue;
    auto farthest = [&](int start) {
      std::map<int, int> dist{{start, 1}};
      std::deque<int> bfs{start};
      std::pair<int, int> best{start, 1};
      while (!bfs.empty()) {
        int v = bfs.front();
        bfs.pop_front();
        for (int nb : m.neighbors(v)) {
          if (chain[nb] && !dist.count(nb)) {
            dist[nb] = dist[v] + 1;
            if (dist[nb] > best.second) best = {nb, dist[nb]};
            bfs.push_back(nb);
          }
        }
      }
      return best;
    };
    auto [end1, len1] = farthest(members.front());
    auto [end2, diameter] = farthest(end1);
    (void)end2;
    (void)len1;
    lengths.push_back(diameter);
  }
  return lengths;
}

}  // namespace detail

inline double lipid_likeness(const Molecule& m, const LipidLikenessConfig& cfg = {}) {
  std::vector<int> chains = detail::tail_chain_lengths(m);
  int qualifying = 0;
  int longest = 0;
  for (int len : chains) {
    if (len >= cfg.min_chain_len) ++qualifying;
    longest = std::max(longest, len);
  }
  if (qualifying >= 2) {
    double mw = molecular_weight(m);
    return (mw >= cfg.mw_min && mw <= cfg.mw_max) ? 1.0 : 0.5;
  }
  if (qualifying == 1) return 0.5;
  // no full-length tail: partial credit for a nascent chain, none for stubs
  if (longest >= 3) {
    return 0.5 * static_cast<double>(longest) / cfg.min_chain_len;
  }
  return 0.0;
}

// --- combined score --------------------------------------------------------

struct PropertyScore {
  double lipid_score;
  bool ionizable;
  double total;
};

struct ScoringConfig {
  IonizabilityConfig ionizability;
  LipidLikenessConfig lipid;
};

inline PropertyScore property_score(const Molecule& m, const PkaRules& rules,
                                    const ScoringConfig& cfg = {}) {
  PropertyScore s;
  s.lipid_score = lipid_likeness(m, cfg.lipid);
  s.ionizable = is_ionizable(m, rules, cfg.ionizability);
  s.total = s.lipid_score + (s.ionizable ? 1.0 : 0.0);
  return s;
}

inline PropertyScore property_score(const Molecule& m) {
  static const PkaRules rules = PkaRules::defaults();
  return property_score(m, rules);
}

}  // namespace lf
