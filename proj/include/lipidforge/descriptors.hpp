#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/molecule.hpp"

namespace lf {

// Sum of standard atomic weights including implicit hydrogens.
inline double molecular_weight(const Molecule& m) {
  double w = 0.0;
  for (const Atom& a : m.atoms) {
    w += element_info(a.element).weight;
    w += a.implicit_h * kHydrogenWeight;
  }
  return w;
}

// --- additive atomic-contribution logP -------------------------------------

// Wildman-Crippen-style class table. The shipped data file overrides these
// values; the embedded copy keeps the library usable standalone.
class LogPTable {
 public:
  static LogPTable defaults() {
    LogPTable t;
    t.contrib_ = {
        {"C.ali", 0.14},      {"C.ali.het", -0.20}, {"C.arom", 0.13},
        {"N.amine", -1.03},   {"N.amide", -0.60},   {"N.arom", -1.00},
        {"N.pos", -4.00},     {"O.hydroxyl", -0.29}, {"O.carbonyl", -0.12},
        {"O.ether", -0.10},   {"O.arom", 0.11},     {"O.neg", -3.00},
        {"S.any", 0.30},      {"P.any", -0.50},     {"B.any", 0.10},
        {"F", 0.14},          {"Cl", 0.63},         {"Br", 0.86},
        {"I", 1.10},          {"H.onC", 0.123},     {"H.onHet", -0.25},
    };
    return t;
  }

  static LogPTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open logP table: " + path);
    LogPTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw std::runtime_error("malformed logP table line " + std::to_string(lineno));
      }
      t.contrib_[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
    }
    return t;
  }

  double value(const std::string& cls) const {
    auto it = contrib_.find(cls);
    if (it == contrib_.end()) {
      throw std::runtime_error("logP contribution missing for atom environment '" +
                               cls + "'");
    }
    return it->second;
  }

  const std::map<std::string, double>& entries() const { return contrib_; }

 private:
  std::map<std::string, double> contrib_;
};

namespace detail {

inline bool has_hetero_neighbor(const Molecule& m, int atom) {
  for (int w : m.neighbors(atom)) {
    Element e = m.atoms[w].element;
    if (e != Element::C) return true;
  }
  return false;
}

inline bool has_double_bond_to(const Molecule& m, int atom, Element e) {
  for (int bi : m.incident_bonds(atom)) {
    const Bond& b = m.bonds[bi];
    if (b.order == BondOrder::Double && m.atoms[b.other(atom)].element == e) {
      return true;
    }
  }
  return false;
}

inline std::string logp_class(const Molecule& m, int i) {
  const Atom& a = m.atoms[i];
  switch (a.element) {
    case Element::C:
      if (a.aromatic) return "C.arom";
      return has_hetero_neighbor(m, i) ? "C.ali.het" : "C.ali";
    case Element::N:
      if (a.formal_charge > 0) return "N.pos";
      if (a.aromatic) return "N.arom";
      for (int w : m.neighbors(i)) {
        if (m.atoms[w].element == Element::C && has_double_bond_to(m, w, Element::O)) {
          return "N.amide";
        }
      }
      return "N.amine";
    case Element::O:
      if (a.formal_charge < 0) return "O.neg";
      if (a.aromatic) return "O.arom";
      if (has_double_bond_to(m, i, Element::C) ||
          has_double_bond_to(m, i, Element::N) ||
          has_double_bond_to(m, i, Element::P) ||
          has_double_bond_to(m, i, Element::S)) {
        return "O.carbonyl";
      }
      return a.implicit_h > 0 ? "O.hydroxyl" : "O.ether";
    case Element::S: return "S.any";
    case Element::P: return "P.any";
    case Element::B: return "B.any";
    case Element::F: return "F";
    case Element::Cl: return "Cl";
    case Element::Br: return "Br";
    case Element::I: return "I";
  }
  return "C.ali";
}

}  // namespace detail

inline double log_p(const Molecule& m, const LogPTable& table) {
  double sum = 0.0;
  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    sum += table.value(detail::logp_class(m, static_cast<int>(i)));
    if (m.atoms[i].implicit_h > 0) {
      const char* hcls = m.atoms[i].element == Element::C ? "H.onC" : "H.onHet";
      sum += m.atoms[i].implicit_h * table.value(hcls);
    }
  }
  return sum;
}

inline double log_p(const Molecule& m) {
  static const LogPTable table = LogPTable::defaults();
  return log_p(m, table);
}

// --- functional group analysis ---------------------------------------------

enum class AmineExclusion { AmideAdjacent, NNLinked, Quaternary };

struct ExcludedAmine {
  int atom_index;
  AmineExclusion reason;
};

struct FunctionalGroupReport {
  int carboxyl_count = 0;
  int hydroxyl_count = 0;
  int amine_count = 0;
  std::vector<int> carboxyl_sites;  // the acid carbon
  std::vector<int> hydroxyl_sites;  // the O
  std::vector<int> amine_sites;     // the N
  std::vector<ExcludedAmine> excluded_amine_sites;
};

// Counts carboxyl (-C(=O)OH), hydroxyl (-OH outside carboxyl) and amine
// groups. Amide-adjacent nitrogens, N-N linked nitrogens and charged or
// quaternary nitrogens are excluded with a reason.
inline FunctionalGroupReport functional_groups(const Molecule& m) {
  FunctionalGroupReport r;
  std::vector<char> carboxyl_oxygen(m.num_atoms(), 0);

  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    const Atom& a = m.atoms[i];
    if (a.element != Element::C || a.aromatic) continue;
    int dbl_o = -1, oh = -1;
    for (int bi : m.incident_bonds(static_cast<int>(i))) {
      const Bond& b = m.bonds[bi];
      int w = b.other(static_cast<int>(i));
      if (m.atoms[w].element != Element::O) continue;
      if (b.order == BondOrder::Double && m.degree(w) == 1) dbl_o = w;
      if (b.order == BondOrder::Single && m.degree(w) == 1 &&
          m.atoms[w].implicit_h >= 1 && m.atoms[w].formal_charge == 0) {
        oh = w;
      }
    }
    if (dbl_o >= 0 && oh >= 0) {
      r.carboxyl_sites.push_back(static_cast<int>(i));
      carboxyl_oxygen[dbl_o] = 1;
      carboxyl_oxygen[oh] = 1;
    }
  }

  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    const Atom& a = m.atoms[i];
    if (a.element == Element::O && !a.aromatic && a.implicit_h >= 1 &&
        a.formal_charge == 0 && !carboxyl_oxygen[i]) {
      bool on_carbon = m.degree(static_cast<int>(i)) == 1 &&
                       m.atoms[m.neighbors(static_cast<int>(i))[0]].element == Element::C;
      if (on_carbon) r.hydroxyl_sites.push_back(static_cast<int>(i));
    }
  }

  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    const Atom& a = m.atoms[i];
    if (a.element != Element::N) continue;
    if (a.formal_charge > 0 || m.degree(static_cast<int>(i)) >= 4) {
      r.excluded_amine_sites.push_back({static_cast<int>(i), AmineExclusion::Quaternary});
      continue;
    }
    bool nn = false, amide = false, only_c = true;
    for (int w : m.neighbors(static_cast<int>(i))) {
      Element e = m.atoms[w].element;
      if (e == Element::N) nn = true;
      else if (e != Element::C) only_c = false;
      if (e == Element::C && detail::has_double_bond_to(m, w, Element::O)) amide = true;
    }
    if (nn) {
      r.excluded_amine_sites.push_back({static_cast<int>(i), AmineExclusion::NNLinked});
      continue;
    }
    if (amide) {
      r.excluded_amine_sites.push_back({static_cast<int>(i), AmineExclusion::AmideAdjacent});
      continue;
    }
    if (!only_c) continue;  // nitrogen bound to O/S/P, not an amine
    if (a.aromatic && a.implicit_h > 0) continue;  // pyrrole-type NH, not basic
    r.amine_sites.push_back(static_cast<int>(i));
  }

  r.carboxyl_count = static_cast<int>(r.carboxyl_sites.size());
  r.hydroxyl_count = static_cast<int>(r.hydroxyl_sites.size());
  r.amine_count = static_cast<int>(r.amine_sites.size());
  return r;
}

}  // namespace lf
