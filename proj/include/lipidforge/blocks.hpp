#pragma once

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/descriptors.hpp"
#include "lipidforge/fingerprint.hpp"
#include "lipidforge/isomorphism.hpp"
#include "lipidforge/molecule.hpp"
#include "lipidforge/smiles.hpp"

namespace lf {

enum class BlockKind { Head, Tail };

struct BuildingBlock {
  std::string id;
  std::string smiles;  // canonical
  BlockKind kind;
  FunctionalGroupReport groups;
  Fingerprint fingerprint;

  static BuildingBlock make(std::string id, const Molecule& m, BlockKind kind) {
    BuildingBlock b;
    b.id = std::move(id);
    b.smiles = canonical_smiles(m);
    b.kind = kind;
    b.groups = functional_groups(m);
    b.fingerprint = morgan_fingerprint(m, 2, 1024);
    return b;
  }
};

struct BlockDataset {
  std::vector<BuildingBlock> heads;
  std::vector<BuildingBlock> tails;
  std::string provenance;  // free-form: source digest + filter config
};

// --- head filtering --------------------------------------------------------

struct HeadFilterConfig {
  double max_mw = 500.0;
  double max_logp = 0.0;
};

struct FilterResult {
  bool accepted;
  std::string reason;  // first failed criterion, empty when accepted
};

inline FilterResult filter_head(const Molecule& m, const HeadFilterConfig& cfg = {}) {
  if (molecular_weight(m) >= cfg.max_mw) return {false, "mw"};
  if (log_p(m) >= cfg.max_logp) return {false, "logp"};
  FunctionalGroupReport fg = functional_groups(m);
  for (const auto& ex : fg.excluded_amine_sites) {
    if (ex.reason == AmineExclusion::Quaternary) return {false, "ammonium"};
  }
  if (fg.amine_count < 1) return {false, "amine"};
  if (fg.carboxyl_count + fg.hydroxyl_count + fg.amine_count < 1) {
    return {false, "reactive"};
  }
  return {true, ""};
}

// --- tail extraction -------------------------------------------------------

struct TailExtractConfig {
  int hydrophilic_distance = 2;  // graph distance to nearest N/O/P/S
};

namespace detail {

// graph distance from every atom to the nearest hydrophilic atom
inline std::vector<int> hydrophilic_distance(const Molecule& m) {
  std::vector<int> dist(m.num_atoms(), -1);
  std::deque<int> q;
  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    if (is_hydrophilic(m.atoms[i].element)) {
      dist[i] = 0;
      q.push_back(static_cast<int>(i));
    }
  }
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (int nb : m.neighbors(v)) {
      if (dist[nb] < 0) {
        dist[nb] = dist[v] + 1;
        q.push_back(nb);
      }
    }
  }
  return dist;
}

// ring systems: connected components of ring atoms
inline std::vector<std::vector<int>> ring_systems(const Molecule& m) {
  std::vector<std::vector<int>> systems;
  std::vector<char> seen(m.num_atoms(), 0);
  for (std::size_t i = 0; i < m.num_atoms(); ++i) {
    if (!m.atoms[i].in_ring || seen[i]) continue;
    std::vector<int> sys;
    std::deque<int> q{static_cast<int>(i)};
    seen[i] = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      sys.push_back(v);
      for (int nb : m.neighbors(v)) {
        if (m.atoms[nb].in_ring && !seen[nb]) {
          seen[nb] = 1;
          q.push_back(nb);
        }
      }
    }
    std::sort(sys.begin(), sys.end());
    systems.push_back(std::move(sys));
  }
  return systems;
}

}  // namespace detail

struct TailExtraction {
  std::vector<int> head_atoms;  // indices into the input lipid
  std::vector<Molecule> tails;
};

// Prunes acyclic carbons that are far from every hydrophilic atom; the
// surviving fragment (if unique and logP < 0) is the head, and the removed
// carbon regions become the tails. Ring systems that straddle the decision
// are tried kept and pruned, smallest subsets first.
inline TailExtraction extract_tails(const Molecule& lipid,
                                    const TailExtractConfig& cfg = {}) {
  TailExtraction out;
  std::vector<int> hdist = detail::hydrophilic_distance(lipid);
  bool any_hydrophilic = false;
  for (int d : hdist) any_hydrophilic |= d == 0;
  if (!any_hydrophilic) return out;

  auto systems = detail::ring_systems(lipid);

  // base keep mask before ring arrangement: near-hydrophilic atoms and all
  // non-carbon atoms stay; far acyclic carbons are pruned
  auto base_keep = [&](std::size_t i) {
    const Atom& a = lipid.atoms[i];
    if (a.element != Element::C) return true;
    if (a.in_ring) return true;  // overridden per arrangement
    return hdist[i] >= 0 && hdist[i] <= cfg.hydrophilic_distance;
  };

  const std::size_t n_sys = systems.size();
  if (n_sys > 16) throw MoleculeError("too many ring systems for tail extraction");
  // iterate subsets of ring systems to prune, in deterministic size order
  std::vector<std::vector<int>> subsets;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n_sys); ++mask) {
    std::vector<int> s;
    for (std::size_t k = 0; k < n_sys; ++k) {
      if (mask & (std::size_t{1} << k)) s.push_back(static_cast<int>(k));
    }
    subsets.push_back(std::move(s));
  }
  std::stable_sort(subsets.begin(), subsets.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });

  for (const auto& pruned_systems : subsets) {
    std::vector<char> keep(lipid.num_atoms(), 0);
    for (std::size_t i = 0; i < lipid.num_atoms(); ++i) keep[i] = base_keep(i);
    for (int k : pruned_systems) {
      for (int atom : systems[k]) {
        if (lipid.atoms[atom].element == Element::C) keep[atom] = 0;
      }
    }
    std::vector<int> head_atoms;
    for (std::size_t i = 0; i < lipid.num_atoms(); ++i) {
      if (keep[i]) head_atoms.push_back(static_cast<int>(i));
    }
    if (head_atoms.empty()) continue;
    auto head_comps = connected_components(lipid, keep);
    if (head_comps.size() != 1) continue;
    Molecule head;
    try {
      head = induced_fragment(lipid, head_atoms);
    } catch (const MoleculeError&) {
      continue;
    }
    if (log_p(head) >= 0.0) continue;

    // tails: components of the complement
    std::vector<char> pruned(lipid.num_atoms(), 0);
    bool any_pruned = false;
    for (std::size_t i = 0; i < lipid.num_atoms(); ++i) {
      pruned[i] = !keep[i];
      any_pruned |= pruned[i];
    }
    out.head_atoms = head_atoms;
    if (any_pruned) {
      for (const auto& comp : connected_components(lipid, pruned)) {
        out.tails.push_back(induced_fragment(lipid, comp));
      }
    }
    return out;
  }
  return out;
}

// --- tail filtering --------------------------------------------------------

enum class TailFilterMode { GedOnly, FingerprintOnly, Either };

struct TailFilterConfig {
  TailFilterMode mode = TailFilterMode::Either;
  double theta_sim = 0.9;
};

inline FilterResult filter_tail(const Molecule& candidate,
                                const std::vector<Molecule>& reference_tails,
                                const TailFilterConfig& cfg = {}) {
  if (candidate.num_atoms() > kGedAtomLimit) {
    throw MoleculeError("tail candidate exceeds atom limit");
  }
  Fingerprint cfp = morgan_fingerprint(candidate, 2, 1024);
  for (const Molecule& ref : reference_tails) {
    if (cfg.mode != TailFilterMode::FingerprintOnly && ged_le_one(candidate, ref)) {
      return {true, "ged"};
    }
    if (cfg.mode != TailFilterMode::GedOnly &&
        tanimoto(cfp, morgan_fingerprint(ref, 2, 1024)) >= cfg.theta_sim) {
      return {true, "fingerprint"};
    }
  }
  return {false, "dissimilar"};
}

// --- dataset I/O -----------------------------------------------------------

struct LoadReport {
  int loaded = 0;
  int duplicates = 0;
  int malformed = 0;
  std::vector<std::string> warnings;
};

// Format: kind<TAB>id<TAB>canonical_smiles, one block per line.
inline BlockDataset load_dataset(const std::string& path, LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  BlockDataset ds;
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::set<std::string> seen_heads, seen_tails;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string kind, id, smi;
    if (!(std::getline(ss, kind, '\t') && std::getline(ss, id, '\t') &&
          std::getline(ss, smi))) {
      ++rep.malformed;
      rep.warnings.push_back("line " + std::to_string(lineno) + ": malformed");
      continue;
    }
    BlockKind k;
    if (kind == "head") k = BlockKind::Head;
    else if (kind == "tail") k = BlockKind::Tail;
    else {
      ++rep.malformed;
      rep.warnings.push_back("line " + std::to_string(lineno) + ": bad kind " + kind);
      continue;
    }
    Molecule m;
    try {
      m = parse_smiles(smi);
    } catch (const SmilesError& e) {
      ++rep.malformed;
      rep.warnings.push_back("line " + std::to_string(lineno) + ": " + e.what());
      continue;
    }
    BuildingBlock b = BuildingBlock::make(id, m, k);
    auto& seen = k == BlockKind::Head ? seen_heads : seen_tails;
    if (!seen.insert(b.smiles).second) {
      ++rep.duplicates;
      continue;
    }
    ++rep.loaded;
    (k == BlockKind::Head ? ds.heads : ds.tails).push_back(std::move(b));
  }
  return ds;
}

inline void save_dataset(const BlockDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const BuildingBlock& b : ds.heads) {
    out << "head\t" << b.id << '\t' << b.smiles << '\n';
  }
  for (const BuildingBlock& b : ds.tails) {
    out << "tail\t" << b.id << '\t' << b.smiles << '\n';
  }
  if (!ds.provenance.empty()) {
    std::ofstream prov(path + ".provenance");
    prov << ds.provenance << '\n';
  }
}

// --- subset sampling -------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n,
                                               std::mt19937_64& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0u);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

inline BlockDataset sample_subsets(const BlockDataset& ds, std::size_t head_n,
                                   std::size_t tail_n, std::uint64_t seed) {
  if (head_n > ds.heads.size() || tail_n > ds.tails.size()) {
    throw std::runtime_error("sample size exceeds population");
  }
  std::mt19937_64 rng(seed);
  BlockDataset out;
  out.provenance = ds.provenance;
  for (std::size_t i : detail::sample_indices(ds.heads.size(), head_n, rng)) {
    out.heads.push_back(ds.heads[i]);
  }
  for (std::size_t i : detail::sample_indices(ds.tails.size(), tail_n, rng)) {
    out.tails.push_back(ds.tails[i]);
  }
  return out;
}

// Disjoint train/test head split plus a shared tail sample.
inline std::pair<BlockDataset, BlockDataset> sample_train_test(
    const BlockDataset& ds, std::size_t train_heads, std::size_t test_heads,
    std::size_t tail_n, std::uint64_t seed) {
  if (train_heads + test_heads > ds.heads.size() || tail_n > ds.tails.size()) {
    throw std::runtime_error("sample size exceeds population");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(ds.heads.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto tails = detail::sample_indices(ds.tails.size(), tail_n, rng);

  BlockDataset train, test;
  train.provenance = test.provenance = ds.provenance;
  for (std::size_t k = 0; k < train_heads; ++k) train.heads.push_back(ds.heads[idx[k]]);
  for (std::size_t k = 0; k < test_heads; ++k) {
    test.heads.push_back(ds.heads[idx[train_heads + k]]);
  }
  for (std::size_t i : tails) {
    train.tails.push_back(ds.tails[i]);
    test.tails.push_back(ds.tails[i]);
  }
  return {train, test};
}

}  // namespace lf
