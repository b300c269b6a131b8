#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/blocks.hpp"
#include "lipidforge/policy.hpp"
#include "lipidforge/predictors.hpp"
#include "lipidforge/reaction.hpp"
#include "lipidforge/records.hpp"

namespace lf {

// --- tree ------------------------------------------------------------------

struct SearchNode {
  std::optional<Molecule> state;  // nullopt: EMPTY root or not yet materialized
  std::string state_smiles = kEmptyState;
  int N = 0;
  double W = 0.0;
  double P = 0.0;
  int depth = 0;
  int tails_attached = 0;
  bool materialized = false;
  bool dead = false;

  // incoming edge
  std::string action_id;       // building block id
  std::string action_smiles;   // canonical SMILES of the block
  std::string template_id;     // reaction used on materialization

  SearchNode* parent = nullptr;
  std::map<std::string, std::unique_ptr<SearchNode>> children;  // by block id

  bool terminal() const { return materialized && tails_attached == 2; }
};

// --- UCB -------------------------------------------------------------------

// guided engine: Q + c * P * sqrt(parent.N) / (child.N + 1), Q = 0 when unvisited
inline double ucb_guided(const SearchNode& parent, const SearchNode& child, double c) {
  double q = child.N == 0 ? 0.0 : child.W / child.N;
  double u = c * child.P * std::sqrt(static_cast<double>(parent.N)) / (child.N + 1);
  return q + u;
}

// naive engine: W/N (0 when unvisited) + c * P * sqrt(1 + n) / (1 + N),
// n = total visit count of all nodes at the node's level
inline double ucb_naive(const SearchNode& node, long sibling_visit_total, double c) {
  double q = node.N == 0 ? 0.0 : node.W / node.N;
  double u = c * node.P * std::sqrt(1.0 + static_cast<double>(sibling_visit_total)) /
             (1.0 + node.N);
  return q + u;
}

// --- engine ----------------------------------------------------------------

enum class EngineKind { Guided, Naive };

struct MctsConfig {
  EngineKind engine = EngineKind::Guided;
  int simulations = 10000;
  double c = 20.0;  // paper defaults: 20 guided, 10 naive
  int max_expand = 2000;
  std::uint64_t seed = 0;
  int iteration = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t node_stream_seed(const std::string& state_smiles,
                                      std::uint64_t global_seed) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : state_smiles) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return splitmix64(h ^ global_seed);
}

}  // namespace detail

// Deterministic product rule shared by search, replay and the random
// baseline: the first entry of the sorted forward enumeration.
inline std::optional<std::pair<std::string, Molecule>> first_product(
    const TemplateRegistry& reg, const Molecule& state, const Molecule& block) {
  auto products = enumerate_products(reg, state, block);
  if (products.empty()) return std::nullopt;
  return std::move(products.front());
}

// Seeded per-node action sampling (Algorithm 7 analogue): heads for the
// EMPTY state, reactive tails otherwise, empty at terminals.
inline std::vector<const BuildingBlock*> next_building_blocks(
    const std::string& state_smiles, const Molecule* state, int tails_attached,
    const BlockDataset& ds, const TemplateRegistry& reg, int max_expand,
    std::uint64_t global_seed) {
  std::vector<const BuildingBlock*> out;
  if (tails_attached >= 2) return out;
  std::mt19937_64 rng(detail::node_stream_seed(state_smiles, global_seed));
  if (!state) {
    std::vector<std::size_t> idx(ds.heads.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n = std::min<std::size_t>(max_expand, idx.size());
    for (std::size_t k = 0; k < n; ++k) out.push_back(&ds.heads[idx[k]]);
    return out;
  }
  std::vector<std::size_t> idx(ds.tails.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t k : idx) {
    if (static_cast<int>(out.size()) >= max_expand) break;
    const BuildingBlock& tail = ds.tails[k];
    Molecule tm = parse_smiles(tail.smiles);
    if (can_react(reg, *state, tm)) out.push_back(&ds.tails[k]);
  }
  return out;
}

class MctsEngine {
 public:
  MctsEngine(MctsConfig config, const BlockDataset& ds, const TemplateRegistry& reg,
             const PkaRules& rules, const PolicyNetwork* policy = nullptr)
      : cfg_(config), ds_(ds), reg_(reg), rules_(rules), policy_(policy) {
    if (cfg_.simulations < 0) throw std::invalid_argument("simulations must be >= 0");
    if (cfg_.max_expand <= 0) throw std::invalid_argument("max_expand must be positive");
    if (cfg_.engine == EngineKind::Guided && !policy_) {
      throw std::invalid_argument("guided engine requires a policy network");
    }
    root_ = std::make_unique<SearchNode>();
    root_->materialized = true;  // EMPTY is a valid state
  }

  struct Result {
    std::vector<GenerationRecord> generations;
    std::vector<VisitRecord> visits;
  };

  Result run() {
    Result out;
    if (cfg_.simulations == 0) return out;
    expand(*root_);
    for (int sim = 0; sim < cfg_.simulations; ++sim) {
      simulate(sim, out.generations);
    }
    export_visits(*root_, out.visits);
    return out;
  }

  const SearchNode& root() const { return *root_; }

  // selection by argmax UCB with canonical-SMILES tie-break; materializes
  // the arrival leaf
  std::pair<SearchNode*, std::vector<SearchNode*>> select() {
    SearchNode* node = root_.get();
    std::vector<SearchNode*> path;
    while (!node->children.empty()) {
      SearchNode* best = nullptr;
      double best_score = 0.0;
      for (auto& [id, child] : node->children) {
        double score = cfg_.engine == EngineKind::Guided
                           ? ucb_guided(*node, *child, cfg_.c)
                           : ucb_naive(*child, level_visits(child->depth), cfg_.c);
        if (!best || score > best_score ||
            (score == best_score && child->action_smiles < best->action_smiles)) {
          best = child.get();
          best_score = score;
        }
      }
      node = best;
      path.push_back(node);
      if (!node->materialized) materialize(*node);
    }
    return {node, path};
  }

  void expand(SearchNode& leaf) {
    if (leaf.dead || leaf.terminal() || !leaf.children.empty()) return;
    const Molecule* state = leaf.depth == 0 ? nullptr : &*leaf.state;
    auto actions = next_building_blocks(leaf.state_smiles, state, leaf.tails_attached,
                                        ds_, reg_, cfg_.max_expand, cfg_.seed);
    if (actions.empty()) {
      leaf.dead = true;
      return;
    }
    std::vector<double> ps(actions.size(), 0.0);
    if (cfg_.engine == EngineKind::Guided) {
      std::optional<Fingerprint> sfp;
      if (state) sfp = morgan_fingerprint(*state, 2, kPolicyHalfBits);
      std::vector<std::vector<float>> feats;
      feats.reserve(actions.size());
      for (const BuildingBlock* a : actions) {
        feats.push_back(featurize(sfp ? &*sfp : nullptr, a->fingerprint));
      }
      ps = priors(*policy_, feats);
    } else {
      // naive prior: mean property score of the node's member molecules
      double state_score =
          state ? property_score(*state, rules_).total : 0.0;
      for (std::size_t i = 0; i < actions.size(); ++i) {
        double a = property_score(parse_smiles(actions[i]->smiles), rules_).total;
        ps[i] = state ? 0.5 * (state_score + a) : a;
      }
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
      auto child = std::make_unique<SearchNode>();
      child->parent = &leaf;
      child->depth = leaf.depth + 1;
      child->P = ps[i];
      child->action_id = actions[i]->id;
      child->action_smiles = actions[i]->smiles;
      child->tails_attached = leaf.tails_attached;  // updated on materialization
      leaf.children.emplace(actions[i]->id, std::move(child));
    }
  }

  // uniformly random continuation until a two-tail lipid or a dead end
  double rollout(SearchNode& leaf, std::mt19937_64& rng,
                 std::vector<PathStep>* rollout_path = nullptr,
                 std::string* final_smiles = nullptr) {
    if (leaf.dead) return 0.0;
    Molecule state = *leaf.state;
    std::string smiles = leaf.state_smiles;
    int tails = leaf.tails_attached;
    while (tails < 2) {
      auto actions = next_building_blocks(smiles, leaf.depth == 0 ? nullptr : &state,
                                          tails, ds_, reg_, cfg_.max_expand, cfg_.seed);
      if (actions.empty()) return 0.0;
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
      const BuildingBlock* a = actions[pick(rng)];
      Molecule block = parse_smiles(a->smiles);
      auto prod = first_product(reg_, state, block);
      if (!prod) return 0.0;
      const ReactionTemplate* t = reg_.find(prod->first);
      state = std::move(prod->second);
      smiles = canonical_smiles(state);
      tails += t && t->tail_consuming ? 1 : 0;
      if (rollout_path) rollout_path->push_back({a->id, prod->first});
    }
    if (final_smiles) *final_smiles = smiles;
    return property_score(state, rules_).total;
  }

  // Algorithm 4 literal: path nodes get N+1, W+v; the root over-increments
  // by the whole path length
  void backpropagate(double value, const std::vector<SearchNode*>& path) {
    for (SearchNode* node : path) {
      node->N += 1;
      node->W += value;
      bump_level(node->depth);
    }
    root_->N += static_cast<int>(path.size());
  }

  long level_visits(int depth) const {
    return depth < static_cast<int>(level_n_.size()) ? level_n_[depth] : 0;
  }

 private:
  void materialize(SearchNode& node) {
    SearchNode& parent = *node.parent;
    if (parent.depth == 0) {
      node.state = parse_smiles(node.action_smiles);
      node.state_smiles = node.action_smiles;
      node.tails_attached = 0;
      node.materialized = true;
      return;
    }
    Molecule block = parse_smiles(node.action_smiles);
    auto prod = first_product(reg_, *parent.state, block);
    if (!prod) {
      node.dead = true;
      node.materialized = true;
      node.state_smiles.clear();
      return;
    }
    const ReactionTemplate* t = reg_.find(prod->first);
    node.template_id = prod->first;
    node.state = std::move(prod->second);
    node.state_smiles = canonical_smiles(*node.state);
    node.tails_attached = parent.tails_attached + (t && t->tail_consuming ? 1 : 0);
    node.materialized = true;
  }

  std::vector<PathStep> tree_path(const std::vector<SearchNode*>& path) const {
    std::vector<PathStep> steps;
    for (const SearchNode* n : path) steps.push_back({n->action_id, n->template_id});
    return steps;
  }

  void simulate(int sim, std::vector<GenerationRecord>& gens) {
    auto [leaf, path] = select();
    double value = 0.0;
    if (leaf->dead) {
      value = 0.0;
    } else if (leaf->terminal()) {
      value = property_score(*leaf->state, rules_).total;
      log_product(gens, leaf->state_smiles, tree_path(path), sim);
    } else {
      expand(*leaf);
      if (leaf->dead) {
        value = 0.0;
      } else {
        if (cfg_.engine == EngineKind::Naive && leaf->depth >= 2) {
          log_intermediate(gens, *leaf, tree_path(path), sim);
        }
        std::mt19937_64 rng(detail::splitmix64(cfg_.seed ^ (0x51ed2701ull + sim)));
        std::vector<PathStep> tail_steps;
        std::string final_smiles;
        value = rollout(*leaf, rng, &tail_steps, &final_smiles);
        if (!final_smiles.empty()) {
          std::vector<PathStep> full = tree_path(path);
          full.insert(full.end(), tail_steps.begin(), tail_steps.end());
          log_product(gens, final_smiles, full, sim);
        }
      }
    }
    backpropagate(value, path);
  }

  void log_product(std::vector<GenerationRecord>& gens, const std::string& smiles,
                   std::vector<PathStep> steps, int sim) {
    GenerationRecord r;
    r.product_smiles = smiles;
    r.path = std::move(steps);
    r.score = property_score(parse_smiles(smiles), rules_);
    r.engine = cfg_.engine == EngineKind::Guided ? "guided" : "naive";
    r.simulation_index = sim;
    r.iteration = cfg_.iteration;
    gens.push_back(std::move(r));
  }

  void log_intermediate(std::vector<GenerationRecord>& gens, const SearchNode& node,
                        std::vector<PathStep> steps, int sim) {
    if (!logged_intermediates_.insert(node.state_smiles).second) return;
    log_product(gens, node.state_smiles, std::move(steps), sim);
  }

  void bump_level(int depth) {
    if (depth >= static_cast<int>(level_n_.size())) level_n_.resize(depth + 1, 0);
    ++level_n_[depth];
  }

  void export_visits(const SearchNode& node, std::vector<VisitRecord>& out) const {
    if (node.children.empty()) return;
    int total = 0;
    for (const auto& [id, child] : node.children) total += child->N;
    for (const auto& [id, child] : node.children) {
      out.push_back({node.state_smiles, child->action_smiles, child->N, total});
      export_visits(*child, out);
    }
  }

  MctsConfig cfg_;
  const BlockDataset& ds_;
  const TemplateRegistry& reg_;
  const PkaRules& rules_;
  const PolicyNetwork* policy_;
  std::unique_ptr<SearchNode> root_;
  std::vector<long> level_n_;
  std::set<std::string> logged_intermediates_;
};

inline MctsEngine::Result run_mcts(const MctsConfig& cfg, const BlockDataset& ds,
                                   const TemplateRegistry& reg, const PkaRules& rules,
                                   const PolicyNetwork* policy = nullptr) {
  MctsEngine engine(cfg, ds, reg, rules, policy);
  return engine.run();
}

// --- replay ----------------------------------------------------------------

// Re-derives the product of a generation path through the reaction rules;
// returns the canonical SMILES the path produces.
inline std::string replay_path(const std::vector<PathStep>& path,
                               const BlockDataset& ds, const TemplateRegistry& reg) {
  if (path.empty()) throw std::runtime_error("replay: empty path");
  auto find_block = [&](const std::string& id) -> const BuildingBlock& {
    for (const auto& b : ds.heads) {
      if (b.id == id) return b;
    }
    for (const auto& b : ds.tails) {
      if (b.id == id) return b;
    }
    throw std::runtime_error("replay: unknown building block " + id);
  };
  Molecule state = parse_smiles(find_block(path[0].block_id).smiles);
  for (std::size_t i = 1; i < path.size(); ++i) {
    Molecule block = parse_smiles(find_block(path[i].block_id).smiles);
    auto prod = first_product(reg, state, block);
    if (!prod) throw std::runtime_error("replay: reaction failed at step " + std::to_string(i));
    if (prod->first != path[i].template_id) {
      throw std::runtime_error("replay: template mismatch at step " + std::to_string(i));
    }
    state = std::move(prod->second);
  }
  return canonical_smiles(state);
}

// --- random baseline -------------------------------------------------------

struct RandomGenResult {
  std::vector<GenerationRecord> records;
  bool exhausted = false;
};

inline RandomGenResult random_generate(const BlockDataset& ds,
                                       const TemplateRegistry& reg,
                                       const PkaRules& rules, int count,
                                       std::mt19937_64& rng, int iteration = 0) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  if (ds.heads.empty() || ds.tails.empty()) {
    throw std::invalid_argument("random_generate needs heads and tails");
  }
  RandomGenResult out;
  std::set<std::string> seen;

  auto try_chain = [&](const BuildingBlock& head, const BuildingBlock& t1,
                       const BuildingBlock& t2) -> bool {
    Molecule state = parse_smiles(head.smiles);
    std::vector<PathStep> steps{{head.id, ""}};
    for (const BuildingBlock* t : {&t1, &t2}) {
      auto prod = first_product(reg, state, parse_smiles(t->smiles));
      if (!prod) return false;
      steps.push_back({t->id, prod->first});
      state = std::move(prod->second);
    }
    std::string smiles = canonical_smiles(state);
    if (!seen.insert(smiles).second) return false;
    GenerationRecord r;
    r.product_smiles = smiles;
    r.path = std::move(steps);
    r.score = property_score(state, rules);
    r.engine = "random";
    r.simulation_index = static_cast<int>(out.records.size());
    r.iteration = iteration;
    out.records.push_back(std::move(r));
    return true;
  };

  std::uniform_int_distribution<std::size_t> ph(0, ds.heads.size() - 1);
  std::uniform_int_distribution<std::size_t> pt(0, ds.tails.size() - 1);
  long attempts = 0;
  const long attempt_cap = 500L * count + 1000;
  while (static_cast<int>(out.records.size()) < count && attempts < attempt_cap) {
    ++attempts;
    try_chain(ds.heads[ph(rng)], ds.tails[pt(rng)], ds.tails[pt(rng)]);
  }
  if (static_cast<int>(out.records.size()) < count) {
    // deterministic sweep to distinguish an unlucky sample from exhaustion
    for (const auto& head : ds.heads) {
      for (const auto& t1 : ds.tails) {
        for (const auto& t2 : ds.tails) {
          if (static_cast<int>(out.records.size()) >= count) return out;
          try_chain(head, t1, t2);
        }
      }
    }
    out.exhausted = static_cast<int>(out.records.size()) < count;
  }
  return out;
}

}  // namespace lf
