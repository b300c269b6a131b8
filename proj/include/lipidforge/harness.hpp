#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/blocks.hpp"
#include "lipidforge/policy.hpp"
#include "lipidforge/search.hpp"

namespace lf {

// --- configuration ---------------------------------------------------------

// flat key=value config with '#' comments
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key=value");
    }
    auto strip = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

struct RunConfig {
  std::string engine = "guided";  // guided | naive | random
  int iterations = 3;
  int runs_per_iteration = 2;
  int simulations = 500;
  int epochs = 20;
  double c = 20.0;
  double lr = 0.001;
  double tau = 1.0;
  int max_expand = 2000;
  int pairs_per_state = 64;
  double eps_smooth = 1.0;
  double dropout = 0.5;
  std::vector<int> hidden = {512, 256, 128};
  int random_count = 1000;
  std::uint64_t seed = 0;
  std::string dataset;
  std::string test_dataset;
  std::string out_dir;
  std::string weights;
  int resume_from = 0;  // last completed iteration; 0 = fresh start

  static RunConfig from_map(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    auto get = [&](const char* k) -> const std::string* {
      auto it = kv.find(k);
      return it == kv.end() ? nullptr : &it->second;
    };
    auto geti = [&](const char* k, int& dst) {
      if (const auto* v = get(k)) dst = std::stoi(*v);
    };
    auto getd = [&](const char* k, double& dst) {
      if (const auto* v = get(k)) dst = std::stod(*v);
    };
    auto gets = [&](const char* k, std::string& dst) {
      if (const auto* v = get(k)) dst = *v;
    };
    gets("engine", c.engine);
    geti("iterations", c.iterations);
    geti("runs_per_iteration", c.runs_per_iteration);
    geti("simulations", c.simulations);
    geti("epochs", c.epochs);
    getd("c", c.c);
    getd("lr", c.lr);
    getd("tau", c.tau);
    geti("max_expand", c.max_expand);
    geti("pairs_per_state", c.pairs_per_state);
    getd("eps_smooth", c.eps_smooth);
    getd("dropout", c.dropout);
    geti("random_count", c.random_count);
    if (const auto* v = get("seed")) c.seed = std::stoull(*v);
    gets("dataset", c.dataset);
    gets("test_dataset", c.test_dataset);
    gets("out", c.out_dir);
    gets("weights", c.weights);
    geti("resume_from", c.resume_from);
    if (const auto* v = get("hidden")) {
      c.hidden.clear();
      std::stringstream ss(*v);
      std::string tok;
      while (std::getline(ss, tok, ',')) c.hidden.push_back(std::stoi(tok));
      if (c.hidden.empty()) throw std::runtime_error("config: empty hidden sizes");
    }
    c.validate();
    return c;
  }

  void validate() const {
    if (engine != "guided" && engine != "naive" && engine != "random") {
      throw std::runtime_error("config: unknown engine " + engine);
    }
    if (iterations < 1 || runs_per_iteration < 1 || simulations < 1 || epochs < 1 ||
        random_count < 1 || max_expand < 1 || pairs_per_state < 1) {
      throw std::runtime_error("config: counts must be >= 1");
    }
    if (!(tau > 0.0)) throw std::runtime_error("config: tau must be positive");
  }

  std::string text() const {
    std::ostringstream os;
    os << "engine=" << engine << "\niterations=" << iterations
       << "\nruns_per_iteration=" << runs_per_iteration
       << "\nsimulations=" << simulations << "\nepochs=" << epochs << "\nc=" << c
       << "\nlr=" << lr << "\ntau=" << tau << "\nmax_expand=" << max_expand
       << "\npairs_per_state=" << pairs_per_state << "\neps_smooth=" << eps_smooth
       << "\ndropout=" << dropout << "\nhidden=";
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      os << (i ? "," : "") << hidden[i];
    }
    os << "\nrandom_count=" << random_count << "\nseed=" << seed << "\ndataset="
       << dataset << "\ntest_dataset=" << test_dataset << "\n";
    return os.str();
  }
};

// named sub-streams from the master seed, stable across components
inline std::uint64_t sub_seed(std::uint64_t master, const std::string& name,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = detail::node_stream_seed(name, master);
  h = detail::splitmix64(h ^ (a * 0x100000001b3ull));
  return detail::splitmix64(h ^ (b * 0x9e3779b97f4a7c15ull));
}

// --- evaluation ------------------------------------------------------------

struct EvalReport {
  int n_products = 0;           // terminal (two-tail) records
  int n_unique = 0;
  int n_unique_ionizable = 0;
  double unique_ionizable_rate = 0.0;
};

// dedup terminal products by canonical SMILES and recompute scores
inline EvalReport evaluate(const std::vector<GenerationRecord>& records,
                           const PkaRules& rules, const ScoringConfig& cfg = {}) {
  EvalReport rep;
  std::set<std::string> seen;
  for (const GenerationRecord& r : records) {
    if (r.path.size() != 3) continue;  // head + two tails
    ++rep.n_products;
    if (!seen.insert(r.product_smiles).second) continue;
    ++rep.n_unique;
    PropertyScore s = property_score(parse_smiles(r.product_smiles), rules);
    (void)cfg;
    if (s.ionizable) ++rep.n_unique_ionizable;
  }
  if (rep.n_unique > 0) {
    rep.unique_ionizable_rate =
        static_cast<double>(rep.n_unique_ionizable) / rep.n_unique;
  }
  return rep;
}

inline std::string eval_report_text(const std::string& label, const EvalReport& r) {
  std::ostringstream os;
  os << label << "\tproducts=" << r.n_products << "\tunique=" << r.n_unique
     << "\tunique_ionizable=" << r.n_unique_ionizable << "\trate=" << std::fixed
     << std::setprecision(4) << r.unique_ionizable_rate;
  return os.str();
}

// --- reporting -------------------------------------------------------------

// rate-vs-iteration series as CSV: iteration,<series...>
inline void write_rate_csv(const std::map<std::string, std::vector<double>>& series,
                           const std::string& path) {
  if (series.empty()) throw std::runtime_error("report: no series");
  std::size_t n = 0;
  for (const auto& [name, vals] : series) n = std::max(n, vals.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "iteration";
  for (const auto& [name, vals] : series) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << (i + 1);
    for (const auto& [name, vals] : series) {
      out << ',';
      if (i < vals.size()) out << std::setprecision(6) << vals[i];
    }
    out << '\n';
  }
}

// minimal line chart, one polyline per series, y in [0,1]
inline void write_rate_svg(const std::map<std::string, std::vector<double>>& series,
                           const std::string& path) {
  if (series.empty()) throw std::runtime_error("report: no series");
  const double width = 640, height = 400, margin = 48;
  std::size_t n = 1;
  for (const auto& [name, vals] : series) n = std::max(n, vals.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write chart: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
  int ci = 0;
  double ylab = margin;
  for (const auto& [name, vals] : series) {
    const char* color = colors[ci % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < vals.size(); ++i) {
      double x = n == 1 ? (margin + width) / 2.0
                        : margin + (width - 2 * margin) * i / (n - 1);
      double y = height - margin - (height - 2 * margin) * std::clamp(vals[i], 0.0, 1.0);
      out << x << ',' << y << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - margin + 4 << "\" y=\"" << ylab
        << "\" fill=\"" << color << "\" font-size=\"12\">" << name << "</text>\n";
    ylab += 16;
    ++ci;
  }
  out << "</svg>\n";
}

// --- featurization of training pairs ---------------------------------------

inline std::vector<FeaturizedPair> featurize_pairs(const std::vector<TrainingPair>& pairs) {
  std::map<std::string, Fingerprint> cache;
  auto fp = [&](const std::string& smiles) -> const Fingerprint* {
    if (smiles == kEmptyState) return nullptr;
    auto it = cache.find(smiles);
    if (it == cache.end()) {
      it = cache.emplace(smiles, morgan_fingerprint(parse_smiles(smiles), 2,
                                                    kPolicyHalfBits))
               .first;
    }
    return &it->second;
  };
  std::vector<FeaturizedPair> out;
  out.reserve(pairs.size());
  for (const TrainingPair& p : pairs) {
    const Fingerprint* state = fp(p.state);
    out.push_back({featurize(state, *fp(p.action_1)),
                   featurize(state, *fp(p.action_2)), p.target});
  }
  return out;
}

// --- the iterative train loop (Figure-2 style) ------------------------------

struct IterationStats {
  int iteration = 0;
  EvalReport train_eval;                 // searches run with the pre-update net
  std::optional<EvalReport> test_eval;   // held-out heads, post-update net
  std::vector<double> epoch_loss;
  int training_pairs = 0;
};

struct TrainLoopResult {
  std::vector<IterationStats> iterations;
  PolicyNetwork net;
};

inline TrainLoopResult train_loop(const RunConfig& cfg, const BlockDataset& ds,
                                  const TemplateRegistry& reg, const PkaRules& rules,
                                  const BlockDataset* test_ds = nullptr,
                                  std::optional<PolicyNetwork> initial = std::nullopt,
                                  std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  const bool persist = !cfg.out_dir.empty();
  if (persist) {
    fs::create_directories(fs::path(cfg.out_dir) / "logs");
    fs::create_directories(fs::path(cfg.out_dir) / "weights");
    fs::create_directories(fs::path(cfg.out_dir) / "reports");
    std::ofstream snap(fs::path(cfg.out_dir) / "config.snapshot");
    snap << cfg.text();
  }

  TrainLoopResult result;
  result.net = initial ? std::move(*initial)
                       : PolicyNetwork::init(cfg.hidden, sub_seed(cfg.seed, "init"),
                                             cfg.dropout);

  for (int iter = cfg.resume_from + 1; iter <= cfg.iterations; ++iter) {
    IterationStats stats;
    stats.iteration = iter;

    // search phase: runs_per_iteration independent trees with the current net
    std::vector<GenerationRecord> gens;
    std::vector<VisitRecord> visits;
    for (int run = 0; run < cfg.runs_per_iteration; ++run) {
      MctsConfig mc;
      mc.engine = EngineKind::Guided;
      mc.simulations = cfg.simulations;
      mc.c = cfg.c;
      mc.max_expand = cfg.max_expand;
      mc.seed = sub_seed(cfg.seed, "search", iter, run);
      mc.iteration = iter;
      MctsEngine::Result r;
      try {
        r = run_mcts(mc, ds, reg, rules, &result.net);
      } catch (const std::exception& e) {
        throw std::runtime_error("search stage failed (iteration " +
                                 std::to_string(iter) + ", run " +
                                 std::to_string(run) + "): " + e.what());
      }
      if (persist) {
        std::string stem = "iter" + std::to_string(iter) + "_run" + std::to_string(run);
        write_jsonl(r.generations,
                    (fs::path(cfg.out_dir) / "logs" / (stem + ".gen.jsonl")).string());
        write_jsonl(r.visits,
                    (fs::path(cfg.out_dir) / "logs" / (stem + ".visits.jsonl")).string());
      }
      gens.insert(gens.end(), r.generations.begin(), r.generations.end());
      visits.insert(visits.end(), r.visits.begin(), r.visits.end());
    }
    stats.train_eval = evaluate(gens, rules);

    // training phase: pool this iteration's visit data (reset each iteration)
    try {
      PairConfig pc;
      pc.tau = cfg.tau;
      pc.pairs_per_state = cfg.pairs_per_state;
      pc.eps_smooth = cfg.eps_smooth;
      std::mt19937_64 pair_rng(sub_seed(cfg.seed, "pairs", iter));
      auto pairs = make_training_pairs(visits, pc, pair_rng);
      stats.training_pairs = static_cast<int>(pairs.size());
      if (!pairs.empty()) {
        auto feats = featurize_pairs(pairs);
        TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.lr = cfg.lr;
        tc.seed = sub_seed(cfg.seed, "train", iter);
        TrainReport rep = train(result.net, feats, tc);
        stats.epoch_loss = rep.epoch_loss;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("training stage failed (iteration " +
                               std::to_string(iter) + "): " + e.what());
    }

    // Round weights to float32 after every update so the in-memory state
    // always equals the saved snapshot; resuming from a snapshot then
    // reproduces the remaining iterations exactly.
    for (auto& layer : result.net.layers) {
      for (auto& w : layer.w) w = static_cast<double>(static_cast<float>(w));
      for (auto& b : layer.b) b = static_cast<double>(static_cast<float>(b));
    }

    // held-out evaluation with the post-update net
    if (test_ds) {
      MctsConfig mc;
      mc.engine = EngineKind::Guided;
      mc.simulations = cfg.simulations;
      mc.c = cfg.c;
      mc.max_expand = cfg.max_expand;
      mc.seed = sub_seed(cfg.seed, "test", iter);
      mc.iteration = iter;
      try {
        auto r = run_mcts(mc, *test_ds, reg, rules, &result.net);
        stats.test_eval = evaluate(r.generations, rules);
      } catch (const std::exception& e) {
        throw std::runtime_error("test-eval stage failed (iteration " +
                                 std::to_string(iter) + "): " + e.what());
      }
    }

    if (persist) {
      save_weights(result.net, (fs::path(cfg.out_dir) / "weights" /
                                ("iter" + std::to_string(iter) + ".bin"))
                                   .string());
      std::ofstream rep(fs::path(cfg.out_dir) / "reports" /
                        ("iter" + std::to_string(iter) + ".txt"));
      rep << eval_report_text("train", stats.train_eval) << '\n';
      if (stats.test_eval) rep << eval_report_text("test", *stats.test_eval) << '\n';
    }
    if (progress) {
      *progress << "iteration " << iter << ": "
                << eval_report_text("train", stats.train_eval);
      if (stats.test_eval) {
        *progress << "  |  " << eval_report_text("test", *stats.test_eval);
      }
      *progress << '\n';
    }
    result.iterations.push_back(std::move(stats));
  }

  if (persist) {
    std::map<std::string, std::vector<double>> series;
    for (const auto& s : result.iterations) {
      series["train"].push_back(s.train_eval.unique_ionizable_rate);
      if (s.test_eval) series["test"].push_back(s.test_eval->unique_ionizable_rate);
    }
    write_rate_csv(series, (fs::path(cfg.out_dir) / "reports" / "rates.csv").string());
    write_rate_svg(series, (fs::path(cfg.out_dir) / "reports" / "rates.svg").string());
  }
  return result;
}

}  // namespace lf
