#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lipidforge/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_smiles_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    auto b = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(a, b - a + 1));
  }
  return out;
}

lf::TemplateRegistry default_registry() {
  return lf::load_templates(std::string(LF_DATA_DIR) + "/reaction_templates.txt");
}

lf::PkaRules default_rules() {
  return lf::PkaRules::load(std::string(LF_DATA_DIR) + "/pka_rules.txt");
}

int cmd_blocks_build(const std::string& heads_in, const std::string& lipids_in,
                     const std::string& tails_in, const std::string& out_dir,
                     double max_mw, double max_logp, const std::string& tail_mode,
                     double theta_sim) {
  fs::create_directories(out_dir);
  lf::BlockDataset ds;
  std::map<std::string, int> head_reject, tail_reject;
  int head_malformed = 0, tail_malformed = 0, lipid_malformed = 0, lipid_no_tails = 0;
  std::set<std::string> seen_heads, seen_tails;

  lf::HeadFilterConfig hf;
  hf.max_mw = max_mw;
  hf.max_logp = max_logp;
  int head_id = 0;
  auto head_lines = read_smiles_lines(heads_in);
  for (const std::string& s : head_lines) {
    lf::Molecule m;
    try {
      m = lf::parse_smiles(s);
    } catch (const std::exception&) {
      ++head_malformed;
      continue;
    }
    lf::FilterResult r = lf::filter_head(m, hf);
    if (!r.accepted) {
      ++head_reject[r.reason];
      continue;
    }
    std::string canon = lf::canonical_smiles(m);
    if (!seen_heads.insert(canon).second) {
      ++head_reject["duplicate"];
      continue;
    }
    ds.heads.push_back(lf::BuildingBlock::make("H" + std::to_string(head_id++), m,
                                               lf::BlockKind::Head));
  }

  std::vector<lf::Molecule> reference_tails;
  auto lipid_lines = read_smiles_lines(lipids_in);
  for (const std::string& s : lipid_lines) {
    lf::Molecule m;
    try {
      m = lf::parse_smiles(s);
    } catch (const std::exception&) {
      ++lipid_malformed;
      continue;
    }
    lf::TailExtraction ex;
    try {
      ex = lf::extract_tails(m);
    } catch (const std::exception&) {
      ++lipid_no_tails;
      continue;
    }
    if (ex.tails.empty()) {
      ++lipid_no_tails;
      continue;
    }
    for (lf::Molecule& t : ex.tails) reference_tails.push_back(std::move(t));
  }

  lf::TailFilterConfig tf;
  tf.theta_sim = theta_sim;
  if (tail_mode == "ged") tf.mode = lf::TailFilterMode::GedOnly;
  else if (tail_mode == "fingerprint") tf.mode = lf::TailFilterMode::FingerprintOnly;
  else if (tail_mode == "either") tf.mode = lf::TailFilterMode::Either;
  else throw std::runtime_error("unknown tail filter mode: " + tail_mode);

  int tail_id = 0;
  auto add_tail = [&](const lf::Molecule& m) {
    std::string canon = lf::canonical_smiles(m);
    if (!seen_tails.insert(canon).second) {
      ++tail_reject["duplicate"];
      return;
    }
    ds.tails.push_back(lf::BuildingBlock::make("T" + std::to_string(tail_id++), m,
                                               lf::BlockKind::Tail));
  };
  if (!tails_in.empty()) {
    for (const std::string& s : read_smiles_lines(tails_in)) {
      lf::Molecule m;
      try {
        m = lf::parse_smiles(s);
      } catch (const std::exception&) {
        ++tail_malformed;
        continue;
      }
      lf::FilterResult r = lf::filter_tail(m, reference_tails, tf);
      if (!r.accepted) {
        ++tail_reject[r.reason];
        continue;
      }
      add_tail(m);
    }
  } else {
    for (const lf::Molecule& m : reference_tails) add_tail(m);
  }

  ds.provenance = "heads_in=" + heads_in + " lipids_in=" + lipids_in +
                  " tails_in=" + (tails_in.empty() ? "<extracted>" : tails_in) +
                  " max_mw=" + std::to_string(max_mw) +
                  " max_logp=" + std::to_string(max_logp) + " tail_mode=" + tail_mode +
                  " theta_sim=" + std::to_string(theta_sim);
  std::string out_path = (fs::path(out_dir) / "blocks.txt").string();
  lf::save_dataset(ds, out_path);

  std::cout << "heads: " << head_lines.size() << " candidates, " << ds.heads.size()
            << " accepted, " << head_malformed << " malformed\n";
  for (const auto& [reason, n] : head_reject) {
    std::cout << "  rejected (" << reason << "): " << n << '\n';
  }
  std::cout << "lipids: " << lipid_lines.size() << " inputs, "
            << reference_tails.size() << " reference tails extracted, "
            << lipid_no_tails << " without extractable tails, " << lipid_malformed
            << " malformed\n";
  std::cout << "tails: " << ds.tails.size() << " accepted, " << tail_malformed
            << " malformed\n";
  for (const auto& [reason, n] : tail_reject) {
    std::cout << "  rejected (" << reason << "): " << n << '\n';
  }
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_generate(const std::string& dataset, const std::string& engine,
                 const std::string& out_dir, const std::string& weights_path,
                 int simulations, int count, double c, std::uint64_t seed,
                 int max_expand, int iteration) {
  lf::BlockDataset ds = lf::load_dataset(dataset);
  lf::TemplateRegistry reg = default_registry();
  lf::PkaRules rules = default_rules();
  fs::create_directories(out_dir);

  std::vector<lf::GenerationRecord> gens;
  if (engine == "random") {
    std::mt19937_64 rng(lf::sub_seed(seed, "random"));
    auto r = lf::random_generate(ds, reg, rules, count, rng, iteration);
    gens = std::move(r.records);
    if (r.exhausted) std::cout << "note: unique product space exhausted\n";
  } else {
    lf::MctsConfig mc;
    mc.simulations = simulations;
    mc.c = c;
    mc.max_expand = max_expand;
    mc.seed = seed;
    mc.iteration = iteration;
    std::optional<lf::PolicyNetwork> net;
    if (engine == "guided") {
      if (weights_path.empty()) {
        throw std::runtime_error("guided engine requires --weights");
      }
      mc.engine = lf::EngineKind::Guided;
      net = lf::load_weights(weights_path);
    } else if (engine == "naive") {
      mc.engine = lf::EngineKind::Naive;
    } else {
      throw std::runtime_error("unknown engine: " + engine);
    }
    auto r = lf::run_mcts(mc, ds, reg, rules, net ? &*net : nullptr);
    gens = std::move(r.generations);
    lf::write_jsonl(r.visits, (fs::path(out_dir) / "visits.jsonl").string());
  }
  lf::write_jsonl(gens, (fs::path(out_dir) / "generations.jsonl").string());
  std::cout << lf::eval_report_text(engine, lf::evaluate(gens, rules)) << '\n';
  std::cout << "wrote " << (fs::path(out_dir) / "generations.jsonl").string() << '\n';
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides, std::uint64_t seed,
              bool seed_given, const std::string& out_dir) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = lf::parse_config_file(config_path);
  for (const std::string& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("override must be key=value: " + ov);
    }
    kv[ov.substr(0, eq)] = ov.substr(eq + 1);
  }
  lf::RunConfig cfg = lf::RunConfig::from_map(kv);
  if (seed_given) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = "out/run-" + std::to_string(cfg.seed);
  if (cfg.dataset.empty()) throw std::runtime_error("train requires dataset=");

  lf::BlockDataset ds = lf::load_dataset(cfg.dataset);
  std::optional<lf::BlockDataset> test_ds;
  if (!cfg.test_dataset.empty()) test_ds = lf::load_dataset(cfg.test_dataset);
  lf::TemplateRegistry reg = default_registry();
  lf::PkaRules rules = default_rules();

  std::optional<lf::PolicyNetwork> initial;
  if (cfg.resume_from > 0) {
    if (cfg.weights.empty()) {
      throw std::runtime_error("resume_from requires weights= snapshot path");
    }
    initial = lf::load_weights(cfg.weights);
  }
  auto result = lf::train_loop(cfg, ds, reg, rules, test_ds ? &*test_ds : nullptr,
                               std::move(initial), &std::cout);
  std::cout << "run complete: " << result.iterations.size() << " iterations, output in "
            << cfg.out_dir << '\n';
  return 0;
}

int cmd_eval(const std::vector<std::string>& logs) {
  lf::PkaRules rules = default_rules();
  for (const std::string& log : logs) {
    auto recs = lf::read_generation_records(log);
    std::cout << lf::eval_report_text(log, lf::evaluate(recs, rules)) << '\n';
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& series_specs, const std::string& out_dir) {
  lf::PkaRules rules = default_rules();
  std::map<std::string, std::vector<double>> series;
  for (const std::string& spec : series_specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("series must be NAME=log1,log2,...: " + spec);
    }
    std::string name = spec.substr(0, eq);
    std::stringstream ss(spec.substr(eq + 1));
    std::string file;
    while (std::getline(ss, file, ',')) {
      auto recs = lf::read_generation_records(file);
      series[name].push_back(lf::evaluate(recs, rules).unique_ionizable_rate);
    }
  }
  fs::create_directories(out_dir);
  lf::write_rate_csv(series, (fs::path(out_dir) / "rates.csv").string());
  lf::write_rate_svg(series, (fs::path(out_dir) / "rates.svg").string());
  std::cout << "wrote " << (fs::path(out_dir) / "rates.csv").string() << " and "
            << (fs::path(out_dir) / "rates.svg").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lipidforge: generative exploration of ionizable lipid space"};
  app.require_subcommand(1);

  // blocks build
  auto* blocks = app.add_subcommand("blocks", "building-block dataset tools");
  blocks->require_subcommand(1);
  auto* build = blocks->add_subcommand("build", "filter heads and extract/filter tails");
  std::string heads_in, lipids_in, tails_in, bb_out = "out/blocks";
  double max_mw = 500.0, max_logp = 0.0, theta_sim = 0.9;
  std::string tail_mode = "either";
  build->add_option("--heads-in", heads_in, "head candidate SMILES, one per line")
      ->required();
  build->add_option("--lipids-in", lipids_in, "reference lipid SMILES, one per line")
      ->required();
  build->add_option("--tails-in", tails_in,
                    "tail candidate SMILES (default: use extracted tails)");
  build->add_option("--out", bb_out, "output directory");
  build->add_option("--max-mw", max_mw, "head MW upper bound");
  build->add_option("--max-logp", max_logp, "head logP upper bound");
  build->add_option("--tail-mode", tail_mode, "tail filter: ged|fingerprint|either");
  build->add_option("--theta-sim", theta_sim, "tail Tanimoto threshold");

  // generate
  auto* gen = app.add_subcommand("generate", "run one engine and log products");
  std::string g_dataset, g_engine = "naive", g_out = "out/generate", g_weights;
  int g_sims = 2000, g_count = 1000, g_max_expand = 2000, g_iteration = 0;
  double g_c = 10.0;
  std::uint64_t g_seed = 0;
  gen->add_option("--dataset", g_dataset, "building-block dataset file")->required();
  gen->add_option("--engine", g_engine, "guided|naive|random");
  gen->add_option("--out", g_out, "output directory");
  gen->add_option("--weights", g_weights, "policy weights (guided engine)");
  gen->add_option("--simulations", g_sims, "MCTS simulations");
  gen->add_option("--count", g_count, "unique product target (random engine)");
  gen->add_option("--c", g_c, "UCB exploration constant");
  gen->add_option("--seed", g_seed, "master seed");
  gen->add_option("--max-expand", g_max_expand, "children per node cap");
  gen->add_option("--iteration", g_iteration, "iteration tag for log records");

  // train
  auto* tr = app.add_subcommand("train", "iterative search/train loop");
  std::string t_config, t_out;
  std::vector<std::string> t_overrides;
  std::uint64_t t_seed = 0;
  tr->add_option("--config", t_config, "key=value config file");
  tr->add_option("--set", t_overrides, "config overrides, key=value");
  auto* t_seed_opt = tr->add_option("--seed", t_seed, "master seed override");
  tr->add_option("--out", t_out, "output directory override");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate generation logs");
  std::vector<std::string> e_logs;
  ev->add_option("logs", e_logs, "generation JSONL logs")->required();

  // report
  auto* rp = app.add_subcommand("report", "CSV + SVG rate comparison");
  std::vector<std::string> r_series;
  std::string r_out = "out/report";
  rp->add_option("--series", r_series, "NAME=log1,log2,... (repeatable)")->required();
  rp->add_option("--out", r_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      return cmd_blocks_build(heads_in, lipids_in, tails_in, bb_out, max_mw, max_logp,
                              tail_mode, theta_sim);
    }
    if (gen->parsed()) {
      return cmd_generate(g_dataset, g_engine, g_out, g_weights, g_sims, g_count, g_c,
                          g_seed, g_max_expand, g_iteration);
    }
    if (tr->parsed()) {
      return cmd_train(t_config, t_overrides, t_seed, t_seed_opt->count() > 0, t_out);
    }
    if (ev->parsed()) return cmd_eval(e_logs);
    if (rp->parsed()) return cmd_report(r_series, r_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
