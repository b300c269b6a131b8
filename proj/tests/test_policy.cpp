#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lipidforge/policy.hpp"
#include "lipidforge/smiles.hpp"
#include "test_util.hpp"

using namespace lf;

namespace {

std::vector<float> random_features(std::mt19937_64& rng, double density = 0.05) {
  std::bernoulli_distribution bit(density);
  std::vector<float> x(kPolicyInputBits, 0.0f);
  for (auto& v : x) v = bit(rng) ? 1.0f : 0.0f;
  return x;
}

}  // namespace

TEST_CASE("featurize layout") {
  Molecule m = parse_smiles("NCCO");
  auto empty_state = featurize(nullptr, m);
  REQUIRE(empty_state.size() == 2048);
  for (int i = 0; i < 1024; ++i) CHECK(empty_state[i] == 0.0f);
  float any = 0.0f;
  for (int i = 1024; i < 2048; ++i) any += empty_state[i];
  CHECK(any > 0.0f);

  auto same = featurize(&m, m);
  for (int i = 0; i < 1024; ++i) CHECK(same[i] == same[1024 + i]);
  CHECK(featurize(&m, m) == same);
}

TEST_CASE("forward basics") {
  PolicyNetwork net = PolicyNetwork::init({8, 8, 8}, 1);
  std::mt19937_64 rng(2);
  auto x = random_features(rng);
  // eval-mode repeatability
  CHECK(forward(net, x) == forward(net, x));
  // zero weights give zero logit
  for (auto& l : net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  CHECK(forward(net, x) == 0.0);
  CHECK_THROWS(forward(net, std::vector<float>(100, 0.0f)));
}

TEST_CASE("priors closed forms") {
  // zero net: equal logits -> uniform
  PolicyNetwork net = PolicyNetwork::init({8, 8, 8}, 1);
  for (auto& l : net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  std::mt19937_64 rng(3);
  std::vector<std::vector<float>> feats;
  for (int i = 0; i < 4; ++i) feats.push_back(random_features(rng));
  auto p = priors(net, feats);
  REQUIRE(p.size() == 4);
  for (double v : p) CHECK(v == Catch::Approx(0.25).epsilon(1e-12));

  // single action
  CHECK(priors(net, {feats[0]})[0] == 1.0);
  CHECK_THROWS(priors(net, {}));

  // logits [ln2, 0] -> [2/3, 1/3]: bias the output layer on a net whose
  // hidden path is dead, then drive the logit via the output bias only
  auto softmax2 = [](double a, double b) {
    double mx = std::max(a, b);
    double ea = std::exp(a - mx), eb = std::exp(b - mx);
    return std::pair{ea / (ea + eb), eb / (ea + eb)};
  };
  auto [pa, pb] = softmax2(std::log(2.0), 0.0);
  CHECK(pa == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(pb == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("priors sum to one and are shift invariant") {
  PolicyNetwork net = PolicyNetwork::init({16, 8, 8}, 5);
  std::mt19937_64 rng(7);
  std::vector<std::vector<float>> feats;
  for (int i = 0; i < 10; ++i) feats.push_back(random_features(rng));
  auto p = priors(net, feats);
  double sum = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    sum += v;
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));

  // adding a constant to every logit (via the output bias) leaves priors put
  PolicyNetwork shifted = net;
  shifted.layers.back().b[0] += 3.7;
  auto q = priors(shifted, feats);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(q[i] == Catch::Approx(p[i]).margin(1e-9));
  }
}

TEST_CASE("search probabilities") {
  auto p = search_probabilities({2, 2}, 1.0);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  p = search_probabilities({8, 2}, 1.0);
  CHECK(p[0] == Catch::Approx(0.8).epsilon(1e-12));
  CHECK(p[1] == Catch::Approx(0.2).epsilon(1e-12));
  // large tau flattens toward uniform over the support
  p = search_probabilities({8, 2}, 1000.0);
  CHECK(p[0] == Catch::Approx(0.5005).margin(1e-3));
  CHECK(p[1] == Catch::Approx(0.4995).margin(1e-3));
  // 0^(1/tau) = 0: zero-count actions get zero mass
  p = search_probabilities({0, 5}, 2.0);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 1.0);
  // exact proportionality at tau = 1
  p = search_probabilities({1, 2, 3, 4}, 1.0);
  CHECK(p[3] == Catch::Approx(0.4).epsilon(1e-12));

  CHECK_THROWS(search_probabilities({0, 0}, 1.0));
  CHECK_THROWS(search_probabilities({1, 2}, 0.0));
  CHECK_THROWS(search_probabilities({-1, 2}, 1.0));
}

TEST_CASE("training pair construction") {
  std::vector<VisitRecord> records = {
      {"EMPTY", "CCN", 10, 11},
      {"EMPTY", "CCO", 1, 11},
      {"CCN", "CCCC(=O)O", 5, 5},  // single action: skipped
      {"CCO", "CC", 0, 0},         // all-zero state: skipped
      {"CCO", "CCC", 0, 0},
  };
  std::mt19937_64 rng(1);
  PairConfig cfg;
  cfg.eps_smooth = 0.0;
  auto pairs = make_training_pairs(records, cfg, rng);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].state == "EMPTY");
  // (1/tau)(ln 10 - ln 1)
  CHECK(pairs[0].target == Catch::Approx(std::log(10.0)).margin(1e-4));

  // equal counts -> zero target; smoothing shifts both equally
  records = {{"EMPTY", "a", 3, 6}, {"EMPTY", "b", 3, 6}};
  cfg.eps_smooth = 1.0;
  pairs = make_training_pairs(records, cfg, rng);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].target == 0.0);

  // pair budget respected and deterministic under a fixed seed
  records.clear();
  for (int i = 0; i < 30; ++i) {
    records.push_back({"EMPTY", "a" + std::to_string(i), i, 435});
  }
  cfg.pairs_per_state = 10;
  std::mt19937_64 r1(9), r2(9);
  auto p1 = make_training_pairs(records, cfg, r1);
  auto p2 = make_training_pairs(records, cfg, r2);
  REQUIRE(p1.size() == 10);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].action_1 == p2[i].action_1);
    CHECK(p1[i].action_2 == p2[i].action_2);
  }
}

TEST_CASE("pairwise loss values") {
  PolicyNetwork net = PolicyNetwork::init({8, 8, 8}, 1);
  for (auto& l : net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  std::mt19937_64 rng(4);
  FeaturizedPair pair{random_features(rng), random_features(rng), 1.5};
  // zero net: delta f = 0, loss = target^2
  auto r = pairwise_loss(net, pair);
  CHECK(r.loss == Catch::Approx(2.25));
  // target met exactly -> zero loss, zero gradient
  pair.target = 0.0;
  r = pairwise_loss(net, pair);
  CHECK(r.loss == 0.0);
  double gsum = 0.0;
  for (const auto& l : r.grads.g) {
    for (double v : l.w) gsum += std::fabs(v);
    for (double v : l.b) gsum += std::fabs(v);
  }
  CHECK(gsum == 0.0);
  // MAE variant
  pair.target = 2.0;
  CHECK(pairwise_loss(net, pair, LossMode::MAE).loss == Catch::Approx(2.0));
}

TEST_CASE("analytic gradient matches central finite differences") {
  PolicyNetwork net = PolicyNetwork::init({8, 8, 8}, 77);
  std::mt19937_64 rng(8);
  FeaturizedPair pair{random_features(rng, 0.1), random_features(rng, 0.1), 0.7};
  PairLoss analytic = pairwise_loss(net, pair);

  const double h = 1e-4;
  auto loss_at = [&](PolicyNetwork& n) {
    ForwardTrace t;
    double f1 = forward(n, pair.x1);
    double f2 = forward(n, pair.x2);
    double d = f1 - f2 - pair.target;
    return d * d;
  };
  double max_rel = 0.0;
  int checked = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto check_array = [&](std::vector<double>& w, const std::vector<double>& g) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        double keep = w[i];
        w[i] = keep + h;
        double lp = loss_at(net);
        w[i] = keep - h;
        double lm = loss_at(net);
        w[i] = keep;
        double fd = (lp - lm) / (2.0 * h);
        double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1e-8});
        double rel = std::fabs(fd - g[i]) / denom;
        if (std::fabs(fd) > 1e-7 || std::fabs(g[i]) > 1e-7) {
          max_rel = std::max(max_rel, rel);
          ++checked;
        }
      }
    };
    check_array(net.layers[l].w, analytic.grads.g[l].w);
    check_array(net.layers[l].b, analytic.grads.g[l].b);
  }
  INFO("checked " << checked << " parameters, max rel err " << max_rel);
  CHECK(checked > 1000);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("training reduces loss and is reproducible") {
  PolicyNetwork net = PolicyNetwork::init({16, 8, 8}, 3);
  std::mt19937_64 rng(10);
  std::vector<FeaturizedPair> pairs;
  for (int i = 0; i < 24; ++i) {
    pairs.push_back({random_features(rng, 0.1), random_features(rng, 0.1),
                     (i % 3 == 0) ? 1.0 : -0.5});
  }
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.seed = 42;
  PolicyNetwork net2 = net;
  TrainReport rep = train(net, pairs, cfg);
  TrainReport rep2 = train(net2, pairs, cfg);
  REQUIRE(rep.epoch_loss.size() == 12);
  CHECK(rep.epoch_loss.back() < rep.epoch_loss.front());
  // bit-identical reruns
  for (std::size_t i = 0; i < rep.epoch_loss.size(); ++i) {
    CHECK(rep.epoch_loss[i] == rep2.epoch_loss[i]);
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(net.layers[l].w == net2.layers[l].w);
  }
}

TEST_CASE("training edge cases") {
  PolicyNetwork net = PolicyNetwork::init({8, 8, 8}, 3);
  std::mt19937_64 rng(11);
  std::vector<FeaturizedPair> pairs = {
      {random_features(rng, 0.1), random_features(rng, 0.1), 0.4}};
  // lr = 0 leaves weights unchanged
  PolicyNetwork before = net;
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 3;
  train(net, pairs, cfg);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(net.layers[l].w == before.layers[l].w);
    CHECK(net.layers[l].b == before.layers[l].b);
  }
  // single pair, many epochs, no dropout: near-zero final loss
  cfg.lr = 0.005;
  cfg.epochs = 300;
  cfg.use_dropout = false;
  TrainReport rep = train(net, pairs, cfg);
  CHECK(rep.epoch_loss.back() < 1e-4);
  CHECK_THROWS(train(net, {}, cfg));
}

TEST_CASE("weight round trip") {
  PolicyNetwork net = PolicyNetwork::init({16, 8, 8}, 13);
  std::string path = "/tmp/lf_policy_weights.bin";
  save_weights(net, path);
  PolicyNetwork loaded = load_weights(path);
  REQUIRE(loaded.dims() == net.dims());
  CHECK(loaded.dropout_rate == net.dropout_rate);

  // float32 quantization is a fixpoint: a second round trip is bit-exact
  std::string path2 = "/tmp/lf_policy_weights2.bin";
  save_weights(loaded, path2);
  PolicyNetwork again = load_weights(path2);
  std::mt19937_64 rng(14);
  auto x = random_features(rng);
  CHECK(forward(loaded, x) == forward(again, x));
  for (std::size_t l = 0; l < loaded.layers.size(); ++l) {
    CHECK(loaded.layers[l].w == again.layers[l].w);
    CHECK(loaded.layers[l].b == again.layers[l].b);
  }
}

TEST_CASE("weight file error cases") {
  CHECK_THROWS(load_weights("/nonexistent/weights.bin"));
  std::string path = "/tmp/lf_policy_bad.bin";
  std::ofstream(path).close();
  CHECK_THROWS(load_weights(path));  // empty
  {
    std::ofstream out(path);
    out << "NOTPOLICY 1 1 2048 1 0.5\n";
  }
  CHECK_THROWS(load_weights(path));  // bad magic
  {
    std::ofstream out(path);
    out << "LFPOLICY 1 1 2048 1 0.5\n";  // header fine, no payload
  }
  CHECK_THROWS(load_weights(path));  // truncated
  {
    std::ofstream out(path);
    out << "LFPOLICY 1 1 64 1 0.5\n";  // wrong input width
  }
  CHECK_THROWS(load_weights(path));
}
