#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lipidforge/fingerprint.hpp"
#include "lipidforge/molecule.hpp"
#include "lipidforge/records.hpp"

namespace lf {

inline constexpr int kPolicyInputBits = 2048;
inline constexpr int kPolicyHalfBits = 1024;

// --- featurization ---------------------------------------------------------

// state fingerprint (nullptr = EMPTY root state) followed by the action
// fingerprint, each 1024 bits
inline std::vector<float> featurize(const Fingerprint* state, const Fingerprint& action) {
  if ((state && state->nbits != kPolicyHalfBits) || action.nbits != kPolicyHalfBits) {
    throw std::invalid_argument("featurize expects 1024-bit fingerprints");
  }
  std::vector<float> x(kPolicyInputBits, 0.0f);
  if (state) {
    for (int i = 0; i < kPolicyHalfBits; ++i) x[i] = state->test(i) ? 1.0f : 0.0f;
  }
  for (int i = 0; i < kPolicyHalfBits; ++i) {
    x[kPolicyHalfBits + i] = action.test(i) ? 1.0f : 0.0f;
  }
  return x;
}

inline std::vector<float> featurize(const Molecule* state, const Molecule& action) {
  Fingerprint afp = morgan_fingerprint(action, 2, kPolicyHalfBits);
  if (!state) return featurize(nullptr, afp);
  Fingerprint sfp = morgan_fingerprint(*state, 2, kPolicyHalfBits);
  return featurize(&sfp, afp);
}

// --- network ---------------------------------------------------------------

class PolicyNetwork {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;
  };

  std::vector<Layer> layers;
  double dropout_rate = 0.5;

  static PolicyNetwork init(const std::vector<int>& hidden, std::uint64_t seed,
                            double dropout = 0.5) {
    if (hidden.empty()) throw std::invalid_argument("need at least one hidden layer");
    PolicyNetwork net;
    net.dropout_rate = dropout;
    std::vector<int> dims;
    dims.push_back(kPolicyInputBits);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      Layer layer;
      layer.in = dims[l];
      layer.out = dims[l + 1];
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / layer.in));
      layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
      for (double& v : layer.w) v = dist(rng);
      layer.b.assign(layer.out, 0.0);
      net.layers.push_back(std::move(layer));
    }
    return net;
  }

  std::vector<int> dims() const {
    std::vector<int> d;
    for (const Layer& l : layers) d.push_back(l.in);
    d.push_back(layers.back().out);
    return d;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

// Cached activations for exact backpropagation. `mask` holds the inverted
// dropout scale per hidden unit (all ones in eval mode).
struct ForwardTrace {
  std::vector<std::vector<double>> input;  // input[l] = activations fed to layer l
  std::vector<std::vector<double>> pre;    // pre[l] = z of layer l
  std::vector<std::vector<double>> mask;   // mask[l] for hidden layers
};

namespace detail {

inline double forward_impl(const PolicyNetwork& net, const std::vector<float>& x,
                           ForwardTrace* trace, std::mt19937_64* dropout_rng) {
  if (static_cast<int>(x.size()) != kPolicyInputBits) {
    throw std::invalid_argument("policy input width must be 2048");
  }
  std::vector<double> a(x.begin(), x.end());
  if (trace) {
    trace->input.clear();
    trace->pre.clear();
    trace->mask.clear();
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const PolicyNetwork::Layer& layer = net.layers[l];
    if (trace) trace->input.push_back(a);
    std::vector<double> z(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double sum = layer.b[o];
      const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) sum += row[i] * a[i];
      z[o] = sum;
    }
    if (trace) trace->pre.push_back(z);
    const bool last = l + 1 == net.layers.size();
    if (!last) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU
      std::vector<double> mask(z.size(), 1.0);
      if (dropout_rng && net.dropout_rate > 0.0) {
        std::bernoulli_distribution drop(net.dropout_rate);
        const double scale = 1.0 / (1.0 - net.dropout_rate);
        for (std::size_t i = 0; i < z.size(); ++i) {
          mask[i] = drop(*dropout_rng) ? 0.0 : scale;
          z[i] *= mask[i];
        }
      }
      if (trace) trace->mask.push_back(std::move(mask));
    }
    a = std::move(z);
  }
  double out = a[0];
  if (!std::isfinite(out)) throw std::runtime_error("policy forward produced non-finite logit");
  return out;
}

}  // namespace detail

// eval-mode forward: deterministic, dropout off
inline double forward(const PolicyNetwork& net, const std::vector<float>& x) {
  return detail::forward_impl(net, x, nullptr, nullptr);
}

struct Gradients {
  std::vector<PolicyNetwork::Layer> g;

  static Gradients zeros_like(const PolicyNetwork& net) {
    Gradients gr;
    for (const auto& l : net.layers) {
      PolicyNetwork::Layer z;
      z.in = l.in;
      z.out = l.out;
      z.w.assign(l.w.size(), 0.0);
      z.b.assign(l.b.size(), 0.0);
      gr.g.push_back(std::move(z));
    }
    return gr;
  }
};

// Accumulates d(loss)/d(params) given d(loss)/d(logit) for one traced forward.
inline void backward(const PolicyNetwork& net, const ForwardTrace& trace,
                     double dloss_dout, Gradients& grads) {
  std::vector<double> delta{dloss_dout};  // gradient w.r.t. layer output
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const PolicyNetwork::Layer& layer = net.layers[l];
    PolicyNetwork::Layer& g = grads.g[l];
    const std::vector<double>& in = trace.input[l];
    // delta currently refers to post-(ReLU+dropout) outputs for hidden
    // layers; fold the elementwise derivatives back to pre-activation
    std::vector<double> dz(layer.out);
    const bool last = l + 1 == static_cast<int>(net.layers.size());
    for (int o = 0; o < layer.out; ++o) {
      double d = delta[o];
      if (!last) {
        d *= trace.mask[l][o];
        if (trace.pre[l][o] <= 0.0) d = 0.0;
      }
      dz[o] = d;
    }
    std::vector<double> dprev(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = dz[o];
      if (d == 0.0) continue;
      double* grow = g.w.data() + static_cast<std::size_t>(o) * layer.in;
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        grow[i] += d * in[i];
        dprev[i] += d * wrow[i];
      }
      g.b[o] += d;
    }
    delta = std::move(dprev);
  }
}

// --- priors & search probabilities -----------------------------------------

// softmax over per-action logits, eval mode, max-subtracted
inline std::vector<double> priors(const PolicyNetwork& net,
                                  const std::vector<std::vector<float>>& features) {
  if (features.empty()) throw std::invalid_argument("priors: no actions");
  std::vector<double> logits;
  logits.reserve(features.size());
  for (const auto& x : features) logits.push_back(forward(net, x));
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline std::vector<double> search_probabilities(const std::vector<int>& counts,
                                                double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  double sum = 0.0;
  std::vector<double> p(counts.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw std::invalid_argument("negative visit count");
    if (counts[i] > 0) {
      p[i] = std::pow(static_cast<double>(counts[i]), 1.0 / tau);
      sum += p[i];
    }
  }
  if (sum == 0.0) throw std::invalid_argument("all visit counts are zero");
  for (double& v : p) v /= sum;
  return p;
}

// --- training data ---------------------------------------------------------

struct TrainingPair {
  std::string state;  // canonical SMILES or EMPTY
  std::string action_1;
  std::string action_2;
  double target = 0.0;
};

struct PairConfig {
  double tau = 1.0;
  int pairs_per_state = 64;
  double eps_smooth = 1.0;
};

inline std::vector<TrainingPair> make_training_pairs(
    const std::vector<VisitRecord>& records, const PairConfig& cfg,
    std::mt19937_64& rng) {
  // group by state, first-seen order
  std::vector<std::string> order;
  std::map<std::string, std::vector<const VisitRecord*>> by_state;
  for (const VisitRecord& r : records) {
    auto [it, fresh] = by_state.try_emplace(r.state_smiles);
    if (fresh) order.push_back(r.state_smiles);
    it->second.push_back(&r);
  }
  std::vector<TrainingPair> pairs;
  for (const std::string& state : order) {
    const auto& actions = by_state[state];
    if (actions.size() < 2) continue;
    bool any_visit = false;
    for (const auto* a : actions) any_visit |= a->visit_count > 0;
    if (!any_visit) continue;  // pure-zero states carry no ranking signal

    auto target = [&](const VisitRecord* a, const VisitRecord* b) {
      return (std::log(a->visit_count + cfg.eps_smooth) -
              std::log(b->visit_count + cfg.eps_smooth)) /
             cfg.tau;
    };
    const std::size_t k = actions.size();
    const std::size_t all_pairs = k * (k - 1) / 2;
    if (all_pairs <= static_cast<std::size_t>(cfg.pairs_per_state)) {
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
          pairs.push_back({state, actions[i]->action_smiles,
                           actions[j]->action_smiles, target(actions[i], actions[j])});
        }
      }
    } else {
      std::set<std::pair<std::size_t, std::size_t>> chosen;
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      while (chosen.size() < static_cast<std::size_t>(cfg.pairs_per_state)) {
        std::size_t i = pick(rng), j = pick(rng);
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        if (!chosen.insert({i, j}).second) continue;
        pairs.push_back({state, actions[i]->action_smiles,
                         actions[j]->action_smiles, target(actions[i], actions[j])});
      }
    }
  }
  return pairs;
}

// --- loss & training -------------------------------------------------------

enum class LossMode { MSE, MAE };

struct FeaturizedPair {
  std::vector<float> x1;
  std::vector<float> x2;
  double target = 0.0;
};

struct PairLoss {
  double loss = 0.0;
  Gradients grads;
};

// loss on f(s,a1) - f(s,a2) vs target; exact backprop through both passes
inline PairLoss pairwise_loss(const PolicyNetwork& net, const FeaturizedPair& pair,
                              LossMode mode = LossMode::MSE) {
  ForwardTrace t1, t2;
  double f1 = detail::forward_impl(net, pair.x1, &t1, nullptr);
  double f2 = detail::forward_impl(net, pair.x2, &t2, nullptr);
  double diff = f1 - f2 - pair.target;
  PairLoss out;
  out.grads = Gradients::zeros_like(net);
  double dloss;
  if (mode == LossMode::MSE) {
    out.loss = diff * diff;
    dloss = 2.0 * diff;
  } else {
    out.loss = std::fabs(diff);
    dloss = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  }
  backward(net, t1, dloss, out.grads);
  backward(net, t2, -dloss, out.grads);
  return out;
}

struct TrainConfig {
  int epochs = 20;
  double lr = 0.001;
  LossMode loss = LossMode::MSE;
  bool use_dropout = true;
  std::uint64_t seed = 0;
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per epoch
};

inline TrainReport train(PolicyNetwork& net, const std::vector<FeaturizedPair>& pairs,
                         const TrainConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("train: no pairs");
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  Gradients m = Gradients::zeros_like(net);
  Gradients v = Gradients::zeros_like(net);
  long t = 0;
  TrainReport report;
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0u);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t pi : idx) {
      const FeaturizedPair& pair = pairs[pi];
      ForwardTrace t1, t2;
      std::mt19937_64* drng = cfg.use_dropout ? &dropout_rng : nullptr;
      double f1 = detail::forward_impl(net, pair.x1, &t1, drng);
      double f2 = detail::forward_impl(net, pair.x2, &t2, drng);
      double diff = f1 - f2 - pair.target;
      double loss, dloss;
      if (cfg.loss == LossMode::MSE) {
        loss = diff * diff;
        dloss = 2.0 * diff;
      } else {
        loss = std::fabs(diff);
        dloss = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      total += loss;
      Gradients grads = Gradients::zeros_like(net);
      backward(net, t1, dloss, grads);
      backward(net, t2, -dloss, grads);
      ++t;
      const double bc1 = 1.0 - std::pow(cfg.beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto step = [&](std::vector<double>& w, std::vector<double>& gm,
                        std::vector<double>& gv, const std::vector<double>& g) {
          for (std::size_t i = 0; i < w.size(); ++i) {
            gm[i] = cfg.beta1 * gm[i] + (1.0 - cfg.beta1) * g[i];
            gv[i] = cfg.beta2 * gv[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            w[i] -= cfg.lr * (gm[i] / bc1) / (std::sqrt(gv[i] / bc2) + cfg.adam_eps);
          }
        };
        step(net.layers[l].w, m.g[l].w, v.g[l].w, grads.g[l].w);
        step(net.layers[l].b, m.g[l].b, v.g[l].b, grads.g[l].b);
      }
    }
    report.epoch_loss.push_back(total / static_cast<double>(pairs.size()));
  }
  return report;
}

// --- weight I/O ------------------------------------------------------------

// header line "LFPOLICY 1 <nlayers> <in0> <out0> ... <dropout>" followed by
// little-endian float32 arrays (row-major weights, then biases) per layer
inline void save_weights(const PolicyNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weight file: " + path);
  out << "LFPOLICY 1 " << net.layers.size();
  for (const auto& l : net.layers) out << ' ' << l.in << ' ' << l.out;
  out << ' ' << net.dropout_rate << '\n';
  auto dump = [&](const std::vector<double>& v) {
    for (double d : v) {
      float f = static_cast<float>(d);
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  };
  for (const auto& l : net.layers) {
    dump(l.w);
    dump(l.b);
  }
  if (!out) throw std::runtime_error("short write to weight file: " + path);
}

inline PolicyNetwork load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty weight file: " + path);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  std::size_t nlayers = 0;
  if (!(hs >> magic >> version >> nlayers) || magic != "LFPOLICY" || version != 1) {
    throw std::runtime_error("bad weight file header: " + path);
  }
  PolicyNetwork net;
  for (std::size_t l = 0; l < nlayers; ++l) {
    PolicyNetwork::Layer layer;
    if (!(hs >> layer.in >> layer.out) || layer.in <= 0 || layer.out <= 0) {
      throw std::runtime_error("bad layer dimensions in weight file: " + path);
    }
    net.layers.push_back(std::move(layer));
  }
  if (!(hs >> net.dropout_rate)) {
    throw std::runtime_error("missing dropout rate in weight file: " + path);
  }
  if (net.layers.empty() || net.layers.front().in != kPolicyInputBits ||
      net.layers.back().out != 1) {
    throw std::runtime_error("weight file dimensions do not fit the policy: " + path);
  }
  auto slurp = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      in.read(reinterpret_cast<char*>(&f), sizeof(float));
      if (!in) throw std::runtime_error("truncated weight file: " + path);
      v[i] = f;
    }
  };
  for (auto& l : net.layers) {
    slurp(l.w, static_cast<std::size_t>(l.in) * l.out);
    slurp(l.b, l.out);
  }
  char extra;
  if (in.read(&extra, 1)) throw std::runtime_error("trailing bytes in weight file: " + path);
  return net;
}

}  // namespace lf
