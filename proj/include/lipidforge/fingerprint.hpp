#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lipidforge/molecule.hpp"

namespace lf {

// Fixed-length binary fingerprint (Morgan/ECFP style).
struct Fingerprint {
  std::vector<std::uint64_t> words;
  int nbits = 0;
  int radius = 0;

  bool test(int bit) const {
    return (words[static_cast<std::size_t>(bit) >> 6] >> (bit & 63)) & 1u;
  }
  void set(int bit) {
    words[static_cast<std::size_t>(bit) >> 6] |= std::uint64_t{1} << (bit & 63);
  }
  int popcount() const {
    int c = 0;
    for (std::uint64_t w : words) c += std::popcount(w);
    return c;
  }
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

}  // namespace detail

// ECFP-style circular fingerprint: per-atom invariants hashed and iteratively
// combined with sorted neighbor identifiers for `radius` rounds; every
// intermediate identifier is folded into the bit vector modulo nbits.
inline Fingerprint morgan_fingerprint(const Molecule& m, int radius = 2,
                                      int nbits = 1024) {
  if (radius < 0) throw std::invalid_argument("morgan_fingerprint: radius < 0");
  if (nbits < 64 || (nbits & (nbits - 1)) != 0) {
    throw std::invalid_argument("morgan_fingerprint: nbits must be a power of two >= 64");
  }
  Fingerprint fp;
  fp.nbits = nbits;
  fp.radius = radius;
  fp.words.assign(static_cast<std::size_t>(nbits) / 64, 0);

  const int n = static_cast<int>(m.num_atoms());
  std::vector<std::uint64_t> id(n);
  for (int i = 0; i < n; ++i) {
    const Atom& a = m.atoms[i];
    std::uint64_t h = detail::mix64(static_cast<std::uint64_t>(a.element) + 1);
    h = detail::hash_combine(h, static_cast<std::uint64_t>(m.degree(i)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 8));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(a.implicit_h));
    h = detail::hash_combine(h, a.aromatic ? 2 : 1);
    h = detail::hash_combine(h, a.in_ring ? 2 : 1);
    id[i] = h;
    fp.set(static_cast<int>(h & static_cast<std::uint64_t>(nbits - 1)));
  }
  for (int round = 0; round < radius; ++round) {
    std::vector<std::uint64_t> next(n);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
      for (int bi : m.incident_bonds(i)) {
        const Bond& b = m.bonds[bi];
        env.push_back({static_cast<std::uint64_t>(b.order), id[b.other(i)]});
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = detail::hash_combine(detail::mix64(round + 1), id[i]);
      for (const auto& [order, nid] : env) {
        h = detail::hash_combine(h, order);
        h = detail::hash_combine(h, nid);
      }
      next[i] = h;
      fp.set(static_cast<int>(h & static_cast<std::uint64_t>(nbits - 1)));
    }
    id = std::move(next);
  }
  return fp;
}

inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits != b.nbits) {
    throw std::invalid_argument("tanimoto: fingerprint length mismatch");
  }
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) {
    inter += std::popcount(a.words[i] & b.words[i]);
    uni += std::popcount(a.words[i] | b.words[i]);
  }
  if (uni == 0) {
    throw std::invalid_argument("tanimoto: both fingerprints empty");
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace lf
