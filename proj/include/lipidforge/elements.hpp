#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lf {

// Supported element set: organic subset plus the halogens.
enum class Element : std::uint8_t {
  B, C, N, O, P, S, F, Cl, Br, I,
};

inline constexpr std::size_t kElementCount = 10;

struct ElementInfo {
  std::string_view symbol;
  double weight;        // IUPAC 2021 standard atomic weight, 2-decimal
  int default_valence;  // lowest standard valence
  int max_valence;      // highest standard valence (hypervalent P/S)
  bool organic_subset;  // writable without brackets
};

inline constexpr std::array<ElementInfo, kElementCount> kElements{{
    {"B", 10.81, 3, 3, true},
    {"C", 12.01, 4, 4, true},
    {"N", 14.01, 3, 3, true},
    {"O", 16.00, 2, 2, true},
    {"P", 30.97, 3, 5, true},
    {"S", 32.06, 2, 6, true},
    {"F", 19.00, 1, 1, true},
    {"Cl", 35.45, 1, 1, true},
    {"Br", 79.90, 1, 1, true},
    {"I", 126.90, 1, 1, true},
}};

inline constexpr double kHydrogenWeight = 1.008;

inline const ElementInfo& element_info(Element e) {
  return kElements[static_cast<std::size_t>(e)];
}

inline std::string_view element_symbol(Element e) { return element_info(e).symbol; }

inline std::optional<Element> element_from_symbol(std::string_view s) {
  for (std::size_t i = 0; i < kElementCount; ++i) {
    if (kElements[i].symbol == s) return static_cast<Element>(i);
  }
  return std::nullopt;
}

inline bool is_halogen(Element e) {
  return e == Element::F || e == Element::Cl || e == Element::Br || e == Element::I;
}

inline bool is_hydrophilic(Element e) {
  return e == Element::N || e == Element::O || e == Element::P || e == Element::S;
}

// Aromatic atoms admitted by the SMILES dialect (b, c, n, o, p, s).
inline bool aromatic_capable(Element e) {
  switch (e) {
    case Element::B:
    case Element::C:
    case Element::N:
    case Element::O:
    case Element::P:
    case Element::S:
      return true;
    default:
      return false;
  }
}

}  // namespace lf
