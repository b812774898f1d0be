#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace evoforest {

// Sparse term-frequency vector, L2-normalized. Deterministic stand-in for a
// learned embedding; shared by the elite pool, tree diversity, and the
// summary store.
using FeatureVector = std::map<std::string, double>;

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline FeatureVector feature_vector(const std::string& text) {
  FeatureVector v;
  for (const auto& tok : tokenize(text)) v[tok] += 1.0;
  double norm2 = 0.0;
  for (const auto& [_, w] : v) norm2 += w * w;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& [_, w] : v) w *= inv;
  }
  return v;
}

inline double cosine(const FeatureVector& a, const FeatureVector& b) {
  // Vectors are already unit length; a zero vector yields 0.
  const FeatureVector& small = a.size() <= b.size() ? a : b;
  const FeatureVector& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [tok, w] : small) {
    auto it = large.find(tok);
    if (it != large.end()) dot += w * it->second;
  }
  return dot;
}

}  // namespace evoforest
