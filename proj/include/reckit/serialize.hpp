#pragma once

#include <string>

#include <json.hpp>

#include "reckit/relation.hpp"

namespace reckit {

// {"n": ..., "pairs": [[u,v], ...]} with pairs in ascending order; round-trips
// bit-exactly through from_json_text.
inline std::string to_json_text(const Relation& f) {
  nlohmann::json j;
  j["n"] = f.size();
  j["pairs"] = nlohmann::json::array();
  for (auto& [u, v] : f.pairs()) j["pairs"].push_back({u, v});
  return j.dump();
}

inline Relation from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Relation r(j.at("n").get<int>());
  for (auto& p : j.at("pairs")) r.add(p.at(0).get<int>(), p.at(1).get<int>());
  return r;
}

}  // namespace reckit
