#include "binsd/acfg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace binsd {

using nlohmann::json;

const char* to_string(Arch a) {
  switch (a) {
    case Arch::X86: return "x86";
    case Arch::X64: return "x64";
    case Arch::ARM: return "arm";
  }
  return "?";
}

const char* to_string(OptLevel o) {
  switch (o) {
    case OptLevel::O0: return "O0";
    case OptLevel::O1: return "O1";
    case OptLevel::O2: return "O2";
    case OptLevel::O3: return "O3";
  }
  return "?";
}

std::optional<Arch> parse_arch(const std::string& s) {
  if (s == "x86") return Arch::X86;
  if (s == "x64") return Arch::X64;
  if (s == "arm") return Arch::ARM;
  return std::nullopt;
}

std::optional<OptLevel> parse_opt_level(const std::string& s) {
  if (s == "O0") return OptLevel::O0;
  if (s == "O1") return OptLevel::O1;
  if (s == "O2") return OptLevel::O2;
  if (s == "O3") return OptLevel::O3;
  return std::nullopt;
}

std::vector<std::vector<int>> AttributedCfg::neighbors() const {
  std::vector<std::set<int>> adj(nodes.size());
  for (const auto& [from, to] : edges) {
    adj[static_cast<std::size_t>(from)].insert(to);
    adj[static_cast<std::size_t>(to)].insert(from);
  }
  std::vector<std::vector<int>> out(nodes.size());
  for (std::size_t i = 0; i < adj.size(); ++i)
    out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

ValidationResult validate_acfg(const AttributedCfg& g, int d_feat) {
  ValidationResult r;
  const int v = g.node_count();
  if (v < 1) r.violations.push_back("node count must be >= 1");

  std::set<int> ids;
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.node_id).second)
      r.violations.push_back("duplicate node_id " + std::to_string(n.node_id));
  }
  // Ids must be dense 0..V-1 so edges can index directly.
  for (int i = 0; i < v; ++i) {
    if (!ids.count(i)) {
      r.violations.push_back("node ids are not dense 0.." + std::to_string(v - 1));
      break;
    }
  }

  for (const auto& n : g.nodes) {
    for (double x : n.features) {
      if (!std::isfinite(x)) {
        r.violations.push_back("non-finite feature in node " + std::to_string(n.node_id));
        break;
      }
    }
    if (d_feat >= 0 && static_cast<int>(n.features.size()) != d_feat) {
      r.violations.push_back("node " + std::to_string(n.node_id) + " has " +
                             std::to_string(n.features.size()) + " features, corpus declares " +
                             std::to_string(d_feat));
    }
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.edges) {
    if (e.first < 0 || e.first >= v || e.second < 0 || e.second >= v) {
      r.violations.push_back("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                             ") references a missing node");
      continue;
    }
    if (e.first == e.second)
      r.violations.push_back("self-loop on node " + std::to_string(e.first));
    if (!seen.insert(e).second)
      r.violations.push_back("duplicate edge (" + std::to_string(e.first) + "," +
                             std::to_string(e.second) + ")");
  }
  return r;
}

double vertex_count_relative_diff(const AttributedCfg& a, const AttributedCfg& b) {
  const double va = a.node_count();
  const double vb = b.node_count();
  return std::abs(va - vb) / std::max(va, vb);
}

namespace {

AttributedCfg record_from_json(const json& j) {
  AttributedCfg g;
  g.function_name = j.at("function_name").get<std::string>();
  g.source_id = j.at("source_id").get<std::string>();
  const auto arch = parse_arch(j.at("arch").get<std::string>());
  if (!arch) throw DataError("unknown arch \"" + j.at("arch").get<std::string>() + "\"");
  const auto opt = parse_opt_level(j.at("opt_level").get<std::string>());
  if (!opt) throw DataError("unknown opt_level \"" + j.at("opt_level").get<std::string>() + "\"");
  g.compilation = {*arch, *opt, j.at("compiler").get<std::string>()};
  for (const auto& jn : j.at("nodes")) {
    BasicBlockNode n;
    n.node_id = jn.at("id").get<int>();
    n.features = jn.at("features").get<std::vector<double>>();
    g.nodes.push_back(std::move(n));
  }
  for (const auto& je : j.at("edges")) {
    if (!je.is_array() || je.size() != 2) throw DataError("edge is not a [from,to] pair");
    g.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
  }
  return g;
}

json record_to_json(const AttributedCfg& g) {
  json j;
  j["function_name"] = g.function_name;
  j["source_id"] = g.source_id;
  j["arch"] = to_string(g.compilation.arch);
  j["opt_level"] = to_string(g.compilation.opt_level);
  j["compiler"] = g.compilation.compiler;
  json nodes = json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"id", n.node_id}, {"features", n.features}});
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back({e.first, e.second});
  j["edges"] = std::move(edges);
  return j;
}

}  // namespace

Corpus parse_acfg_stream(std::istream& in, const std::string& origin) {
  Corpus corpus;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    try {
      if (!have_header) {
        const int version = j.at("format_version").get<int>();
        if (version != kCorpusFormatVersion)
          throw DataError("unsupported format_version " + std::to_string(version));
        corpus.d_feat = j.at("d_feat").get<int>();
        if (corpus.d_feat < 0) throw DataError("d_feat must be >= 0");
        if (j.contains("rng")) corpus.rng_algorithm = j["rng"].get<std::string>();
        have_header = true;
        continue;
      }
      AttributedCfg g = record_from_json(j);
      ValidationResult v = validate_acfg(g, corpus.d_feat);
      if (!v.ok()) throw DataError("invalid record: " + v.violations.front());
      corpus.functions.push_back(std::move(g));
    } catch (const json::exception& e) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": bad record: " + e.what());
    } catch (const DataError& e) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header && lineno > 0)
    throw DataError(origin + ": missing corpus header line");
  return corpus;
}

Corpus parse_acfg_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_acfg_stream(in, path);
}

std::string acfg_to_json_line(const AttributedCfg& g) { return record_to_json(g).dump(); }

void write_acfg_stream(const Corpus& corpus, std::ostream& out) {
  json header;
  header["format_version"] = kCorpusFormatVersion;
  header["d_feat"] = corpus.d_feat;
  if (!corpus.rng_algorithm.empty()) header["rng"] = corpus.rng_algorithm;
  out << header.dump() << '\n';
  for (const auto& g : corpus.functions) out << acfg_to_json_line(g) << '\n';
}

void write_acfg_stream(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
  if (!out) throw DataError("cannot write " + path);
  write_acfg_stream(corpus, out);
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace binsd
