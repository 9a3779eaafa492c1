#ifndef BINSD_ACFG_HPP
#define BINSD_ACFG_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace binsd {

/// Per-basic-block numeric attributes. Length must equal the corpus d_feat.
using FeatureVector = std::vector<double>;

enum class Arch { X86, X64, ARM };
enum class OptLevel { O0, O1, O2, O3 };

const char* to_string(Arch a);
const char* to_string(OptLevel o);
std::optional<Arch> parse_arch(const std::string& s);
std::optional<OptLevel> parse_opt_level(const std::string& s);

/// How a concrete binary instance of a function was produced.
struct CompilationTag {
  Arch arch = Arch::X64;
  OptLevel opt_level = OptLevel::O0;
  std::string compiler = "gcc";

  bool operator==(const CompilationTag&) const = default;
};

struct BasicBlockNode {
  int node_id = 0;  // dense, 0-based within one function
  FeatureVector features;
};

/// A function's control-flow graph with per-block feature vectors.
///
/// source_id names the originating source function and is the ground
/// truth for similarity; function_name is the symbol, which variants may
/// change. Edges are directed (from_id, to_id) pairs; message passing
/// uses the undirected view (see neighbors()).
struct AttributedCfg {
  std::string function_name;
  std::string source_id;
  CompilationTag compilation;
  std::vector<BasicBlockNode> nodes;
  std::vector<std::pair<int, int>> edges;

  int node_count() const { return static_cast<int>(nodes.size()); }

  /// Undirected adjacency lists: union of in- and out-neighbors, each
  /// neighbor listed once, ascending. Requires a valid graph.
  std::vector<std::vector<int>> neighbors() const;
};

/// Validation never throws; every violated invariant is reported.
struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks all AttributedCfg invariants: nonempty node set, dense unique
/// ids, finite features of length d_feat, edge endpoints in range, no
/// self-loops, no duplicate edges. d_feat < 0 skips the length check.
ValidationResult validate_acfg(const AttributedCfg& g, int d_feat = -1);

/// |V_a - V_b| / max(V_a, V_b); symmetric, in [0, 1].
double vertex_count_relative_diff(const AttributedCfg& a, const AttributedCfg& b);

/// Raised by corpus/checkpoint/index readers on malformed input.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A parsed corpus file: the declared feature dimension plus all records.
struct Corpus {
  int d_feat = 0;
  std::string rng_algorithm;  // optional header field, empty if absent
  std::vector<AttributedCfg> functions;
};

inline constexpr int kCorpusFormatVersion = 1;

/// Reads a newline-delimited JSON corpus. Line 1 must be the header
/// {"format_version":1,"d_feat":N}. Every record is validated; errors
/// name the offending line. Throws DataError.
Corpus parse_acfg_stream(const std::string& path);
Corpus parse_acfg_stream(std::istream& in, const std::string& origin);

/// Writes the same format back. Round-trips losslessly.
void write_acfg_stream(const Corpus& corpus, const std::string& path);
void write_acfg_stream(const Corpus& corpus, std::ostream& out);

/// One record as a single-line JSON string (no trailing newline).
std::string acfg_to_json_line(const AttributedCfg& g);

}  // namespace binsd

#endif  // BINSD_ACFG_HPP
