#ifndef BINSD_CORPUS_HPP
#define BINSD_CORPUS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "binsd/acfg.hpp"

namespace binsd {

enum class TransformKind { BlockSplit, BlockMerge, FeatureJitter, FeatureScale, EdgeRewire };

const char* to_string(TransformKind k);
std::optional<TransformKind> parse_transform_kind(const std::string& s);

struct VariantTransform {
  TransformKind kind = TransformKind::FeatureJitter;
  double intensity = 0.0;  // finite, >= 0
};

/// A named bundle of transform intensities. cross_arch widens the
/// variant tags to all three architectures; mono-arch profiles keep x64
/// and vary only optimization level and compiler.
struct TransformProfile {
  std::string name = "easy";
  bool cross_arch = false;
  std::vector<VariantTransform> transforms;
};

/// Built-in profiles: "easy" (mono-arch, mild drift), "hard" (cross-arch,
/// heavy structural and numeric drift), "structural" (splits/rewires only,
/// untouched blocks stay bit-identical), "none" (tag change only).
TransformProfile named_profile(const std::string& name);

struct CorpusSpec {
  int n_sources = 1;
  int variants_per_source = 1;
  int node_count_min = 1;
  int node_count_max = 1;
  int d_feat = 8;
  std::uint64_t seed = 1;
  double rename_fraction = 0.0;
  TransformProfile profile;
};

/// Validates counts, ranges and rename_fraction; throws DataError.
void check_spec(const CorpusSpec& spec);

CorpusSpec spec_from_json_file(const std::string& path);
CorpusSpec spec_from_json_string(const std::string& text);

/// Base function for one source index: a connected CFG (every node
/// reachable from node 0 in the undirected view), deterministic in
/// (spec.seed, index). source_id = "src:<index>", tag (x64, O0, gcc).
AttributedCfg generate_source_function(const CorpusSpec& spec, int index);

/// Applies the transform list to a copy of g under the given tag.
/// Structure edits never drop below one node; source_id is preserved;
/// deterministic in seed.
AttributedCfg apply_variant(const AttributedCfg& g, const CompilationTag& tag,
                            const std::vector<VariantTransform>& transforms, std::uint64_t seed);

/// Deterministic per-component scale factor FeatureScale applies for a
/// tag at the given intensity. x64/O0 is the reference (factor 1 for
/// every component); other tags bend the feature direction.
double feature_scale_factor(const CompilationTag& tag, double intensity, int component);

/// n_sources x variants_per_source functions, ordered by (source index,
/// variant index). Variant 0 is the base; a rename_fraction share of the
/// other variants get a fresh function_name with the same source_id.
Corpus generate_corpus(const CorpusSpec& spec);

struct DatasetSplit {
  std::vector<AttributedCfg> train;
  std::vector<AttributedCfg> validation;
  std::vector<AttributedCfg> test;
};

/// Splits BY source_id so held-out sources are fully unseen. Train gets
/// floor(train_frac * n_sources) sources (at least 1, leaving at least 2),
/// the remainder goes to validation first, then test. Requires >= 3
/// distinct sources. Deterministic in seed.
DatasetSplit split_dataset(const std::vector<AttributedCfg>& corpus, double train_frac,
                           std::uint64_t seed);

}  // namespace binsd

#endif  // BINSD_CORPUS_HPP
