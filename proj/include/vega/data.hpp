#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vega {

enum class Modality : std::size_t { Text = 0, Audio = 1, Visual = 2 };

inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kAllModalities{Modality::Text, Modality::Audio,
                                                                     Modality::Visual};

char modality_tag(Modality m);
Modality modality_from_tag(char tag);
inline std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

enum class DataErrorKind {
  MissingFile,
  Schema,
  RowOutOfRange,
  LabelOutOfRange,
  SpeakerOutOfRange,
  DimMismatch,
  MissingModality,
  BadMagic,
  Truncated,
  NonFinite,
  ZeroVector,
  DuplicateClass,
  EmptyClass,
  EmptySplit,
  Io,
};

const char* to_string(DataErrorKind kind);

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  DataErrorKind kind() const { return kind_; }

 private:
  DataErrorKind kind_;
};

struct Utterance {
  std::string id;
  std::size_t speaker = 0;
  std::size_t label = 0;
  std::array<std::size_t, kNumModalities> rows{};

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  bool operator==(const Conversation&) const = default;
};

/// Row-major single-precision feature matrix for one modality.
struct FeatureTable {
  std::size_t num_rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(values).subspan(r * dim, dim);
  }
  bool operator==(const FeatureTable&) const = default;
};

struct AnchorClass {
  std::string name;
  std::vector<std::vector<float>> vectors;

  bool operator==(const AnchorClass&) const = default;
};

struct AnchorFile {
  std::size_t dim = 0;
  std::vector<AnchorClass> classes;

  bool operator==(const AnchorFile&) const = default;
};

/// A fully resolved dataset. Feature tables are shared (read-only) between a
/// dataset and any splits derived from it.
struct Dataset {
  std::vector<std::string> classes;
  std::size_t num_speakers = 0;
  std::array<std::shared_ptr<const FeatureTable>, kNumModalities> features;
  std::array<std::filesystem::path, kNumModalities> feature_paths;
  std::vector<Conversation> conversations;

  std::size_t num_utterances() const;
  std::size_t feature_dim(Modality m) const { return features[index_of(m)]->dim; }
};

bool same_content(const Dataset& a, const Dataset& b);

// Binary formats (little-endian):
//   feature file: "VFT1" u32 rows u32 dim, rows*dim binary32
//   anchor file:  "VEA1" u32 classes u32 dim, then per class
//                 u16 name_len, name bytes, u32 n_c, n_c*dim binary32
FeatureTable read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable decode_feature_table(std::span<const std::uint8_t> bytes, const std::string& origin);
std::vector<std::uint8_t> encode_feature_table(const FeatureTable& table);

AnchorFile read_anchor_file(const std::filesystem::path& path);
void write_anchor_file(const std::filesystem::path& path, const AnchorFile& anchors);
AnchorFile decode_anchor_file(std::span<const std::uint8_t> bytes, const std::string& origin);
std::vector<std::uint8_t> encode_anchor_file(const AnchorFile& anchors);

/// JSON manifest; feature paths resolve relative to the manifest's directory.
Dataset load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Dataset& dataset);
/// Checks labels, speakers, and row indices against the tables.
void validate_dataset(const Dataset& dataset);

struct SynthOptions {
  std::size_t num_classes = 6;
  std::size_t num_conversations = 60;
  std::size_t utterances_per_conversation = 20;
  std::array<std::size_t, kNumModalities> dims{64, 32, 48};
  std::size_t anchor_dim = 64;
  std::size_t anchors_per_class = 35;
  std::size_t num_speakers = 2;
  double separation = 8.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  Dataset dataset;
  AnchorFile anchors;
};

/// Class-conditional Gaussian features plus correlated anchors. A pure
/// function of its options.
SynthData synth_generate(const SynthOptions& options);

/// Writes features_{T,A,V}.vft, anchors.vea and manifest.json into `dir`.
void write_synth(const std::filesystem::path& dir, SynthData& data);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Conversation-level shuffle split; deterministic for a seed.
DatasetSplit split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace vega
