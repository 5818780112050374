#include "vega/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "json.hpp"
#include "vega/rng.hpp"

namespace vega {

namespace fs = std::filesystem;
using json = nlohmann::json;

char modality_tag(Modality m) {
  switch (m) {
    case Modality::Text: return 'T';
    case Modality::Audio: return 'A';
    case Modality::Visual: return 'V';
  }
  return '?';
}

Modality modality_from_tag(char tag) {
  switch (tag) {
    case 'T': return Modality::Text;
    case 'A': return Modality::Audio;
    case 'V': return Modality::Visual;
    default: throw DataError(DataErrorKind::Schema, std::string("unknown modality tag '") + tag + "'");
  }
}

const char* to_string(DataErrorKind kind) {
  switch (kind) {
    case DataErrorKind::MissingFile: return "missing-file";
    case DataErrorKind::Schema: return "schema";
    case DataErrorKind::RowOutOfRange: return "row-out-of-range";
    case DataErrorKind::LabelOutOfRange: return "label-out-of-range";
    case DataErrorKind::SpeakerOutOfRange: return "speaker-out-of-range";
    case DataErrorKind::DimMismatch: return "dim-mismatch";
    case DataErrorKind::MissingModality: return "missing-modality";
    case DataErrorKind::BadMagic: return "bad-magic";
    case DataErrorKind::Truncated: return "truncated";
    case DataErrorKind::NonFinite: return "non-finite";
    case DataErrorKind::ZeroVector: return "zero-vector";
    case DataErrorKind::DuplicateClass: return "duplicate-class";
    case DataErrorKind::EmptyClass: return "empty-class";
    case DataErrorKind::EmptySplit: return "empty-split";
    case DataErrorKind::Io: return "io";
  }
  return "unknown";
}

std::size_t Dataset::num_utterances() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.utterances.size();
  return n;
}

bool same_content(const Dataset& a, const Dataset& b) {
  if (a.classes != b.classes || a.num_speakers != b.num_speakers ||
      a.conversations != b.conversations) {
    return false;
  }
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (!a.features[m] || !b.features[m]) return false;
    if (!(*a.features[m] == *b.features[m])) return false;
  }
  return true;
}

namespace {

using namespace detail;

void check_finite(std::span<const float> values, const std::string& origin) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError(DataErrorKind::NonFinite,
                      origin + ": non-finite value at element " + std::to_string(i));
    }
  }
}

constexpr std::size_t kHeaderBytes = 12;

}  // namespace

// ---------------------------------------------------------------------------
// Feature files

std::vector<std::uint8_t> encode_feature_table(const FeatureTable& table) {
  if (table.values.size() != table.num_rows * table.dim) {
    throw DataError(DataErrorKind::DimMismatch, "feature table holds " +
                                                    std::to_string(table.values.size()) +
                                                    " values, header says " +
                                                    std::to_string(table.num_rows * table.dim));
  }
  ByteWriter w;
  w.raw("VFT1");
  w.u32(static_cast<std::uint32_t>(table.num_rows));
  w.u32(static_cast<std::uint32_t>(table.dim));
  for (float v : table.values) w.f32(v);
  return w.take();
}

FeatureTable decode_feature_table(std::span<const std::uint8_t> bytes, const std::string& origin) {
  ByteReader r(bytes, origin);
  if (bytes.size() < 4 || r.raw(4, "magic") != "VFT1") {
    throw DataError(DataErrorKind::BadMagic, origin + ": not a VFT1 feature file");
  }
  FeatureTable t;
  t.num_rows = r.u32("row count");
  t.dim = r.u32("dimension");
  if (t.dim == 0) throw DataError(DataErrorKind::DimMismatch, origin + ": feature dimension is zero");
  const std::size_t expected = kHeaderBytes + 4 * t.num_rows * t.dim;
  if (bytes.size() != expected) {
    throw DataError(DataErrorKind::Truncated,
                    origin + ": file has " + std::to_string(bytes.size()) + " bytes, header implies " +
                        std::to_string(expected));
  }
  t.values.resize(t.num_rows * t.dim);
  for (auto& v : t.values) v = r.f32("values");
  check_finite(t.values, origin);
  return t;
}

FeatureTable read_feature_file(const fs::path& path) {
  const auto bytes = slurp(path);
  return decode_feature_table(bytes, path.string());
}

void write_feature_file(const fs::path& path, const FeatureTable& table) {
  check_finite(table.values, path.string());
  spill(path, encode_feature_table(table));
}

// ---------------------------------------------------------------------------
// Anchor files

std::vector<std::uint8_t> encode_anchor_file(const AnchorFile& anchors) {
  ByteWriter w;
  w.raw("VEA1");
  w.u32(static_cast<std::uint32_t>(anchors.classes.size()));
  w.u32(static_cast<std::uint32_t>(anchors.dim));
  for (const auto& cls : anchors.classes) {
    if (cls.name.size() > 0xffff) {
      throw DataError(DataErrorKind::Schema, "class name longer than 65535 bytes");
    }
    w.u16(static_cast<std::uint16_t>(cls.name.size()));
    w.raw(cls.name);
    w.u32(static_cast<std::uint32_t>(cls.vectors.size()));
    for (const auto& v : cls.vectors) {
      if (v.size() != anchors.dim) {
        throw DataError(DataErrorKind::DimMismatch, "anchor vector of class '" + cls.name +
                                                        "' has dimension " + std::to_string(v.size()) +
                                                        ", expected " + std::to_string(anchors.dim));
      }
      for (float x : v) w.f32(x);
    }
  }
  return w.take();
}

AnchorFile decode_anchor_file(std::span<const std::uint8_t> bytes, const std::string& origin) {
  ByteReader r(bytes, origin);
  if (bytes.size() < 4 || r.raw(4, "magic") != "VEA1") {
    throw DataError(DataErrorKind::BadMagic, origin + ": not a VEA1 anchor file");
  }
  AnchorFile a;
  const std::uint32_t num_classes = r.u32("class count");
  a.dim = r.u32("anchor dimension");
  if (a.dim == 0) throw DataError(DataErrorKind::DimMismatch, origin + ": anchor dimension is zero");
  std::set<std::string> seen;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    AnchorClass cls;
    const std::uint16_t len = r.u16("class name length");
    cls.name = r.raw(len, "class name");
    if (!seen.insert(cls.name).second) {
      throw DataError(DataErrorKind::DuplicateClass, origin + ": duplicate class '" + cls.name + "'");
    }
    const std::uint32_t n = r.u32("vector count");
    if (n == 0) throw DataError(DataErrorKind::EmptyClass, origin + ": class '" + cls.name + "' has no vectors");
    r.need(static_cast<std::size_t>(n) * a.dim * 4, "anchor vectors");
    cls.vectors.resize(n);
    for (auto& v : cls.vectors) {
      v.resize(a.dim);
      for (auto& x : v) x = r.f32("anchor vectors");
      check_finite(v, origin + " class '" + cls.name + "'");
      if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) {
        throw DataError(DataErrorKind::ZeroVector,
                        origin + ": all-zero anchor vector in class '" + cls.name + "'");
      }
    }
    a.classes.push_back(std::move(cls));
  }
  if (r.remaining() != 0) {
    throw DataError(DataErrorKind::Truncated, origin + ": " + std::to_string(r.remaining()) +
                                                  " trailing bytes after last class");
  }
  return a;
}

AnchorFile read_anchor_file(const fs::path& path) {
  const auto bytes = slurp(path);
  return decode_anchor_file(bytes, path.string());
}

void write_anchor_file(const fs::path& path, const AnchorFile& anchors) {
  std::set<std::string> seen;
  for (const auto& c : anchors.classes) {
    if (!seen.insert(c.name).second) {
      throw DataError(DataErrorKind::DuplicateClass, "duplicate class '" + c.name + "'");
    }
    if (c.vectors.empty()) {
      throw DataError(DataErrorKind::EmptyClass, "class '" + c.name + "' has no vectors");
    }
  }
  spill(path, encode_anchor_file(anchors));
}

// ---------------------------------------------------------------------------
// Manifest

void validate_dataset(const Dataset& ds) {
  for (auto m : kAllModalities) {
    if (!ds.features[index_of(m)]) {
      throw DataError(DataErrorKind::MissingModality,
                      std::string("no feature table for modality ") + modality_tag(m));
    }
  }
  for (const auto& conv : ds.conversations) {
    if (conv.utterances.empty()) {
      throw DataError(DataErrorKind::Schema, "conversation '" + conv.id + "' has no utterances");
    }
    for (const auto& u : conv.utterances) {
      if (u.label >= ds.classes.size()) {
        throw DataError(DataErrorKind::LabelOutOfRange,
                        "utterance '" + u.id + "' in conversation '" + conv.id + "': label " +
                            std::to_string(u.label) + " outside [0, " +
                            std::to_string(ds.classes.size()) + ")");
      }
      if (u.speaker >= ds.num_speakers) {
        throw DataError(DataErrorKind::SpeakerOutOfRange,
                        "utterance '" + u.id + "' in conversation '" + conv.id + "': speaker " +
                            std::to_string(u.speaker) + " outside [0, " +
                            std::to_string(ds.num_speakers) + ")");
      }
      for (auto m : kAllModalities) {
        const auto& table = *ds.features[index_of(m)];
        if (u.rows[index_of(m)] >= table.num_rows) {
          throw DataError(DataErrorKind::RowOutOfRange,
                          "utterance '" + u.id + "' in conversation '" + conv.id + "': row " +
                              std::to_string(u.rows[index_of(m)]) + " of modality " +
                              modality_tag(m) + " outside a " + std::to_string(table.num_rows) +
                              "-row feature file");
        }
      }
    }
  }
}

namespace {

template <typename V>
V field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw DataError(DataErrorKind::Schema, where + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::Schema, where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::MissingFile, "manifest not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(DataErrorKind::Schema, path.string() + ": invalid JSON (" + e.what() + ")");
  }
  const std::string where = path.string();
  Dataset ds;
  ds.classes = field<std::vector<std::string>>(doc, "classes", where);
  if (ds.classes.empty()) throw DataError(DataErrorKind::Schema, where + ": empty class list");
  ds.num_speakers = field<std::size_t>(doc, "num_speakers", where);

  const json files = field<json>(doc, "feature_files", where);
  const fs::path base = path.parent_path();
  for (auto m : kAllModalities) {
    const std::string tag(1, modality_tag(m));
    if (!files.is_object() || !files.contains(tag)) {
      throw DataError(DataErrorKind::MissingModality, where + ": no feature file for modality " + tag);
    }
    fs::path p = files.at(tag).get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) {
      throw DataError(DataErrorKind::MissingFile, where + ": feature file for modality " + tag +
                                                      " not found: " + p.string());
    }
    ds.feature_paths[index_of(m)] = p;
    ds.features[index_of(m)] = std::make_shared<const FeatureTable>(read_feature_file(p));
  }
  if (doc.contains("dims")) {
    const json& dims = doc.at("dims");
    for (auto m : kAllModalities) {
      const std::string tag(1, modality_tag(m));
      if (!dims.contains(tag)) continue;
      const auto declared = dims.at(tag).get<std::size_t>();
      if (declared != ds.feature_dim(m)) {
        throw DataError(DataErrorKind::DimMismatch,
                        where + ": modality " + tag + " declared dim " + std::to_string(declared) +
                            " but its feature file has dim " + std::to_string(ds.feature_dim(m)));
      }
    }
  }

  for (const auto& jc : field<json>(doc, "conversations", where)) {
    Conversation conv;
    conv.id = field<std::string>(jc, "id", where);
    const std::string cwhere = where + " conversation '" + conv.id + "'";
    for (const auto& ju : field<json>(jc, "utterances", cwhere)) {
      Utterance u;
      u.id = field<std::string>(ju, "id", cwhere);
      const std::string uwhere = cwhere + " utterance '" + u.id + "'";
      u.speaker = field<std::size_t>(ju, "speaker", uwhere);
      u.label = field<std::size_t>(ju, "label", uwhere);
      const json rows = field<json>(ju, "rows", uwhere);
      for (auto m : kAllModalities) {
        const std::string tag(1, modality_tag(m));
        if (!rows.is_object() || !rows.contains(tag)) {
          throw DataError(DataErrorKind::MissingModality, uwhere + ": no row for modality " + tag);
        }
        u.rows[index_of(m)] = rows.at(tag).get<std::size_t>();
      }
      conv.utterances.push_back(std::move(u));
    }
    ds.conversations.push_back(std::move(conv));
  }
  validate_dataset(ds);
  return ds;
}

void write_manifest(const fs::path& path, const Dataset& ds) {
  json doc;
  doc["classes"] = ds.classes;
  doc["num_speakers"] = ds.num_speakers;
  json files = json::object();
  json dims = json::object();
  const fs::path base = fs::absolute(path).parent_path();
  for (auto m : kAllModalities) {
    const std::string tag(1, modality_tag(m));
    const auto& p = ds.feature_paths[index_of(m)];
    if (p.empty()) throw DataError(DataErrorKind::Io, "dataset has no file path for modality " + tag);
    std::error_code ec;
    auto rel = fs::relative(fs::absolute(p), base, ec);
    files[tag] = (ec || rel.empty()) ? fs::absolute(p).string() : rel.generic_string();
    dims[tag] = ds.feature_dim(m);
  }
  doc["feature_files"] = files;
  doc["dims"] = dims;
  json convs = json::array();
  for (const auto& c : ds.conversations) {
    json jc;
    jc["id"] = c.id;
    json utts = json::array();
    for (const auto& u : c.utterances) {
      json ju;
      ju["id"] = u.id;
      ju["speaker"] = u.speaker;
      ju["label"] = u.label;
      ju["rows"] = {{"T", u.rows[0]}, {"A", u.rows[1]}, {"V", u.rows[2]}};
      utts.push_back(std::move(ju));
    }
    jc["utterances"] = std::move(utts);
    convs.push_back(std::move(jc));
  }
  doc["conversations"] = std::move(convs);
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::Io, "cannot write manifest " + path.string());
  out << doc.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

// `count` random unit vectors in R^dim; orthonormalized when count <= dim.
std::vector<std::vector<double>> random_directions(std::size_t count, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> dirs;
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
      for (auto& x : v) x = normal(rng);
      if (count <= dim) {
        for (const auto& u : dirs) {
          const double d = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
          for (std::size_t i = 0; i < dim; ++i) v[i] -= d * u[i];
        }
      }
      norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (norm > 1e-6) break;
    }
    for (auto& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace

SynthData synth_generate(const SynthOptions& o) {
  if (!(o.separation >= 0.0) || !std::isfinite(o.separation)) {
    throw std::invalid_argument("synth: separation must be a finite value >= 0");
  }
  if (o.num_classes == 0 || o.num_conversations == 0 || o.utterances_per_conversation == 0 ||
      o.anchor_dim == 0 || o.anchors_per_class == 0 || o.num_speakers == 0) {
    throw std::invalid_argument("synth: all counts must be >= 1");
  }
  for (auto d : o.dims) {
    if (d == 0) throw std::invalid_argument("synth: feature dimensions must be >= 1");
  }
  Rng rng = make_rng(o.seed, Stream::Synth);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::array<std::vector<std::vector<double>>, kNumModalities> dirs;
  for (std::size_t m = 0; m < kNumModalities; ++m) dirs[m] = random_directions(o.num_classes, o.dims[m], rng);
  const auto anchor_dirs = random_directions(o.num_classes, o.anchor_dim, rng);

  const std::size_t total = o.num_conversations * o.utterances_per_conversation;
  std::vector<std::size_t> labels(total);
  for (std::size_t i = 0; i < total; ++i) labels[i] = i % o.num_classes;
  for (std::size_t i = total; i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(rng, i)]);

  SynthData out;
  Dataset& ds = out.dataset;
  ds.num_speakers = o.num_speakers;
  for (std::size_t c = 0; c < o.num_classes; ++c) ds.classes.push_back("class" + std::to_string(c));

  std::array<FeatureTable, kNumModalities> tables;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    tables[m].num_rows = total;
    tables[m].dim = o.dims[m];
    tables[m].values.resize(total * o.dims[m]);
  }
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < o.num_conversations; ++ci) {
    Conversation conv;
    conv.id = "conv" + std::to_string(ci);
    for (std::size_t t = 0; t < o.utterances_per_conversation; ++t, ++row) {
      Utterance u;
      u.id = conv.id + "_u" + std::to_string(t);
      u.speaker = t % o.num_speakers;
      u.label = labels[row];
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        u.rows[m] = row;
        float* dst = tables[m].values.data() + row * o.dims[m];
        for (std::size_t d = 0; d < o.dims[m]; ++d) {
          dst[d] = static_cast<float>(o.separation * dirs[m][u.label][d] + noise(rng));
        }
      }
      conv.utterances.push_back(std::move(u));
    }
    ds.conversations.push_back(std::move(conv));
  }
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    ds.features[m] = std::make_shared<const FeatureTable>(std::move(tables[m]));
  }

  out.anchors.dim = o.anchor_dim;
  for (std::size_t c = 0; c < o.num_classes; ++c) {
    AnchorClass cls;
    cls.name = ds.classes[c];
    for (std::size_t i = 0; i < o.anchors_per_class; ++i) {
      std::vector<float> v(o.anchor_dim);
      for (std::size_t d = 0; d < o.anchor_dim; ++d) {
        v[d] = static_cast<float>(o.separation * anchor_dirs[c][d] + noise(rng));
      }
      cls.vectors.push_back(std::move(v));
    }
    out.anchors.classes.push_back(std::move(cls));
  }
  return out;
}

void write_synth(const fs::path& dir, SynthData& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  for (auto m : kAllModalities) {
    const auto p = dir / (std::string("features_") + modality_tag(m) + ".vft");
    write_feature_file(p, *data.dataset.features[index_of(m)]);
    data.dataset.feature_paths[index_of(m)] = p;
  }
  write_anchor_file(dir / "anchors.vea", data.anchors);
  write_manifest(dir / "manifest.json", data.dataset);
}

// ---------------------------------------------------------------------------
// Splitting

DatasetSplit split(const Dataset& ds, const SplitRatios& r, std::uint64_t seed) {
  if (!(r.train > 0 && r.val > 0 && r.test > 0)) {
    throw std::invalid_argument("split ratios must all be positive");
  }
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  const std::size_t n = ds.conversations.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, Stream::Split);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  const auto n_train = static_cast<std::size_t>(std::llround(r.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(r.val * static_cast<double>(n)));
  const std::array<std::pair<const char*, std::size_t>, 3> sizes{
      {{"train", n_train}, {"val", n_val}, {"test", n - std::min(n, n_train + n_val)}}};
  for (const auto& [name, size] : sizes) {
    if (size == 0 || n_train + n_val >= n) {
      throw DataError(DataErrorKind::EmptySplit,
                      std::string("split '") + name + "' would be empty with " + std::to_string(n) +
                          " conversations");
    }
  }

  DatasetSplit out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->classes = ds.classes;
    part->num_speakers = ds.num_speakers;
    part->features = ds.features;
    part->feature_paths = ds.feature_paths;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dst.conversations.push_back(ds.conversations[order[i]]);
  }
  return out;
}

}  // namespace vega
