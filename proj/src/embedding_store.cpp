#include "tane/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "tane/detail/binary_io.hpp"
#include "tane/error.hpp"
#include "tane/numeric.hpp"
#include "tane/rng.hpp"

namespace tane {

namespace {

constexpr char kEmbeddingMagic[5] = "EMB1";
constexpr std::uint32_t kEmbeddingVersion = 1;

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

EmbeddingSet::EmbeddingSet(Mat records, std::vector<ClassId> labels,
                           std::vector<std::string> class_names)
    : records_(std::move(records)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      by_class_(class_names_.size()) {
  if (labels_.size() != records_.rows()) {
    throw ShapeError("label count " + std::to_string(labels_.size()) + " != record count " +
                     std::to_string(records_.rows()));
  }
  if (!records_.empty() && records_.cols() == 0) throw ShapeError("zero-dimensional records");
  if (!records_.all_finite()) throw InvalidInput("non-finite embedding value");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= class_names_.size()) {
      throw InvalidLabel("class id " + std::to_string(labels_[i]) + " >= class count " +
                         std::to_string(class_names_.size()));
    }
    by_class_[labels_[i]].push_back(i);
  }
}

const std::vector<std::size_t>& EmbeddingSet::records_of(ClassId cls) const {
  if (cls >= by_class_.size()) throw MissingClass("class " + std::to_string(cls));
  return by_class_[cls];
}

MemoryBank::MemoryBank(Mat prototypes, std::vector<ClassId> class_ids)
    : prototypes_(std::move(prototypes)), class_ids_(std::move(class_ids)) {
  if (class_ids_.empty()) throw EmptyMemory("memory bank with no rows");
  if (prototypes_.rows() != class_ids_.size()) throw ShapeError("bank rows != class id count");
  std::set<ClassId> seen;
  for (std::size_t i = 0; i < class_ids_.size(); ++i) {
    if (!seen.insert(class_ids_[i]).second) {
      throw InvalidInput("duplicate class " + std::to_string(class_ids_[i]) + " in memory bank");
    }
    if (!(norm(prototypes_.row(i)) > 0.0)) {
      throw DegenerateVector("zero prototype for class " + std::to_string(class_ids_[i]));
    }
  }
}

std::size_t MemoryBank::row_of(ClassId cls) const {
  auto it = std::find(class_ids_.begin(), class_ids_.end(), cls);
  if (it == class_ids_.end()) throw MissingClass("class " + std::to_string(cls) + " not in memory");
  return static_cast<std::size_t>(it - class_ids_.begin());
}

Mat MemoryBank::rows_for(std::span<const ClassId> classes) const {
  std::vector<std::size_t> idx;
  idx.reserve(classes.size());
  for (ClassId c : classes) idx.push_back(row_of(c));
  return gather_rows(prototypes_, idx);
}

void SplitSpec::validate() const {
  if (base_classes.empty()) throw InvalidSplit("no base classes");
  if (novel_pool.empty()) throw InvalidSplit("empty novel pool");
  if (neg_pool.empty()) throw InvalidSplit("empty negative pool");
  std::set<ClassId> seen;
  for (const auto* group : {&base_classes, &novel_pool, &neg_pool}) {
    for (ClassId c : *group) {
      if (!seen.insert(c).second) {
        throw InvalidSplit("class " + std::to_string(c) + " appears in more than one role");
      }
    }
  }
}

EmbeddingSet generate_synthetic(const SyntheticConfig& config) {
  if (config.num_classes < 2) throw InvalidConfig("need at least 2 classes");
  if (config.per_class < 1) throw InvalidConfig("need at least 1 record per class");
  if (config.dim < 2) throw InvalidConfig("dim must be at least 2");
  if (!(config.separation >= 0.0)) throw InvalidConfig("separation must be non-negative");
  if (!(config.noise_sigma >= 0.0)) throw InvalidConfig("noise_sigma must be non-negative");

  Rng rng(derive_seed(config.seed, "synthetic"));
  const std::size_t d = config.dim;
  Mat means(config.num_classes, d);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    auto row = means.row(c);
    double n = 0.0;
    while (!(n > 0.0)) {
      for (double& x : row) x = rng.normal();
      n = norm(row);
    }
    for (double& x : row) x *= config.separation / n;
  }

  const std::size_t total = config.num_classes * config.per_class;
  Mat records(total, d);
  std::vector<ClassId> labels(total);
  std::vector<std::string> names(config.num_classes);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    names[c] = "class_" + std::to_string(c);
    for (std::size_t i = 0; i < config.per_class; ++i) {
      const std::size_t r = c * config.per_class + i;
      labels[r] = static_cast<ClassId>(c);
      for (std::size_t j = 0; j < d; ++j) {
        records(r, j) = round_to_float(means(c, j) + config.noise_sigma * rng.normal());
      }
    }
  }
  return EmbeddingSet(std::move(records), std::move(labels), std::move(names));
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kEmbeddingMagic, 4);
  detail::write_uint<std::uint32_t>(out, kEmbeddingVersion);
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(set.num_classes()));
  for (const auto& name : set.class_names()) {
    if (name.size() > 0xffff) throw InvalidInput("class name longer than 65535 bytes");
    detail::write_uint<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    detail::write_uint<std::uint32_t>(out, set.labels()[i]);
    for (double v : set.record(i)) detail::write_f32(out, static_cast<float>(v));
  }
  if (!out) throw Error("write failed for " + path.string());
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  detail::expect_magic(in, kEmbeddingMagic);
  const auto version = detail::read_uint<std::uint32_t>(in, "version");
  if (version != kEmbeddingVersion) {
    throw FormatError("unsupported embedding file version " + std::to_string(version));
  }
  const auto m = detail::read_uint<std::uint32_t>(in, "record count");
  const auto d = detail::read_uint<std::uint32_t>(in, "dim");
  const auto c = detail::read_uint<std::uint32_t>(in, "class count");
  if (d == 0) throw FormatError("dim 0");

  std::vector<std::string> names(c);
  for (auto& name : names) {
    const auto len = detail::read_uint<std::uint16_t>(in, "class name length");
    name.resize(len);
    in.read(name.data(), len);
    if (in.gcount() != len) throw FormatError("truncated class name");
  }

  Mat records(m, d);
  std::vector<ClassId> labels(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    labels[i] = detail::read_uint<std::uint32_t>(in, "record class id");
    if (labels[i] >= c) {
      throw FormatError("record " + std::to_string(i) + " has class id " +
                        std::to_string(labels[i]) + " >= " + std::to_string(c));
    }
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = detail::read_f32(in, "record value");
      if (!std::isfinite(v)) throw FormatError("non-finite value in record " + std::to_string(i));
      records(i, j) = static_cast<double>(v);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after records");
  return EmbeddingSet(std::move(records), std::move(labels), std::move(names));
}

MemoryBank compute_memory_bank(const EmbeddingSet& set, std::span<const ClassId> base_classes) {
  std::vector<ClassId> ids(base_classes.begin(), base_classes.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.empty()) throw EmptyMemory("no base classes");
  Mat protos(ids.size(), set.dim());
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (ids[b] >= set.num_classes()) throw MissingClass("class " + std::to_string(ids[b]));
    const auto& members = set.records_of(ids[b]);
    if (members.empty()) throw MissingClass("class " + std::to_string(ids[b]) + " has no records");
    auto row = protos.row(b);
    for (std::size_t r : members) {
      auto v = set.record(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += v[j];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& x : row) x *= inv;
  }
  return MemoryBank(std::move(protos), std::move(ids));
}

MemoryBank select_memory(const MemoryBank& bank, std::span<const ClassId> excluded) {
  std::vector<std::size_t> keep;
  std::vector<ClassId> ids;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const ClassId c = bank.class_ids()[i];
    if (std::find(excluded.begin(), excluded.end(), c) == excluded.end()) {
      keep.push_back(i);
      ids.push_back(c);
    }
  }
  if (keep.empty()) throw EmptyMemory("every memory row was excluded");
  return MemoryBank(gather_rows(bank.prototypes(), keep), std::move(ids));
}

MemoryBank truncate_memory(const MemoryBank& bank, std::size_t size) {
  if (size == 0) throw EmptyMemory("memory size 0");
  if (size >= bank.size()) return bank;
  std::span<const ClassId> tail(bank.class_ids().begin() + static_cast<std::ptrdiff_t>(size),
                                bank.class_ids().end());
  return select_memory(bank, tail);
}

void save_memory_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  ClassId max_id = *std::max_element(bank.class_ids().begin(), bank.class_ids().end());
  // Dense class table: one name per id up to the largest bank id.
  std::vector<std::string> names(static_cast<std::size_t>(max_id) + 1);
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = "class_" + std::to_string(i);
  Mat rows = bank.prototypes();
  for (double& x : rows.values()) x = round_to_float(x);
  save_embeddings(EmbeddingSet(std::move(rows), bank.class_ids(), std::move(names)), path);
}

MemoryBank load_memory_bank(const std::filesystem::path& path) {
  const EmbeddingSet set = load_embeddings(path);
  std::set<ClassId> seen;
  for (ClassId c : set.labels()) {
    if (!seen.insert(c).second) {
      throw FormatError("memory file has more than one record for class " + std::to_string(c));
    }
  }
  return MemoryBank(set.records(), set.labels());
}

HoldoutSplit split_holdout(const EmbeddingSet& set, std::span<const ClassId> classes,
                           std::size_t per_class) {
  std::vector<bool> held(set.size(), false);
  for (ClassId c : classes) {
    const auto& members = set.records_of(c);
    if (members.size() <= per_class) {
      throw InsufficientData("class " + std::to_string(c) + " has " +
                             std::to_string(members.size()) + " records, cannot hold out " +
                             std::to_string(per_class));
    }
    for (std::size_t i = members.size() - per_class; i < members.size(); ++i) {
      held[members[i]] = true;
    }
  }
  std::vector<std::size_t> train_idx, hold_idx;
  std::vector<ClassId> train_labels, hold_labels;
  for (std::size_t i = 0; i < set.size(); ++i) {
    (held[i] ? hold_idx : train_idx).push_back(i);
    (held[i] ? hold_labels : train_labels).push_back(set.labels()[i]);
  }
  return HoldoutSplit{
      EmbeddingSet(gather_rows(set.records(), train_idx), std::move(train_labels),
                   set.class_names()),
      EmbeddingSet(gather_rows(set.records(), hold_idx), std::move(hold_labels),
                   set.class_names())};
}

}  // namespace tane
