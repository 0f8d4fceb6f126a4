// Copyright 2026 The logitmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// @file logits_store.hpp
/// @brief Per-token logits records and the "AMIA" binary container.
///
/// Layout (all integers little-endian):
///
///     "AMIA" | version u32 = 1 | vocab_size u32
///     per record:
///       id_len u32 | id bytes (UTF-8) | label u8 | slice u8 | seq_len u32
///       seq_len x u32 target ids
///       seq_len x vocab_size f32 logits, row-major
///
/// Row i of a record's logits is the prediction for targets[i]; the exporter
/// has already applied the one-position shift.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logitmia {

enum class Slice : std::uint8_t { img = 0, inst = 1, desp = 2, inst_desp = 3, text = 4 };

inline std::string_view to_string(Slice s) {
  switch (s) {
    case Slice::img: return "img";
    case Slice::inst: return "inst";
    case Slice::desp: return "desp";
    case Slice::inst_desp: return "inst_desp";
    case Slice::text: return "text";
  }
  return "unknown";
}

/// True for slices that carry ground-truth token ids. Image positions have no
/// targets; their target vector is an all-zero sentinel.
inline bool has_targets(Slice s) { return s != Slice::img; }

struct LogitsRecord {
  std::string sample_id;
  std::uint8_t label = 0;  // 1 = member, 0 = non-member
  Slice slice = Slice::text;
  std::size_t vocab_size = 0;
  std::vector<std::uint32_t> targets;
  std::vector<float> logits;  // targets.size() x vocab_size, row-major

  std::size_t seq_len() const { return targets.size(); }
  std::span<const float> row(std::size_t i) const {
    return {logits.data() + i * vocab_size, vocab_size};
  }
  bool is_member() const { return label == 1; }

  friend bool operator==(const LogitsRecord&, const LogitsRecord&) = default;
};

struct Dataset {
  std::size_t vocab_size = 0;
  std::vector<LogitsRecord> records;
  std::string provenance;  // in-memory only; not part of the container

  std::size_t member_count() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.is_member(); }));
  }
  std::size_t nonmember_count() const { return records.size() - member_count(); }
};

class ContainerError : public std::runtime_error {
 public:
  enum class Kind {
    io,
    empty_dataset,
    vocab_mismatch,
    invalid_record,
    bad_magic,
    unsupported_version,
    truncated,
  };

  ContainerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::array<char, 4> kContainerMagic = {'A', 'M', 'I', 'A'};
inline constexpr std::uint32_t kContainerVersion = 1;

/// Checks the record-level invariants. Throws ContainerError.
inline void validate_record(const LogitsRecord& r, std::size_t vocab_size) {
  if (r.vocab_size != vocab_size) {
    throw ContainerError(ContainerError::Kind::vocab_mismatch,
                         "vocab mismatch: record '" + r.sample_id + "' has V=" +
                             std::to_string(r.vocab_size) + ", dataset has V=" +
                             std::to_string(vocab_size));
  }
  if (r.targets.empty()) {
    throw ContainerError(ContainerError::Kind::invalid_record,
                         "record '" + r.sample_id + "' has no positions");
  }
  if (r.label > 1) {
    throw ContainerError(ContainerError::Kind::invalid_record,
                         "record '" + r.sample_id + "' has label " + std::to_string(r.label));
  }
  if (static_cast<std::uint8_t>(r.slice) > static_cast<std::uint8_t>(Slice::text)) {
    throw ContainerError(ContainerError::Kind::invalid_record,
                         "record '" + r.sample_id + "' has unknown slice code");
  }
  if (r.logits.size() != r.targets.size() * r.vocab_size) {
    throw ContainerError(ContainerError::Kind::invalid_record,
                         "record '" + r.sample_id + "' logits size does not match N x V");
  }
  for (auto t : r.targets) {
    if (t >= vocab_size) {
      throw ContainerError(ContainerError::Kind::invalid_record,
                           "record '" + r.sample_id + "' target id " + std::to_string(t) +
                               " out of range");
    }
  }
}

inline void validate_dataset(const Dataset& ds) {
  if (ds.records.empty()) throw ContainerError(ContainerError::Kind::empty_dataset, "empty dataset");
  if (ds.vocab_size == 0) {
    throw ContainerError(ContainerError::Kind::invalid_record, "vocab size must be positive");
  }
  for (const auto& r : ds.records) validate_record(r, ds.vocab_size);
}

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

  const unsigned char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ContainerError(ContainerError::Kind::truncated,
                           std::string("truncated payload while reading ") + what + " at byte " +
                               std::to_string(pos_));
    }
    auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) { return get_u32(take(4, what)); }
  std::uint8_t u8(const char* what) { return *take(1, what); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes a dataset to container bytes. Validates every record before
/// producing output.
inline std::vector<char> encode_container(const Dataset& ds) {
  validate_dataset(ds);
  std::vector<char> out;
  out.insert(out.end(), kContainerMagic.begin(), kContainerMagic.end());
  detail::put_u32(out, kContainerVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(ds.vocab_size));
  for (const auto& r : ds.records) {
    detail::put_u32(out, static_cast<std::uint32_t>(r.sample_id.size()));
    out.insert(out.end(), r.sample_id.begin(), r.sample_id.end());
    out.push_back(static_cast<char>(r.label));
    out.push_back(static_cast<char>(r.slice));
    detail::put_u32(out, static_cast<std::uint32_t>(r.targets.size()));
    for (auto t : r.targets) detail::put_u32(out, t);
    for (float f : r.logits) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline Dataset decode_container(std::span<const char> bytes) {
  detail::ByteReader in(bytes);
  const auto* magic = in.take(4, "magic");
  if (!std::equal(kContainerMagic.begin(), kContainerMagic.end(),
                  reinterpret_cast<const char*>(magic))) {
    throw ContainerError(ContainerError::Kind::bad_magic, "bad magic: not an AMIA container");
  }
  const auto version = in.u32("version");
  if (version != kContainerVersion) {
    throw ContainerError(ContainerError::Kind::unsupported_version,
                         "unsupported container version " + std::to_string(version));
  }
  Dataset ds;
  ds.vocab_size = in.u32("vocab_size");
  while (!in.done()) {
    LogitsRecord r;
    r.vocab_size = ds.vocab_size;
    const auto id_len = in.u32("id length");
    const auto* id = in.take(id_len, "sample id");
    r.sample_id.assign(reinterpret_cast<const char*>(id), id_len);
    r.label = in.u8("label");
    r.slice = static_cast<Slice>(in.u8("slice"));
    const auto n = in.u32("seq_len");
    const auto* tp = in.take(static_cast<std::size_t>(n) * 4, "target ids");
    r.targets.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.targets[i] = detail::get_u32(tp + 4 * i);
    const std::size_t cells = static_cast<std::size_t>(n) * ds.vocab_size;
    const auto* lp = in.take(cells * 4, "logits");
    r.logits.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      r.logits[i] = std::bit_cast<float>(detail::get_u32(lp + 4 * i));
    }
    validate_record(r, ds.vocab_size);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

inline void write_container(const Dataset& ds, const std::string& path) {
  const auto bytes = encode_container(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError(ContainerError::Kind::io, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ContainerError(ContainerError::Kind::io, "write failed for '" + path + "'");
}

inline std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError(ContainerError::Kind::io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Dataset read_container(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  auto ds = decode_container(bytes);
  ds.provenance = path;
  return ds;
}

// ---------------------------------------------------------------------------
// Distributions

class NonFiniteLogitError : public std::runtime_error {
 public:
  NonFiniteLogitError(std::size_t row, const std::string& id)
      : std::runtime_error("non-finite logit in row " + std::to_string(row) + " of record '" + id +
                           "'"),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// 64-bit probabilities and log-probabilities for one record.
struct Distributions {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> probs;
  std::vector<double> log_probs;

  std::span<const double> prob_row(std::size_t i) const { return {probs.data() + i * cols, cols}; }
  std::span<const double> log_prob_row(std::size_t i) const {
    return {log_probs.data() + i * cols, cols};
  }
  double prob(std::size_t i, std::size_t j) const { return probs[i * cols + j]; }
  double log_prob(std::size_t i, std::size_t j) const { return log_probs[i * cols + j]; }
};

/// Stable softmax of one row into `probs`/`log_probs`: subtract the row max,
/// take log-sum-exp, and exponentiate the log-probabilities.
inline void softmax_row(std::span<const float> logits, std::span<double> probs,
                        std::span<double> log_probs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (float x : logits) hi = std::max(hi, static_cast<double>(x));
  double sum = 0.0;
  for (float x : logits) sum += std::exp(static_cast<double>(x) - hi);
  const double lse = hi + std::log(sum);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    log_probs[j] = static_cast<double>(logits[j]) - lse;
    probs[j] = std::exp(log_probs[j]);
  }
}

inline Distributions derive_distributions(const LogitsRecord& record) {
  Distributions d;
  d.rows = record.seq_len();
  d.cols = record.vocab_size;
  d.probs.resize(d.rows * d.cols);
  d.log_probs.resize(d.rows * d.cols);
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto row = record.row(i);
    if (!std::all_of(row.begin(), row.end(), [](float x) { return std::isfinite(x); })) {
      throw NonFiniteLogitError(i, record.sample_id);
    }
    softmax_row(row, {d.probs.data() + i * d.cols, d.cols}, {d.log_probs.data() + i * d.cols, d.cols});
  }
  return d;
}

}  // namespace logitmia
