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

/// @file library.hpp
/// @brief Append-only strategy archive with per-round percentile categories
/// and the strong/weak context window.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "logitmia/evaluation.hpp"
#include "logitmia/strategy.hpp"

namespace logitmia {

enum class Category { strong, mid, weak };

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::strong: return "strong";
    case Category::mid: return "mid";
    case Category::weak: return "weak";
  }
  return "?";
}

inline Category category_from_string(std::string_view s) {
  if (s == "strong") return Category::strong;
  if (s == "mid" || s == "medium") return Category::mid;
  if (s == "weak") return Category::weak;
  throw std::invalid_argument("unknown category '" + std::string(s) + "'");
}

struct LibraryEntry {
  StrategySpec spec;
  EvalTuple r;
  double q = 0.0;
  Category category = Category::mid;
  int round = 0;
  std::string analysis;
  bool failed = false;

  friend bool operator==(const LibraryEntry&, const LibraryEntry&) = default;
};

/// One evaluated candidate before categorization.
struct RoundCandidate {
  StrategySpec spec;
  EvalTuple r;
  double q = 0.0;
  bool failed = false;
  std::string analysis;
};

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * n) of the
/// ascending order.
inline double nearest_rank_percentile(std::vector<double> values, int percent) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<long>(values.size());
  long rank = (static_cast<long>(percent) * n + 99) / 100;
  rank = std::clamp(rank, 1L, n);
  return values[static_cast<std::size_t>(rank - 1)];
}

/// Categorizes one round: strong iff q >= p70, weak iff q <= p30 (and not
/// strong), mid otherwise. Input order is preserved.
inline std::vector<LibraryEntry> categorize(const std::vector<RoundCandidate>& round_entries,
                                            int round) {
  std::vector<LibraryEntry> out;
  if (round_entries.empty()) return out;
  std::vector<double> qs;
  for (const auto& c : round_entries) qs.push_back(c.q);
  const double p70 = nearest_rank_percentile(qs, 70);
  const double p30 = nearest_rank_percentile(qs, 30);
  for (const auto& c : round_entries) {
    LibraryEntry e{c.spec, c.r, c.q, Category::mid, round, c.analysis, c.failed};
    if (c.q >= p70) {
      e.category = Category::strong;
    } else if (c.q <= p30) {
      e.category = Category::weak;
    }
    out.push_back(std::move(e));
  }
  return out;
}

class LibraryError : public std::runtime_error {
 public:
  LibraryError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class StrategyLibrary {
 public:
  const std::vector<LibraryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Appends a round's entries. Rejects any (name, round) pair already in the
  /// archive or repeated within the batch; nothing is inserted on error.
  void insert(const std::vector<LibraryEntry>& batch) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& e = batch[i];
      auto same = [&](const LibraryEntry& o) { return o.spec.name == e.spec.name && o.round == e.round; };
      if (std::any_of(entries_.begin(), entries_.end(), same) ||
          std::any_of(batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(i), same)) {
        throw LibraryError("duplicate entry '" + e.spec.name + "' in round " + std::to_string(e.round));
      }
    }
    entries_.insert(entries_.end(), batch.begin(), batch.end());
  }

  int max_round() const {
    int r = 0;
    for (const auto& e : entries_) r = std::max(r, e.round);
    return r;
  }

  /// Highest Q in the archive, or nullopt when empty.
  std::optional<double> best_q() const {
    if (entries_.empty()) return std::nullopt;
    double best = entries_.front().q;
    for (const auto& e : entries_) best = std::max(best, e.q);
    return best;
  }

  bool contains_code(std::string_view code) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.spec.code == code; });
  }

  friend bool operator==(const StrategyLibrary&, const StrategyLibrary&) = default;

 private:
  std::vector<LibraryEntry> entries_;
};

// ---------------------------------------------------------------------------
// Context window

struct ContextWindow {
  std::vector<LibraryEntry> strong;  // q descending
  std::vector<LibraryEntry> weak;    // q ascending

  bool empty() const { return strong.empty() && weak.empty(); }
  std::size_t size() const { return strong.size() + weak.size(); }
  std::vector<LibraryEntry> entries() const {
    auto all = strong;
    all.insert(all.end(), weak.begin(), weak.end());
    return all;
  }
};

/// Number of low-quality exemplars for a window of size w; the rest are
/// high-quality. w = 5 gives three strong and two weak.
inline std::size_t weak_slots(std::size_t w) { return w * 2 / 5; }

/// Selects the generator context from the whole archive: empty for an empty
/// library, the entire library when it fits in the window, otherwise the
/// top and bottom entries by Q. Ties go to the earlier round, then the name.
inline ContextWindow select_context(const StrategyLibrary& library, std::size_t w = 5) {
  ContextWindow win;
  if (library.empty() || w == 0) return win;
  std::vector<LibraryEntry> by_q = library.entries();
  std::stable_sort(by_q.begin(), by_q.end(), [](const LibraryEntry& a, const LibraryEntry& b) {
    if (a.q != b.q) return a.q > b.q;
    if (a.round != b.round) return a.round < b.round;
    return a.spec.name < b.spec.name;
  });
  const std::size_t n_weak = weak_slots(w);
  const std::size_t n_strong = w - n_weak;
  if (by_q.size() <= w) {
    const std::size_t k = std::min(n_strong, by_q.size());
    win.strong.assign(by_q.begin(), by_q.begin() + static_cast<std::ptrdiff_t>(k));
    win.weak.assign(by_q.begin() + static_cast<std::ptrdiff_t>(k), by_q.end());
    std::reverse(win.weak.begin(), win.weak.end());
    return win;
  }
  win.strong.assign(by_q.begin(), by_q.begin() + static_cast<std::ptrdiff_t>(n_strong));
  // Bottom entries use the same tie order (earlier round first) among equal q.
  std::vector<LibraryEntry> asc = library.entries();
  std::stable_sort(asc.begin(), asc.end(), [](const LibraryEntry& a, const LibraryEntry& b) {
    if (a.q != b.q) return a.q < b.q;
    if (a.round != b.round) return a.round < b.round;
    return a.spec.name < b.spec.name;
  });
  win.weak.assign(asc.begin(), asc.begin() + static_cast<std::ptrdiff_t>(n_weak));
  return win;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json entry_to_json(const LibraryEntry& e) {
  nlohmann::json j = e.spec;
  j["auc"] = e.r.auc;
  j["accuracy"] = e.r.acc;
  j["tpr_at_5_fpr"] = e.r.tpr_at_5fpr;
  j["q"] = e.q;
  j["category"] = std::string(to_string(e.category));
  j["round"] = e.round;
  j["analysis"] = e.analysis;
  j["failed"] = e.failed;
  return j;
}

inline LibraryEntry entry_from_json(const nlohmann::json& j) {
  LibraryEntry e;
  e.spec = j.get<StrategySpec>();
  e.r = {j.at("auc").get<double>(), j.at("accuracy").get<double>(),
         j.at("tpr_at_5_fpr").get<double>()};
  e.q = j.at("q").get<double>();
  e.category = category_from_string(j.at("category").get<std::string>());
  e.round = j.at("round").get<int>();
  e.analysis = j.value("analysis", "");
  e.failed = j.value("failed", false);
  return e;
}

inline std::string serialize_library(const StrategyLibrary& lib) {
  std::string out;
  for (const auto& e : lib.entries()) {
    out += entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline StrategyLibrary parse_library(std::istream& in) {
  StrategyLibrary lib;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LibraryEntry e;
    try {
      e = entry_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& ex) {
      throw LibraryError(std::string("malformed library entry: ") + ex.what(), line_no);
    }
    try {
      lib.insert({e});
    } catch (const LibraryError& ex) {
      throw LibraryError(ex.what(), line_no);
    }
  }
  return lib;
}

inline void persist(const StrategyLibrary& lib, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LibraryError("cannot open '" + path + "' for writing");
  out << serialize_library(lib);
  if (!out) throw LibraryError("write failed for '" + path + "'");
}

inline StrategyLibrary load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LibraryError("cannot open '" + path + "'");
  return parse_library(in);
}

namespace detail {

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace detail

/// Human-readable record layout: category, performance, core idea, formal
/// definition, executable implementation and analysis for each entry.
inline std::string render_markdown(const std::vector<LibraryEntry>& entries) {
  std::ostringstream md;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (i) md << "\n---\n\n";
    md << "### Strategy " << i + 1 << ": " << e.spec.name << "\n\n";
    md << "*Category:* " << to_string(e.category) << "  \n";
    md << "*Round:* " << e.round << (e.failed ? " (failed)" : "") << "\n\n";
    md << "**Performance.**\n\n";
    md << "- Dynamic Score: " << detail::fixed(e.q, 6) << "\n";
    md << "- AUC: " << detail::fixed(e.r.auc, 4) << "\n";
    md << "- Accuracy: " << detail::fixed(e.r.acc, 4) << "\n";
    md << "- TPR@5%FPR: " << detail::fixed(e.r.tpr_at_5fpr, 4) << "\n\n";
    md << "**Core Idea.** " << (e.spec.description.empty() ? "(none)" : e.spec.description) << "\n\n";
    md << "**Formal Definition.** " << (e.spec.formula.empty() ? "(none)" : e.spec.formula) << "\n\n";
    md << "**Executable Implementation.** (" << to_string(e.spec.direction) << ")\n\n";
    md << "```\n" << e.spec.code << "\n```\n\n";
    md << "**Analysis.** " << (e.analysis.empty() ? "(none)" : e.analysis) << "\n";
  }
  return md.str();
}

}  // namespace logitmia
