#pragma once

// Content-defined chunking and the chunk-frequency similarity score.
//
// A file's versions are cut into variable-size chunks at anchor positions
// chosen by a rolling Rabin fingerprint. Each chunk value is counted at most
// once per version. With c_i the count of the i-th most frequent chunk value,
// v the number of versions and k the rounded mean number of unique chunks per
// version, the score is  sum_{i<k} c_i / (v * k).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "confsieve/error.hpp"
#include "confsieve/rabin.hpp"
#include "confsieve/trigger_sampler.hpp"
#include "confsieve/types.hpp"
#include "confsieve/version_store.hpp"

namespace confsieve {

using ChunkDigest = std::uint64_t;

struct ChunkerConfig {
  std::size_t window_bytes = 8;
  std::uint64_t anchor_divisor = 16;  // expected chunk size in bytes
  std::uint64_t polynomial = rabin::kDefaultPolynomial;

  // A window is an anchor when fingerprint mod anchor_divisor equals this.
  std::uint64_t anchor_residue() const noexcept { return anchor_divisor - 1; }

  void validate() const {
    if (window_bytes < 1) throw ArgumentError("window_bytes must be at least 1");
    if (anchor_divisor == 0 || (anchor_divisor & (anchor_divisor - 1)) != 0)
      throw ArgumentError("anchor_divisor must be a power of two");
  }
};

// Sorted, duplicate-free chunk digests of one version.
class ChunkSet {
 public:
  ChunkSet() = default;
  explicit ChunkSet(std::vector<ChunkDigest> digests) : digests_(std::move(digests)) {
    std::sort(digests_.begin(), digests_.end());
    digests_.erase(std::unique(digests_.begin(), digests_.end()), digests_.end());
  }

  std::size_t size() const noexcept { return digests_.size(); }
  bool empty() const noexcept { return digests_.empty(); }
  auto begin() const noexcept { return digests_.begin(); }
  auto end() const noexcept { return digests_.end(); }
  const std::vector<ChunkDigest>& digests() const noexcept { return digests_; }
  bool contains(ChunkDigest d) const { return std::binary_search(digests_.begin(), digests_.end(), d); }

  friend bool operator==(const ChunkSet&, const ChunkSet&) = default;

 private:
  std::vector<ChunkDigest> digests_;
};

struct ChunkSpan {
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const ChunkSpan&, const ChunkSpan&) = default;
};

class Chunker {
 public:
  explicit Chunker(ChunkerConfig cfg = {}) : cfg_((cfg.validate(), cfg)), tables_(cfg.polynomial, cfg.window_bytes) {}

  const ChunkerConfig& config() const noexcept { return cfg_; }
  const rabin::Tables& tables() const noexcept { return tables_; }

  // Calls f(end) for every anchor, where `end` is the index of the last byte
  // of the anchoring window.
  template <typename F>
  void for_each_anchor(ByteView content, F&& f) const {
    const std::size_t w = cfg_.window_bytes;
    if (content.size() < w) return;
    const std::uint64_t mask = cfg_.anchor_divisor - 1;
    const std::uint64_t residue = cfg_.anchor_residue();
    std::uint64_t fp = tables_.fingerprint(content.first(w));
    if ((fp & mask) == residue) f(w - 1);
    for (std::size_t end = w; end < content.size(); ++end) {
      fp = tables_.slide(fp, content[end - w], content[end]);
      if ((fp & mask) == residue) f(end);
    }
  }

  // Chunks in file order. Each anchor ends a chunk; the trailing bytes after
  // the last anchor form a final chunk.
  std::vector<ChunkSpan> boundaries(ByteView content) const {
    std::vector<ChunkSpan> spans;
    std::size_t start = 0;
    for_each_anchor(content, [&](std::size_t end) {
      spans.push_back({start, end + 1 - start});
      start = end + 1;
    });
    if (start < content.size()) spans.push_back({start, content.size() - start});
    return spans;
  }

  ChunkSet chunk(ByteView content) const {
    std::vector<ChunkDigest> digests;
    for (const auto& s : boundaries(content)) digests.push_back(fnv1a64(content.subspan(s.offset, s.length)));
    return ChunkSet(std::move(digests));
  }

 private:
  ChunkerConfig cfg_;
  rabin::Tables tables_;
};

inline ChunkSet chunk_version(ByteView content, const ChunkerConfig& cfg = {}) { return Chunker(cfg).chunk(content); }

// Running per-file chunk counts.
struct ChunkHistogram {
  std::unordered_map<ChunkDigest, std::uint64_t> counts;
  std::vector<std::size_t> per_version_unique;

  std::uint64_t versions() const noexcept { return per_version_unique.size(); }
};

inline ChunkHistogram& accumulate(ChunkHistogram& h, const ChunkSet& chunks) {
  for (ChunkDigest d : chunks) ++h.counts[d];
  h.per_version_unique.push_back(chunks.size());
  return h;
}

// k: mean unique chunks per version, rounded half up, clipped to
// [1, distinct chunk values].
inline std::size_t top_chunk_count(const ChunkHistogram& h) {
  const auto v = h.versions();
  if (v == 0 || h.counts.empty()) return 0;
  std::uint64_t total = 0;
  for (auto n : h.per_version_unique) total += n;
  const double mean = static_cast<double>(total) / static_cast<double>(v);
  const auto rounded = static_cast<std::size_t>(std::floor(mean + 0.5));
  return std::min(std::max<std::size_t>(1, rounded), h.counts.size());
}

inline double similarity(const ChunkHistogram& h) {
  const auto v = h.versions();
  if (v == 0) throw ArgumentError("similarity of a histogram with no versions");
  if (h.counts.empty()) return 0.0;
  const std::size_t k = top_chunk_count(h);
  std::vector<std::uint64_t> c;
  c.reserve(h.counts.size());
  for (const auto& [_, n] : h.counts) c.push_back(n);
  std::nth_element(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k - 1), c.end(), std::greater<>{});
  std::uint64_t top = 0;
  for (std::size_t i = 0; i < k; ++i) top += c[i];
  return static_cast<double>(top) / (static_cast<double>(v) * static_cast<double>(k));
}

enum class ScoreMode { AllVersions, Triggered, Sampled, Recovery };

inline std::string_view to_string(ScoreMode m) noexcept {
  switch (m) {
    case ScoreMode::AllVersions: return "all";
    case ScoreMode::Triggered: return "triggered";
    case ScoreMode::Sampled: return "sampled";
    case ScoreMode::Recovery: return "recovery";
  }
  return "?";
}

inline std::optional<ScoreMode> parse_score_mode(std::string_view s) noexcept {
  for (auto m : {ScoreMode::AllVersions, ScoreMode::Triggered, ScoreMode::Sampled, ScoreMode::Recovery})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct SimilarityScore {
  std::string path;
  double score = 0.0;
  std::uint64_t versions_used = 0;
  ScoreMode mode = ScoreMode::AllVersions;
  bool permanent = true;  // false for recovery-mode estimates
  std::optional<std::size_t> trigger_index;
};

// Which versions feed the score for `mode`, and the mode actually applied.
// TRIGGERED and SAMPLED fall back to RECOVERY (all versions, non-permanent)
// when the file has no trigger point. RECOVERY on a triggered file returns
// the regular-operation (sampled) selection.
inline std::pair<std::vector<std::size_t>, ScoreMode> select_versions(std::span<const TimestampNs> timestamps,
                                                                      const TriggerConfig& trig, ScoreMode mode,
                                                                      std::optional<std::size_t>* trigger_out = nullptr) {
  std::vector<std::size_t> all(timestamps.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (mode == ScoreMode::AllVersions) {
    if (trigger_out) *trigger_out = trigger_point(timestamps, trig);
    return {std::move(all), mode};
  }
  const TriggerScan scan = scan_periods(timestamps, trig);
  if (trigger_out) *trigger_out = scan.trigger;
  if (!scan.trigger) return {std::move(all), ScoreMode::Recovery};
  if (mode == ScoreMode::Triggered) {
    all.resize(*scan.trigger + 1);
    return {std::move(all), mode};
  }
  return {scan.openers, ScoreMode::Sampled};
}

inline SimilarityScore score_file(const VersionLog& log, const TriggerConfig& trig, ScoreMode mode,
                                  const Chunker& chunker = Chunker{}) {
  const auto timestamps = log.timestamps();
  if (timestamps.empty()) throw ArgumentError(log.path() + ": cannot score an empty log");
  SimilarityScore out;
  out.path = log.path();
  auto [indices, applied] = select_versions(timestamps, trig, mode, &out.trigger_index);
  ChunkHistogram h;
  for (auto i : indices) accumulate(h, chunker.chunk(log.read(i)));
  out.score = similarity(h);
  out.versions_used = indices.size();
  out.mode = applied;
  out.permanent = applied != ScoreMode::Recovery;
  return out;
}

}  // namespace confsieve
