#pragma once

// Append-only per-file version logs and the store directory that groups them.
//
// Log file layout (all integers little-endian):
//   header:  "SAICLOG1" (8 bytes), format version u32
//   record:  index u64, timestamp_ns u64, content_length u64, content,
//            crc32 u32 over (index, timestamp_ns, content_length, content)
//
// A store is a directory holding one log file per shadowed path plus
// `index.tsv` (`path<TAB>logfile` per line). Owner application names live in
// the optional `owners.tsv` sidecar (`path<TAB>app`).

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "confsieve/error.hpp"
#include "confsieve/types.hpp"

namespace confsieve {

namespace fs = std::filesystem;

inline constexpr std::array<char, 8> kLogMagic = {'S', 'A', 'I', 'C', 'L', 'O', 'G', '1'};
inline constexpr std::uint32_t kLogFormatVersion = 1;
inline constexpr std::size_t kLogHeaderSize = 12;
inline constexpr std::size_t kRecordHeaderSize = 24;
inline constexpr std::size_t kRecordTrailerSize = 4;

// Score given to logs that have no similarity score when evicting.
inline constexpr double kUnscoredSentinel = -1.0;

namespace detail {

inline void put_le(std::byte* out, std::uint64_t v, std::size_t width) noexcept {
  for (std::size_t i = 0; i < width; ++i) out[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}

inline std::uint64_t get_le(const std::byte* in, std::size_t width) noexcept {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

inline std::uint32_t crc32_update(std::uint32_t crc, ByteView data) noexcept {
  // zlib takes uInt lengths; feed large buffers in pieces.
  const auto* p = reinterpret_cast<const Bytef*>(data.data());
  std::size_t left = data.size();
  uLong c = crc;
  while (left > 0) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    c = ::crc32(c, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(c);
}

inline bool read_exact(std::istream& in, std::byte* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

inline void check_store_path(std::string_view path) {
  if (path.empty()) throw ArgumentError("empty file path");
  if (path.find_first_of("\t\n\r") != std::string_view::npos)
    throw ArgumentError("file path contains a tab or newline: " + std::string(path));
}

// Writes `content` to `target` via a sibling temp file and rename, so a failed
// write never leaves a truncated target behind.
inline void write_file_atomically(const fs::path& target, ByteView content) {
  fs::path tmp = target;
  tmp += ".confsieve-tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(content.data()),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename " + tmp.string() + " to " + target.string() + ": " + ec.message());
  }
}

}  // namespace detail

// Location and metadata of one stored version.
struct VersionRecord {
  std::uint64_t index = 0;
  TimestampNs timestamp = 0;
  std::uint64_t content_length = 0;
  std::uint64_t offset = 0;  // byte offset of the content within the log file
  std::uint32_t checksum = 0;
};

struct FileVersion {
  std::uint64_t index = 0;
  TimestampNs timestamp = 0;
  Bytes content;
};

// The redo log for one file. Single writer; readers of already-appended
// versions may run concurrently with each other and with an append.
class VersionLog {
 public:
  VersionLog(fs::path file, std::string path, std::string owner_app)
      : file_(std::move(file)), path_(std::move(path)), owner_app_(std::move(owner_app)) {}

  VersionLog(const VersionLog&) = delete;
  VersionLog& operator=(const VersionLog&) = delete;

  // Creates an empty log file (header only). Fails if the file exists.
  static std::unique_ptr<VersionLog> create(fs::path file, std::string path, std::string owner_app) {
    if (fs::exists(file)) throw IoError("log file already exists: " + file.string());
    std::array<std::byte, kLogHeaderSize> header{};
    std::copy_n(reinterpret_cast<const std::byte*>(kLogMagic.data()), kLogMagic.size(), header.begin());
    detail::put_le(header.data() + 8, kLogFormatVersion, 4);
    std::ofstream out(file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(header.data()), header.size());
    out.flush();
    if (!out) throw IoError("cannot create log file " + file.string());
    auto log = std::make_unique<VersionLog>(std::move(file), std::move(path), std::move(owner_app));
    log->file_size_ = kLogHeaderSize;
    return log;
  }

  // Parses and validates every record of an existing log file.
  static std::unique_ptr<VersionLog> load(fs::path file, std::string path, std::string owner_app) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open log file " + file.string());
    auto log = std::make_unique<VersionLog>(file, std::move(path), std::move(owner_app));

    std::array<std::byte, kLogHeaderSize> header{};
    if (!detail::read_exact(in, header.data(), header.size()) ||
        !std::equal(kLogMagic.begin(), kLogMagic.end(), reinterpret_cast<const char*>(header.data())))
      throw CorruptLogError(file.string() + ": bad magic");
    if (detail::get_le(header.data() + 8, 4) != kLogFormatVersion)
      throw CorruptLogError(file.string() + ": unsupported format version");

    std::uint64_t offset = kLogHeaderSize;
    std::vector<std::byte> buf;
    while (in.peek() != std::char_traits<char>::eof()) {
      std::array<std::byte, kRecordHeaderSize> rh{};
      if (!detail::read_exact(in, rh.data(), rh.size()))
        throw CorruptLogError(file.string() + ": truncated record header");
      VersionRecord rec;
      rec.index = detail::get_le(rh.data(), 8);
      rec.timestamp = static_cast<TimestampNs>(detail::get_le(rh.data() + 8, 8));
      rec.content_length = detail::get_le(rh.data() + 16, 8);
      rec.offset = offset + kRecordHeaderSize;

      if (rec.index != log->records_.size())
        throw CorruptLogError(file.string() + ": non-consecutive version index " + std::to_string(rec.index));
      if (!log->records_.empty() && rec.timestamp < log->records_.back().timestamp)
        throw CorruptLogError(file.string() + ": timestamp regression at index " + std::to_string(rec.index));

      std::uint32_t crc = detail::crc32_update(0, rh);
      constexpr std::size_t kBlock = 1 << 16;
      buf.resize(kBlock);
      for (std::uint64_t left = rec.content_length; left > 0;) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(left, kBlock));
        if (!detail::read_exact(in, buf.data(), n))
          throw CorruptLogError(file.string() + ": truncated content at index " + std::to_string(rec.index));
        crc = detail::crc32_update(crc, ByteView(buf.data(), n));
        left -= n;
      }
      std::array<std::byte, kRecordTrailerSize> trailer{};
      if (!detail::read_exact(in, trailer.data(), trailer.size()))
        throw CorruptLogError(file.string() + ": missing checksum at index " + std::to_string(rec.index));
      rec.checksum = static_cast<std::uint32_t>(detail::get_le(trailer.data(), 4));
      if (rec.checksum != crc)
        throw CorruptLogError(file.string() + ": checksum mismatch at index " + std::to_string(rec.index));

      log->total_bytes_ += rec.content_length;
      offset = rec.offset + rec.content_length + kRecordTrailerSize;
      log->records_.push_back(rec);
    }
    log->file_size_ = offset;
    return log;
  }

  const fs::path& file() const noexcept { return file_; }
  const std::string& path() const noexcept { return path_; }
  const std::string& owner_app() const noexcept { return owner_app_; }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
  }
  bool empty() const { return size() == 0; }

  // Sum of content lengths over all versions.
  std::uint64_t total_bytes() const {
    std::shared_lock lock(mutex_);
    return total_bytes_;
  }

  std::vector<VersionRecord> records() const {
    std::shared_lock lock(mutex_);
    return records_;
  }

  VersionRecord record(std::uint64_t index) const {
    std::shared_lock lock(mutex_);
    if (index >= records_.size())
      throw NotFoundError(path_ + ": no version " + std::to_string(index) + " (log has " +
                          std::to_string(records_.size()) + ")");
    return records_[index];
  }

  std::vector<TimestampNs> timestamps() const {
    std::shared_lock lock(mutex_);
    std::vector<TimestampNs> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.timestamp);
    return out;
  }

  std::uint64_t append(TimestampNs timestamp, ByteView content) {
    std::unique_lock lock(mutex_);
    if (!records_.empty() && timestamp < records_.back().timestamp)
      throw OrderingError(path_ + ": timestamp " + std::to_string(timestamp) + " precedes last version at " +
                          std::to_string(records_.back().timestamp));

    VersionRecord rec;
    rec.index = records_.size();
    rec.timestamp = timestamp;
    rec.content_length = content.size();
    rec.offset = file_size_ + kRecordHeaderSize;

    std::array<std::byte, kRecordHeaderSize> rh{};
    detail::put_le(rh.data(), rec.index, 8);
    detail::put_le(rh.data() + 8, static_cast<std::uint64_t>(timestamp), 8);
    detail::put_le(rh.data() + 16, rec.content_length, 8);
    rec.checksum = detail::crc32_update(detail::crc32_update(0, rh), content);
    std::array<std::byte, kRecordTrailerSize> trailer{};
    detail::put_le(trailer.data(), rec.checksum, 4);

    bool ok = false;
    {
      std::ofstream out(file_, std::ios::binary | std::ios::app);
      if (out) {
        out.write(reinterpret_cast<const char*>(rh.data()), rh.size());
        out.write(reinterpret_cast<const char*>(content.data()), static_cast<std::streamsize>(content.size()));
        out.write(reinterpret_cast<const char*>(trailer.data()), trailer.size());
        out.flush();
        ok = static_cast<bool>(out);
      }
    }
    if (!ok) {
      std::error_code ec;
      if (fs::exists(file_, ec)) fs::resize_file(file_, file_size_, ec);
      throw IoError(path_ + ": failed to append version to " + file_.string());
    }
    file_size_ = rec.offset + rec.content_length + kRecordTrailerSize;
    total_bytes_ += rec.content_length;
    records_.push_back(rec);
    return rec.index;
  }

  Bytes read(std::uint64_t index) const {
    const VersionRecord rec = record(index);
    std::ifstream in(file_, std::ios::binary);
    if (!in) throw IoError("cannot open log file " + file_.string());
    in.seekg(static_cast<std::streamoff>(rec.offset));
    Bytes out(rec.content_length);
    if (!detail::read_exact(in, out.data(), out.size()))
      throw CorruptLogError(file_.string() + ": short read at index " + std::to_string(index));
    return out;
  }

  FileVersion version(std::uint64_t index) const {
    const VersionRecord rec = record(index);
    return {rec.index, rec.timestamp, read(index)};
  }

  // Content of the newest version, or nullopt for an empty log.
  std::optional<Bytes> latest() const {
    const auto n = size();
    if (n == 0) return std::nullopt;
    return read(n - 1);
  }

 private:
  fs::path file_;
  std::string path_;
  std::string owner_app_;
  std::vector<VersionRecord> records_;
  std::uint64_t total_bytes_ = 0;
  std::uint64_t file_size_ = 0;
  mutable std::shared_mutex mutex_;
};

inline std::uint64_t append_version(VersionLog& log, TimestampNs timestamp, ByteView content) {
  return log.append(timestamp, content);
}

inline Bytes read_version(const VersionLog& log, std::uint64_t index) { return log.read(index); }

// Restores version `index` to `destination` through a temp file and rename.
// The log is left untouched. Returns the number of bytes written.
inline std::uint64_t rollback(const VersionLog& log, std::uint64_t index, const fs::path& destination) {
  Bytes content = log.read(index);
  if (destination.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(destination.parent_path(), ec);
    if (ec) throw IoError("cannot create " + destination.parent_path().string() + ": " + ec.message());
  }
  detail::write_file_atomically(destination, content);
  return content.size();
}

struct EvictedLog {
  std::string path;
  std::uint64_t versions_removed = 0;
  std::uint64_t bytes_freed = 0;
};

struct EvictionReport {
  std::vector<EvictedLog> evicted;
  std::uint64_t remaining_bytes = 0;
};

class VersionStore {
 public:
  static constexpr const char* kIndexFile = "index.tsv";
  static constexpr const char* kOwnersFile = "owners.tsv";

  // Opens the store in `dir`, creating the directory if needed.
  static VersionStore open(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create store directory " + dir.string() + ": " + ec.message());
    VersionStore store(dir);
    store.load_index();
    return store;
  }

  VersionStore(VersionStore&& other) noexcept
      : dir_(std::move(other.dir_)), logs_(std::move(other.logs_)), next_id_(other.next_id_) {}

  const fs::path& directory() const noexcept { return dir_; }

  bool contains(std::string_view path) const {
    std::shared_lock lock(mutex_);
    return logs_.find(std::string(path)) != logs_.end();
  }

  std::size_t log_count() const {
    std::shared_lock lock(mutex_);
    return logs_.size();
  }

  bool empty() const { return log_count() == 0; }

  // Shadowed paths in ascending order.
  std::vector<std::string> paths() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(logs_.size());
    for (const auto& [p, _] : logs_) out.push_back(p);
    return out;
  }

  VersionLog& log(std::string_view path) {
    std::shared_lock lock(mutex_);
    auto it = logs_.find(std::string(path));
    if (it == logs_.end()) throw NotFoundError("no version log for " + std::string(path));
    return *it->second;
  }

  const VersionLog& log(std::string_view path) const {
    return const_cast<VersionStore*>(this)->log(path);
  }

  VersionLog* find(std::string_view path) {
    std::shared_lock lock(mutex_);
    auto it = logs_.find(std::string(path));
    return it == logs_.end() ? nullptr : it->second.get();
  }

  const VersionLog* find(std::string_view path) const { return const_cast<VersionStore*>(this)->find(path); }

  // Returns the log for `path`, creating an empty one if absent.
  VersionLog& ensure_log(const std::string& path, const std::string& owner_app = {}) {
    detail::check_store_path(path);
    if (owner_app.find_first_of("\t\n\r") != std::string::npos)
      throw ArgumentError("application name contains a tab or newline");
    std::unique_lock lock(mutex_);
    if (auto it = logs_.find(path); it != logs_.end()) return *it->second;
    char name[32];
    std::snprintf(name, sizeof name, "log-%06llu.saic", static_cast<unsigned long long>(next_id_));
    auto log = VersionLog::create(dir_ / name, path, owner_app);
    ++next_id_;
    auto& ref = *log;
    logs_.emplace(path, std::move(log));
    save_index_locked();
    return ref;
  }

  std::uint64_t append_version(const std::string& path, TimestampNs timestamp, ByteView content,
                               const std::string& owner_app = {}) {
    return ensure_log(path, owner_app).append(timestamp, content);
  }

  // Sum of content bytes over every version of every log.
  std::uint64_t total_bytes() const {
    std::shared_lock lock(mutex_);
    std::uint64_t total = 0;
    for (const auto& [_, log] : logs_) total += log->total_bytes();
    return total;
  }

  // Deletes a log and its file.
  void remove_log(const std::string& path) {
    std::unique_lock lock(mutex_);
    remove_log_locked(path);
    save_index_locked();
  }

  // Whole-log eviction, lowest score first; ties go to the larger log, then
  // the lexicographically smaller path. Paths without a score use
  // kUnscoredSentinel.
  EvictionReport evict_for_quota(const std::map<std::string, double>& scores, std::int64_t quota_bytes) {
    if (quota_bytes < 0) throw ArgumentError("quota must be non-negative, got " + std::to_string(quota_bytes));
    std::unique_lock lock(mutex_);

    struct Candidate {
      double score;
      std::uint64_t bytes;
      std::uint64_t versions;
      std::string path;
    };
    std::vector<Candidate> order;
    std::uint64_t total = 0;
    for (const auto& [path, log] : logs_) {
      auto it = scores.find(path);
      const double score = it == scores.end() ? kUnscoredSentinel : it->second;
      order.push_back({score, log->total_bytes(), log->size(), path});
      total += log->total_bytes();
    }
    std::sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score < b.score;
      if (a.bytes != b.bytes) return a.bytes > b.bytes;
      return a.path < b.path;
    });

    EvictionReport report;
    const auto quota = static_cast<std::uint64_t>(quota_bytes);
    for (const auto& c : order) {
      if (total <= quota) break;
      remove_log_locked(c.path);
      total -= c.bytes;
      report.evicted.push_back({c.path, c.versions, c.bytes});
    }
    if (!report.evicted.empty()) save_index_locked();
    report.remaining_bytes = total;
    return report;
  }

 private:
  explicit VersionStore(fs::path dir) : dir_(std::move(dir)) {}

  void load_index() {
    std::map<std::string, std::string> owners;
    if (std::ifstream in(dir_ / kOwnersFile); in) {
      std::string line;
      while (std::getline(in, line)) {
        auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        owners[line.substr(0, tab)] = line.substr(tab + 1);
      }
    }
    std::ifstream in(dir_ / kIndexFile);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
        throw ParseError((dir_ / kIndexFile).string(), lineno, "expected path<TAB>logfile");
      std::string path = line.substr(0, tab);
      std::string file = line.substr(tab + 1);
      auto it = owners.find(path);
      logs_.emplace(path, VersionLog::load(dir_ / file, path, it == owners.end() ? "" : it->second));
      unsigned long long id = 0;
      if (std::sscanf(file.c_str(), "log-%llu.saic", &id) == 1) next_id_ = std::max<std::uint64_t>(next_id_, id + 1);
    }
  }

  void remove_log_locked(const std::string& path) {
    auto it = logs_.find(path);
    if (it == logs_.end()) throw NotFoundError("no version log for " + path);
    std::error_code ec;
    fs::remove(it->second->file(), ec);
    logs_.erase(it);
  }

  void save_index_locked() {
    std::string index;
    std::string owners;
    for (const auto& [path, log] : logs_) {
      index += path + '\t' + log->file().filename().string() + '\n';
      if (!log->owner_app().empty()) owners += path + '\t' + log->owner_app() + '\n';
    }
    detail::write_file_atomically(dir_ / kIndexFile, as_bytes(index));
    if (!owners.empty() || fs::exists(dir_ / kOwnersFile))
      detail::write_file_atomically(dir_ / kOwnersFile, as_bytes(owners));
  }

  fs::path dir_;
  std::map<std::string, std::unique_ptr<VersionLog>> logs_;
  std::uint64_t next_id_ = 1;
  mutable std::shared_mutex mutex_;
};

inline EvictionReport evict_for_quota(VersionStore& store, const std::map<std::string, double>& scores,
                                      std::int64_t quota_bytes) {
  return store.evict_for_quota(scores, quota_bytes);
}

}  // namespace confsieve
