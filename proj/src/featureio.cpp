/*
 * Copyright 2026 The addlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "addlab/featureio.hpp"

#include <zlib.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"

#include "addlab/error.hpp"

namespace addlab {

namespace {

static_assert(std::endian::native == std::endian::little,
              "feature files are written with native little-endian stores");

constexpr char kMagic[4] = {'A', 'D', 'D', 'F'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  std::vector<std::byte>& buffer() { return out_; }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  template <typename T>
  T pod(const char* what) {
    T v;
    std::memcpy(&v, need(sizeof(T), what), sizeof(T));
    return v;
  }
  const std::byte* need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n)
      fail(Status::data, Reason::truncated,
           std::string("feature file truncated while reading ") + what);
    const std::byte* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

DimKind kind_for_name(const std::string& name) {
  if (name == "mel" || name == "logspec" || name == "stft_power")
    return DimKind::frequency_bin;
  if (name == "mfcc" || name == "lfcc") return DimKind::cepstral_coef;
  if (name == "cqt") return DimKind::cq_bin;
  return DimKind::embedding;
}

[[noreturn]] void io_error(const std::string& what,
                           const std::filesystem::path& path) {
  fail(Status::runtime, Reason::io, what + ": " + path.string());
}

}  // namespace

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off),
                  static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::byte> encode_feature_file(const FeatureTensor& t) {
  validate(t);
  if (t.dims.size() > 255) fail(Status::data, Reason::format, "too many dims");
  Writer w;
  w.bytes(kMagic, 4);
  w.pod<std::uint16_t>(kFeatureFileVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
  w.bytes(t.name.data(), t.name.size());
  w.pod<std::uint8_t>(0);
  w.pod<float>(static_cast<float>(t.frame_rate));
  w.pod<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) {
    if (d > UINT32_MAX) fail(Status::data, Reason::format, "dimension too large");
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
  }
  w.bytes(t.data.data(), t.data.size() * sizeof(float));
  const std::uint32_t crc = crc32(w.buffer());
  w.pod<std::uint32_t>(crc);
  return std::move(w.buffer());
}

FeatureTensor decode_feature_file(std::span<const std::byte> bytes) {
  Reader r(bytes);
  const std::byte* magic = r.need(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(Status::data, Reason::magic, "not a feature file (bad magic)");
  const auto version = r.pod<std::uint16_t>("version");
  if (version != kFeatureFileVersion)
    fail(Status::data, Reason::version,
         "feature file version " + std::to_string(version) + " unsupported (expected " +
             std::to_string(kFeatureFileVersion) + ")");
  FeatureTensor t;
  const auto name_len = r.pod<std::uint32_t>("name length");
  const std::byte* name = r.need(name_len, "name");
  t.name.assign(reinterpret_cast<const char*>(name), name_len);
  const auto dtype = r.pod<std::uint8_t>("dtype");
  if (dtype != 0)
    fail(Status::data, Reason::format, "unknown dtype code " + std::to_string(dtype));
  t.frame_rate = r.pod<float>("frame rate");
  const auto ndims = r.pod<std::uint8_t>("ndims");
  if (ndims == 0) fail(Status::data, Reason::format, "feature file has no dims");
  std::size_t count = 1;
  for (std::uint8_t i = 0; i < ndims; ++i) {
    const auto d = r.pod<std::uint32_t>("dims");
    t.dims.push_back(d);
    count *= d;
    if (count > bytes.size())
      fail(Status::data, Reason::truncated, "declared payload exceeds file size");
  }
  const std::size_t payload = count * sizeof(float);
  if (r.remaining() < payload + 4)
    fail(Status::data, Reason::truncated, "feature file truncated in payload");
  if (r.remaining() > payload + 4)
    fail(Status::data, Reason::format, "trailing bytes after feature payload");
  const std::byte* data = r.need(payload, "payload");
  const std::size_t crc_pos = r.pos();
  const auto stored = r.pod<std::uint32_t>("checksum");
  if (crc32(bytes.first(crc_pos)) != stored)
    fail(Status::data, Reason::checksum, "feature file CRC mismatch");
  t.data.resize(count);
  std::memcpy(t.data.data(), data, payload);
  t.dim_kind = kind_for_name(t.name);
  validate(t);
  return t;
}

void write_feature_file(const FeatureTensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_feature_file(t);
  atomic_write(path, bytes);
}

FeatureTensor read_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_feature_file(bytes);
  } catch (const Error& e) {
    throw Error(e.status(), e.reason(), path.string() + ": " + e.what());
  }
}

void atomic_write(const std::filesystem::path& path,
                  std::span<const std::byte> bytes) {
  static std::atomic<unsigned long> counter{0};
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
         "_" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_error("cannot open for writing", tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) io_error("write failed", tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    io_error("rename failed", path);
  }
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open", path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

const char* label_name(Label l) noexcept {
  return l == Label::genuine ? "genuine" : "spoof";
}

const char* split_name(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::eval: return "eval";
  }
  return "train";
}

Label parse_label(const std::string& s) {
  if (s == "genuine") return Label::genuine;
  if (s == "spoof") return Label::spoof;
  fail(Status::data, Reason::validation, "unknown label '" + s + "'");
}

std::filesystem::path DatasetManifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

std::vector<const ManifestRecord*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::vector<std::string> problems;
  std::unordered_map<std::string, std::size_t> first_line;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      problems.push_back(where + "malformed JSON (" + e.what() + ")");
      continue;
    }
    if (!j.is_object()) {
      problems.push_back(where + "record is not an object");
      continue;
    }
    ManifestRecord rec;
    rec.line = lineno;
    try {
      rec.id = j.at("id").get<std::string>();
      const auto label = j.at("label").get<std::string>();
      if (label == "genuine") {
        rec.label = Label::genuine;
      } else if (label == "spoof") {
        rec.label = Label::spoof;
      } else {
        problems.push_back(where + "unknown label '" + label + "'");
        continue;
      }
      const auto split = j.value("split", std::string("train"));
      if (split == "train") {
        rec.split = Split::train;
      } else if (split == "dev") {
        rec.split = Split::dev;
      } else if (split == "eval") {
        rec.split = Split::eval;
      } else {
        problems.push_back(where + "unknown split '" + split + "'");
        continue;
      }
      rec.audio_path = j.value("audio", std::string());
      if (j.contains("features"))
        rec.feature_paths =
            j.at("features").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      problems.push_back(where + "bad field (" + e.what() + ")");
      continue;
    }
    if (rec.id.empty()) {
      problems.push_back(where + "empty id");
      continue;
    }
    if (rec.audio_path.empty() && rec.feature_paths.empty()) {
      problems.push_back(where + "record '" + rec.id +
                         "' has neither audio nor feature paths");
      continue;
    }
    auto [it, fresh] = first_line.emplace(rec.id, lineno);
    if (!fresh) {
      problems.push_back("duplicate id '" + rec.id + "' on lines " +
                         std::to_string(it->second) + " and " + std::to_string(lineno));
      continue;
    }
    m.records.push_back(std::move(rec));
  }
  if (!problems.empty()) {
    std::string msg = "manifest validation failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    fail(Status::data, Reason::validation, msg);
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  try {
    return parse_manifest(text, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.status(), e.reason(), path.string() + ": " + e.what());
  }
}

std::string format_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["label"] = label_name(r.label);
    j["split"] = split_name(r.split);
    if (!r.audio_path.empty()) j["audio"] = r.audio_path;
    if (!r.feature_paths.empty()) j["features"] = r.feature_paths;
    out += j.dump() + "\n";
  }
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  atomic_write(path, format_manifest(m));
}

}  // namespace addlab
