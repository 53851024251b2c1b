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

#ifndef ADDLAB_FEATUREIO_HPP
#define ADDLAB_FEATUREIO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "addlab/dsp.hpp"

namespace addlab {

// Feature file layout, all little-endian:
//   "ADDF" | u16 version | u32 name_len | name (UTF-8) | u8 dtype (0 = f32)
//   | f32 frame_rate | u8 ndims | u32 dims[ndims] | f32 payload (row-major)
//   | u32 CRC-32 of every preceding byte
inline constexpr std::uint16_t kFeatureFileVersion = 1;

std::uint32_t crc32(std::span<const std::byte> bytes);

std::vector<std::byte> encode_feature_file(const FeatureTensor& t);
/// Errors: Reason::truncated, magic, version, format, checksum.
FeatureTensor decode_feature_file(std::span<const std::byte> bytes);

void write_feature_file(const FeatureTensor& t, const std::filesystem::path& path);
FeatureTensor read_feature_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over the target.
void atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes);
void atomic_write(const std::filesystem::path& path, const std::string& text);
std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Class index convention: genuine is class 0, spoof class 1.
enum class Label { genuine = 0, spoof = 1 };
enum class Split { train, dev, eval };

const char* label_name(Label l) noexcept;
const char* split_name(Split s) noexcept;
Label parse_label(const std::string& s);

struct ManifestRecord {
  std::string id;
  Label label = Label::genuine;
  Split split = Split::train;
  std::string audio_path;                            // optional
  std::map<std::string, std::string> feature_paths;  // view name -> path
  std::size_t line = 0;
};

/// JSON-lines manifest, one object per line:
///   {"id": "...", "label": "genuine|spoof", "split": "train|dev|eval",
///    "audio": "path", "features": {"view": "path", ...}}
/// Blank lines and lines starting with '#' are ignored. Relative paths are
/// resolved against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
  std::vector<const ManifestRecord*> split(Split s) const;
};

DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace addlab

#endif  // ADDLAB_FEATUREIO_HPP
