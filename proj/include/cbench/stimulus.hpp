#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbench/contour.hpp"
#include "cbench/fragmenter.hpp"
#include "cbench/image.hpp"

namespace cbench::stimulus {

inline constexpr std::uint64_t kDefaultSeed = 0xB055;

// A background-removed object photograph.
struct SourceImage {
  std::string id;        // "<category slug>-<file stem>"
  std::string category;  // canonical label
  ColorImage rgba;       // 4 channels, straight alpha
  std::string provenance;
};

// Loads `<category>/<object>.png`. Throws "background not removed" when there
// is no alpha channel or more than 90% of pixels are opaque, and "category not
// in the 12-label set" for an unknown parent directory.
SourceImage load_source(const std::filesystem::path& path);

// Every `<category>/<object>.png` under root, sorted by id.
std::vector<SourceImage> load_sources(const std::filesystem::path& root);

// Invariant check shared by load_source and in-memory sources.
void validate_source(const SourceImage& source);

enum class Condition { rgb, contour, phosphene, segment };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);
bool is_fragmented(Condition c);

struct StimulusSpec {
  std::string source_id;
  Condition condition = Condition::rgb;
  std::optional<fragment::FragmentLevel> level;  // present iff fragmented
  Color background = kBlack;
  std::uint64_t seed = 0;

  void validate() const;
  // "<condition>/<level>/<source_id>" for fragmented conditions,
  // "<condition>/<source_id>" otherwise. Doubles as the output path stem.
  std::string id() const;
};

// Parses an id produced by StimulusSpec::id(); seed and background are left at defaults.
StimulusSpec parse_stimulus_id(const std::string& id);

// hash(global_seed, source_id, condition, level); level 0 for rgb and contour.
std::uint64_t stimulus_seed(std::uint64_t global_seed, const std::string& source_id, Condition c,
                            std::optional<fragment::FragmentLevel> level);

struct DatasetConfig {
  double pixels_per_degree = 32.0;
  double field_degrees = 8.0;     // canvas side in degrees
  double object_fraction = 0.8;   // alpha bounding box side / canvas side
  Color background = kBlack;
  Color foreground = kWhite;
  std::uint64_t global_seed = kDefaultSeed;
  bool replica = false;           // require 12 categories x 4 objects
  int jobs = 0;                   // 0: OpenMP default
  int orientations = 8;
  double jitter = 0.0;
  bool write_sidecars = true;

  int canvas_size() const;
  contour::GaborParams gabor() const;
  fragment::PlacementConfig placement() const;
  void validate() const;
};

struct StimulusRecord {
  StimulusSpec spec;
  std::string category;
  std::string path;            // relative to the output root
  int element_count = 0;       // 0 for rgb and contour
  int n_max = 0;               // size of the saturated set
  std::string sha256;          // of the PNG bytes
};

struct DatasetManifest {
  std::string toolkit_version;
  std::uint64_t global_seed = 0;
  DatasetConfig config;
  std::vector<StimulusRecord> records;  // sorted by id

  int count(Condition c) const;
  // Distinct (condition, level) datasets, excluding rgb.
  int generated_dataset_count() const;
};

// The object scaled into the canvas: premultiplied RGB plus coverage.
struct PlacedObject {
  ColorImage premultiplied;  // 3 channels
  GrayImage alpha;
};

PlacedObject place_object(const SourceImage& source, const DatasetConfig& config);

// Luminance of the placed object over black: the filter input.
GrayImage object_luminance(const PlacedObject& object);

// Builds and writes every stimulus plus `manifest.json` under out_dir.
// Sources are processed in parallel; the manifest is assembled afterwards.
DatasetManifest build_dataset(const std::vector<SourceImage>& sources, const DatasetConfig& config,
                              const std::filesystem::path& out_dir);

// Throws listing every category short of 4 objects (or over).
void check_replica_coverage(const std::vector<SourceImage>& sources);

// Deterministic 1/f^exponent noise, rescaled to [0, 1].
GrayImage generate_noise_mask(int size, std::uint64_t seed, double exponent = 1.0);

std::string sha256_hex(const std::vector<unsigned char>& bytes);
std::string sha256_file(const std::filesystem::path& path);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Re-hashes every record's file; returns the ids whose digest differs or whose file is missing.
std::vector<std::string> verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& root);

}  // namespace cbench::stimulus
