#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cbench/stimulus.hpp"

namespace cbench::synthetic {

// Procedural stand-ins for background-removed object photographs: a flat
// shaded silhouette per category on a transparent canvas. Proportions, pose
// and palette vary with `variant`.
stimulus::SourceImage make_source(const std::string& category, int variant, int size = 320,
                                  std::uint64_t seed = 0);

// per_category objects for each of the 12 categories, ids "<slug>-obj<NN>".
std::vector<stimulus::SourceImage> make_library(int per_category, int size = 320, std::uint64_t seed = 0);

// Writes a library as `<slug>/obj<NN>.png`, the layout load_sources reads.
void write_library(const std::vector<stimulus::SourceImage>& sources, const std::filesystem::path& root);

}  // namespace cbench::synthetic
