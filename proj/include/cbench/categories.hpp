#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace cbench {

inline constexpr int kCategoryCount = 12;

// Canonical presentation order, as shown on the response wheel.
inline constexpr std::array<std::string_view, kCategoryCount> kCategories = {
    "truck", "cup", "bowl", "binoculars", "glasses", "hat",
    "pan", "sewing machine", "shovel", "banana", "boot", "lamp"};

// Alphabetical order, used wherever ties must break deterministically.
std::array<std::string_view, kCategoryCount> categories_alphabetical();

// Position in kCategories, or nullopt.
std::optional<int> category_index(std::string_view label);
bool is_category(std::string_view label);

// Directory and id form: spaces become underscores.
std::string category_slug(std::string_view label);
// Accepts either the label or its slug.
std::optional<std::string> category_from_slug(std::string_view slug);

}  // namespace cbench
