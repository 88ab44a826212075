#include "cbench/categories.hpp"

#include <algorithm>

namespace cbench {

std::array<std::string_view, kCategoryCount> categories_alphabetical() {
  auto sorted = kCategories;
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

std::optional<int> category_index(std::string_view label) {
  for (int i = 0; i < kCategoryCount; ++i)
    if (kCategories[i] == label) return i;
  return std::nullopt;
}

bool is_category(std::string_view label) { return category_index(label).has_value(); }

std::string category_slug(std::string_view label) {
  std::string s(label);
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

std::optional<std::string> category_from_slug(std::string_view slug) {
  std::string s(slug);
  std::replace(s.begin(), s.end(), '_', ' ');
  if (is_category(s)) return s;
  return std::nullopt;
}

}  // namespace cbench
