// Writes a procedural source library in the <category>/<object>.png layout.

#include <iostream>

#include <CLI11.hpp>

#include "cbench/error.hpp"
#include "cbench/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"make_sources: procedural stand-ins for background-removed object photos"};
  std::string out;
  int per_category = 4, size = 320;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--per-category", per_category, "Objects per category")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--size", size, "Canvas side in pixels")->capture_default_str()->check(CLI::Range(32, 4096));
  app.add_option("--seed", seed, "Library seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    cbench::synthetic::write_library(cbench::synthetic::make_library(per_category, size, seed), out);
  } catch (const cbench::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
