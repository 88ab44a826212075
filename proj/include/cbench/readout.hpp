#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbench/categories.hpp"
#include "cbench/error.hpp"

namespace cbench::readout {

inline constexpr int kImageNetClasses = 1000;

// ImageNet class index -> canonical category index (into kCategories) or none.
class CategoryMapping {
 public:
  CategoryMapping() = default;
  explicit CategoryMapping(std::array<std::optional<int>, kImageNetClasses> entries);

  // JSON object {"<index>": "<category>" | null}. Keys must be 0..999; the
  // load fails unless every category has at least one member.
  static CategoryMapping load(const std::filesystem::path& path);
  static CategoryMapping parse(const std::string& json_text);

  std::optional<int> category_of(int imagenet_index) const { return entries_.at(imagenet_index); }
  std::vector<int> members(int category) const;
  void validate() const;

 private:
  std::array<std::optional<int>, kImageNetClasses> entries_{};
};

enum class Aggregation { max, sum };

// Per-category max (or sum) of class probabilities over member classes;
// unmapped classes are ignored. Indexed like kCategories.
std::array<double, kCategoryCount> aggregate_probabilities(std::span<const double> probabilities,
                                                           const CategoryMapping& mapping,
                                                           Aggregation agg = Aggregation::max);

// Highest score's label; ties go to the alphabetically first category.
std::string best_category(const std::array<double, kCategoryCount>& scores);

// Softmax over all logits, then aggregate_probabilities.
std::array<double, kCategoryCount> zero_shot_scores(std::span<const double> logits, const CategoryMapping& mapping,
                                                    Aggregation agg = Aggregation::max);

// Highest-scoring category label; ties go to the alphabetically first.
std::string zero_shot_predict(std::span<const double> logits, const CategoryMapping& mapping,
                              Aggregation agg = Aggregation::max);

// Row-major activation matrix with optional per-row labels.
struct ActivationSet {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
  std::vector<std::string> ids;
  std::optional<std::vector<std::string>> labels;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  void validate() const;
  // Rows whose index is listed, in that order.
  ActivationSet select(const std::vector<std::size_t>& indices) const;
};

// "ACTF", u32 version 1, u32 rows, u32 cols (little-endian), then rows*cols f32 LE.
void write_actf(const std::filesystem::path& path, const ActivationSet& set);
// Matrix only; ids and labels are left empty.
ActivationSet read_actf_matrix(const std::filesystem::path& path);

// `<name>.labels.json` for `<name>.actf` and `<name>.logits.actf`.
std::filesystem::path labels_path_for(const std::filesystem::path& actf);
void write_labels(const std::filesystem::path& path, const ActivationSet& set);
// Matrix plus the labels sidecar; the sidecar is required.
ActivationSet read_activations(const std::filesystem::path& actf);

struct DecoderHyper {
  double l2 = 1e-3;
  int max_iterations = 2000;
  double tolerance = 1e-6;  // on the gradient infinity norm
  bool standardize = true;
};

// Multinomial logistic regression over `classes` (kept in alphabetical order
// so that argmax ties resolve alphabetically).
struct DecoderModel {
  std::vector<std::string> classes;
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd biases;
  Eigen::VectorXd mean;     // standardization
  Eigen::VectorXd scale;
  DecoderHyper hyper;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loss_history;  // accepted iterates, starting at zero parameters

  int features() const { return static_cast<int>(weights.cols()); }
  void validate() const;
};

// Regularized objective at parameters theta = [vec(W) (column-major K x D); b],
// on already-standardized features. Loss = mean cross-entropy + l2/2 |W|^2.
// Exposed for gradient checking.
double decoder_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes, double l2,
                         const Eigen::VectorXd& theta, Eigen::VectorXd* gradient);

// Generic fit on integer labels 0..classes-1 with class names supplied.
DecoderModel fit_multinomial(const Eigen::MatrixXd& x, const std::vector<int>& y,
                             const std::vector<std::string>& classes, const DecoderHyper& hyper);

// Fit over the 12 categories. Throws "incomplete label coverage" if any is absent.
DecoderModel fit_decoder(const ActivationSet& train, const DecoderHyper& hyper = {});

std::vector<std::string> decoder_predict(const DecoderModel& model, const ActivationSet& activations);
std::vector<std::string> decoder_predict(const DecoderModel& model, const Eigen::MatrixXd& x);

std::string decoder_to_json(const DecoderModel& model);
DecoderModel decoder_from_json(const std::string& text);

Eigen::MatrixXd to_matrix(const ActivationSet& set);

// One decoder per (condition, level) cell. Rows are grouped by their stimulus
// ids ("<condition>[/<level>]/<source>"); every cell of `test` needs a cell in
// `train`. Cells are fitted in parallel.
struct DecodedCell {
  std::string condition;
  std::optional<int> level;
  int train_rows = 0;
  double train_accuracy = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> ids;          // test stimulus ids
  std::vector<std::string> predictions;  // aligned with ids
};

std::vector<DecodedCell> decode_within_condition(const ActivationSet& train, const ActivationSet& test,
                                                 const DecoderHyper& hyper = {}, int jobs = 0);

}  // namespace cbench::readout
