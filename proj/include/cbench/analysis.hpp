#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cbench::analysis {

// ---- response tables ---------------------------------------------------------

struct ResponseRecord {
  std::string id;         // subject or model
  std::string condition;  // rgb | contour | phosphene | segment
  std::optional<int> level;
  std::string stimulus;
  std::string truth;
  std::string choice;
  bool correct = false;
  std::optional<double> rt_ms;
};

struct ResponseTable {
  std::vector<ResponseRecord> records;

  // correct == (choice == truth); canonical conditions, levels and labels.
  void validate() const;
};

inline constexpr const char* kResponseHeader = "id,condition,level,stimulus,true,choice,correct,rt_ms";

void write_responses_csv(std::ostream& os, const ResponseTable& table);
ResponseTable read_responses_csv(std::istream& is);
ResponseTable read_responses_csv(const std::string& path);
void write_responses_csv(const std::string& path, const ResponseTable& table);

// Category of a stimulus from its id's source part ("<slug>-<stem>").
std::string category_of_stimulus(const std::string& stimulus_id);

// A response row for a model's prediction on a stimulus.
ResponseRecord model_response(const std::string& model, const std::string& stimulus_id, const std::string& choice);

// ---- accuracy ----------------------------------------------------------------

struct GroupBy {
  bool condition = true;
  bool level = true;
  bool subject = false;
};

struct GroupAccuracy {
  std::string condition;     // empty when not grouped
  std::optional<int> level;
  std::string id;            // empty when not grouped
  int trials = 0;
  int subjects = 0;
  double accuracy = 0.0;     // pooled over trials
  double ci_low = 0.0;
  double ci_high = 0.0;
};

inline constexpr int kBootstrapResamples = 10000;
inline constexpr std::uint64_t kBootstrapSeed = 0xB055;

// Accuracy per group with a percentile bootstrap CI that resamples subjects
// (ids) with replacement. Deterministic for a given seed at any thread count.
std::vector<GroupAccuracy> condition_accuracy(const ResponseTable& table, GroupBy by = {},
                                              int resamples = kBootstrapResamples,
                                              std::uint64_t seed = kBootstrapSeed);

// Percentile bootstrap CI of the mean of `values`.
std::pair<double, double> bootstrap_mean_ci(std::span<const double> values, int resamples, std::uint64_t seed,
                                            double level = 0.95);

// ---- fits and tests ----------------------------------------------------------

struct FitResult {
  double a = 0.0;  // slope per natural-log unit of percent
  double b = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided slope t-test, n - 2 df
  double slope_se = 0.0;
  int n = 0;

  double predict(double percent) const;
};

struct FitPoint {
  double percent = 0.0;
  double accuracy = 0.0;
};

// OLS of accuracy on ln(percent). Needs >= 3 points and positive percents.
FitResult log_linear_fit(std::span<const FitPoint> points);

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Difference of two independently fitted slopes: t = (a1 - a2) / sqrt(se1^2 + se2^2)
// on n1 + n2 - 4 df.
TTest compare_slopes(const FitResult& first, const FitResult& second);

// Welch's unequal-variance t-test of mean(a) - mean(b).
TTest welch_t_test(std::span<const double> a, std::span<const double> b);

// Two-sided p-value of a t statistic.
double t_two_sided_p(double t, double df);

double integration_bias(double acc_segments, double acc_phosphenes);

struct EffectSize {
  double d = 0.0;
  int n1 = 0;
  int n2 = 0;
  double pooled_sd = 0.0;
};

// (mean_phosphene - mean_segment) / pooled SD; throws "degenerate groups" on zero spread.
EffectSize cohens_d(std::span<const double> group_phosphene, std::span<const double> group_segment);

struct Correlation {
  double r = 0.0;
  double p = 1.0;
  int n = 0;
};

Correlation pearson(std::span<const double> x, std::span<const double> y);

// ---- regression --------------------------------------------------------------

struct DesignColumn {
  std::string name;
  std::vector<double> values;
  bool architecture = false;  // dummy for an architecture family
};

struct RegressionResult {
  std::vector<std::string> names;  // "intercept" first
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::vector<double> t_values;
  std::vector<double> p_values;
  double architecture_mean_abs_t = 0.0;  // NaN when there are no architecture columns
  double r_squared = 0.0;
  double sigma2 = 0.0;
  int df = 0;
};

// OLS with an intercept. Throws naming the collinear columns when the design is
// rank deficient, and when n <= columns + 1.
RegressionResult multiple_regression(const std::vector<DesignColumn>& design, std::span<const double> y);

double mean_abs(std::span<const double> values);

}  // namespace cbench::analysis
