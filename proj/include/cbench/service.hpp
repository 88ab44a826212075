#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbench/error.hpp"
#include "cbench/stimulus.hpp"

namespace cbench::service {

// HTTP-flavoured failures; ValidationError maps to 400.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class Unavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Group { phosphene, segment };
std::string to_string(Group g);
Group group_from_string(const std::string& s);

struct ServiceConfig {
  std::filesystem::path dataset_dir;  // holds manifest.json and the stimuli
  std::filesystem::path log_dir;      // one <session>.jsonl per session
  // Optional familiarization block: a JSON file
  // {"trials": [{"stimulus": "<path under dataset_dir>", "truth": "...", "labels": [12 strings]}]}.
  std::optional<std::filesystem::path> practice_manifest;
  int stimulus_duration_ms = 200;
  int mask_duration_ms = 200;
  int fixation_ms = 500;  // not stated for the original protocol
  int mask_size = 256;
};

// One planned trial; what the session will show at a given index.
struct PlannedTrial {
  std::string stimulus;  // stimulus id, e.g. "phosphene/12/truck-obj00"
  std::string path;      // relative to dataset_dir
  std::string condition;
  std::optional<int> level;
  std::string truth;
};

struct TrialRecord {
  int trial_index = 0;
  std::string stimulus;
  std::string condition;
  std::optional<int> level;
  std::string truth;
  std::string choice;
  bool correct = false;
  double rt_ms = 0.0;
  std::int64_t presented_at_ms = 0;  // first descriptor fetch, unix ms
  std::int64_t recorded_at_ms = 0;
};

struct PracticeTrial {
  std::string stimulus;
  std::string truth;
  std::vector<std::string> labels;
};

struct SessionState {
  std::string id;
  Group group = Group::phosphene;
  bool auto_assigned = false;
  std::uint64_t seed = 0;
  std::int64_t created_at_ms = 0;
  std::vector<PlannedTrial> sequence;
  std::vector<PracticeTrial> practice;
  std::vector<TrialRecord> records;  // indices 0..cursor-1
  int practice_done = 0;

  int cursor() const { return static_cast<int>(records.size()); }
  bool complete() const { return cursor() == static_cast<int>(sequence.size()); }
  bool in_practice() const { return practice_done < static_cast<int>(practice.size()); }
};

// Fixed trial order for a group: fragmented levels ascending, each level
// shuffled by `seed`, then contour, then RGB (each shuffled).
std::vector<PlannedTrial> plan_sequence(const stimulus::DatasetManifest& manifest, Group group, std::uint64_t seed);

class ExperimentService {
 public:
  // Loads the manifest when present and replays every session log in log_dir.
  explicit ExperimentService(ServiceConfig config);
  ~ExperimentService();

  nlohmann::json create_session(std::optional<Group> group = std::nullopt);
  // Descriptor for the trial at the cursor, or {"complete": true, ...}.
  nlohmann::json next_trial(const std::string& session_id);
  // Appends durably, then advances. Returns {"trial_index", "correct", "complete"}.
  nlohmann::json record_response(const std::string& session_id, int trial_index, const std::string& choice,
                                 double rt_ms);
  std::string export_csv(bool include_partial = false) const;
  // PNG bytes of the 1/f mask shown after trial `index` (or practice trial `index`).
  std::vector<unsigned char> mask_png(const std::string& session_id, int index, bool practice = false) const;

  std::optional<SessionState> session(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  bool has_manifest() const { return manifest_.has_value(); }
  const ServiceConfig& config() const { return config_; }
  int replay_warnings() const { return replay_warnings_; }

 private:
  struct Slot;
  Slot& slot(const std::string& id) const;
  void replay();
  void append(Slot& s, const nlohmann::json& line);

  ServiceConfig config_;
  std::optional<stimulus::DatasetManifest> manifest_;
  std::vector<PracticeTrial> practice_;
  std::mutex create_mutex_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  int replay_warnings_ = 0;
};

// HTTP front end. bind() with port 0 picks a free port and returns it.
class HttpServer {
 public:
  explicit HttpServer(ExperimentService& service);
  ~HttpServer();
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cbench::service
