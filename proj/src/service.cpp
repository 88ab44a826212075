#include "cbench/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "cbench/analysis.hpp"
#include "cbench/categories.hpp"
#include "cbench/png_io.hpp"
#include "cbench/random.hpp"

namespace cbench::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Group g) { return g == Group::phosphene ? "phosphene" : "segment"; }

Group group_from_string(const std::string& s) {
  if (s == "phosphene") return Group::phosphene;
  if (s == "segment") return Group::segment;
  throw ValidationError("group must be phosphene or segment, got '" + s + "'");
}

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string random_token() {
  std::random_device rd;
  std::ostringstream os;
  os << std::hex;
  for (int i = 0; i < 4; ++i) {
    os.width(8);
    os.fill('0');
    os << rd();
  }
  return os.str();
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// Fisher-Yates with our own Rng so the order is the same on every platform.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

json planned_json(const PlannedTrial& t) {
  json j = {{"stimulus", t.stimulus}, {"path", t.path}, {"condition", t.condition}, {"truth", t.truth}};
  if (t.level) j["level"] = *t.level;
  return j;
}

PlannedTrial planned_from(const json& j) {
  PlannedTrial t;
  t.stimulus = j.at("stimulus");
  t.path = j.at("path");
  t.condition = j.at("condition");
  t.truth = j.at("truth");
  if (j.contains("level")) t.level = j["level"].get<int>();
  return t;
}

json practice_json(const PracticeTrial& p) { return {{"stimulus", p.stimulus}, {"truth", p.truth}, {"labels", p.labels}}; }

PracticeTrial practice_from(const json& j) {
  PracticeTrial p{j.at("stimulus"), j.at("truth"), j.at("labels").get<std::vector<std::string>>()};
  if (p.labels.size() != 12) throw ValidationError("practice trial needs 12 labels");
  if (std::find(p.labels.begin(), p.labels.end(), p.truth) == p.labels.end())
    throw ValidationError("practice truth '" + p.truth + "' is not among its labels");
  return p;
}

std::vector<std::string> canonical_labels() { return {kCategories.begin(), kCategories.end()}; }

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw RuntimeError("session log write failed");
    }
    off += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

std::vector<PlannedTrial> plan_sequence(const stimulus::DatasetManifest& manifest, Group group, std::uint64_t seed) {
  const auto frag = group == Group::phosphene ? stimulus::Condition::phosphene : stimulus::Condition::segment;
  std::map<int, std::vector<PlannedTrial>> by_level;
  std::vector<PlannedTrial> contour, rgb;
  for (const auto& r : manifest.records) {
    PlannedTrial t{r.spec.id(), r.path, stimulus::to_string(r.spec.condition), std::nullopt, r.category};
    if (r.spec.condition == frag) {
      t.level = r.spec.level->percent();
      by_level[*t.level].push_back(std::move(t));
    } else if (r.spec.condition == stimulus::Condition::contour) {
      contour.push_back(std::move(t));
    } else if (r.spec.condition == stimulus::Condition::rgb) {
      rgb.push_back(std::move(t));
    }
  }
  Rng rng(seed);
  std::vector<PlannedTrial> out;
  auto take = [&](std::vector<PlannedTrial>& block) {
    shuffle(block, rng);
    for (auto& t : block) out.push_back(std::move(t));
  };
  for (auto& [level, block] : by_level) take(block);  // std::map: ascending
  take(contour);
  take(rgb);
  return out;
}

// ---- sessions ----------------------------------------------------------------

struct ExperimentService::Slot {
  std::mutex mutex;
  SessionState state;
  int fd = -1;
  std::map<int, std::int64_t> presented;  // trial index -> first fetch time

  ~Slot() {
    if (fd >= 0) ::close(fd);
  }
};

ExperimentService::ExperimentService(ServiceConfig config) : config_(std::move(config)) {
  const fs::path manifest = config_.dataset_dir / "manifest.json";
  if (!config_.dataset_dir.empty() && fs::exists(manifest)) manifest_ = stimulus::read_manifest(manifest);
  if (config_.practice_manifest) {
    std::ifstream f(*config_.practice_manifest);
    if (!f) throw ValidationError("practice manifest not found: " + config_.practice_manifest->string());
    const json j = json::parse(f);
    for (const auto& t : j.at("trials")) practice_.push_back(practice_from(t));
  }
  if (config_.log_dir.empty()) throw ValidationError("service needs a log directory");
  fs::create_directories(config_.log_dir);
  replay();
}

ExperimentService::~ExperimentService() = default;

ExperimentService::Slot& ExperimentService::slot(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session");
  return *it->second;
}

void ExperimentService::append(Slot& s, const json& line) {
  write_all(s.fd, line.dump() + "\n");
  if (::fsync(s.fd) != 0) throw RuntimeError("session log fsync failed");
}

void ExperimentService::replay() {
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(config_.log_dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") logs.push_back(e.path());
  std::sort(logs.begin(), logs.end());

  for (const auto& path : logs) {
    std::ifstream f(path, std::ios::binary);
    auto slot = std::make_unique<Slot>();
    auto& st = slot->state;
    std::string line;
    std::uintmax_t good_bytes = 0;
    bool header = false, torn = false;
    while (std::getline(f, line)) {
      const bool terminated = !f.eof();
      json j;
      try {
        if (!terminated) throw std::runtime_error("unterminated");
        j = json::parse(line);
      } catch (const std::exception&) {
        // Only the tail can be torn by a crash mid-append; it was never acked.
        torn = true;
        break;
      }
      const std::string type = j.at("type");
      if (type == "session") {
        st.id = j.at("id");
        st.group = group_from_string(j.at("group"));
        st.auto_assigned = j.value("auto", false);
        st.seed = j.at("seed");
        st.created_at_ms = j.at("created_at_ms");
        for (const auto& t : j.at("sequence")) st.sequence.push_back(planned_from(t));
        for (const auto& t : j.value("practice", json::array())) st.practice.push_back(practice_from(t));
        header = true;
      } else if (type == "practice") {
        if (j.at("index").get<int>() != st.practice_done) throw RuntimeError(path.string() + ": practice gap");
        ++st.practice_done;
      } else if (type == "response") {
        TrialRecord r;
        r.trial_index = j.at("trial_index");
        if (r.trial_index != st.cursor() || st.complete()) throw RuntimeError(path.string() + ": trial index gap");
        const auto& planned = st.sequence[r.trial_index];
        r.stimulus = planned.stimulus;
        r.condition = planned.condition;
        r.level = planned.level;
        r.truth = planned.truth;
        r.choice = j.at("choice");
        r.correct = r.choice == r.truth;
        r.rt_ms = j.at("rt_ms");
        r.presented_at_ms = j.value("presented_at_ms", std::int64_t{0});
        r.recorded_at_ms = j.value("recorded_at_ms", std::int64_t{0});
        st.records.push_back(std::move(r));
      }
      good_bytes += line.size() + 1;
    }
    if (!header) {
      ++replay_warnings_;  // crash before the header reached disk
      continue;
    }
    if (torn) {
      ++replay_warnings_;
      fs::resize_file(path, good_bytes);
    }
    slot->fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (slot->fd < 0) throw RuntimeError("cannot reopen " + path.string());
    sessions_[st.id] = std::move(slot);
  }
}

json ExperimentService::create_session(std::optional<Group> group) {
  if (!manifest_) throw Unavailable("dataset manifest missing");
  std::lock_guard create_lock(create_mutex_);  // keeps auto-assignment balanced
  auto slot = std::make_unique<Slot>();
  auto& st = slot->state;
  {
    std::shared_lock lock(map_mutex_);
    if (!group) {
      int phos = 0, seg = 0;
      for (const auto& [id, s] : sessions_) (s->state.group == Group::phosphene ? phos : seg)++;
      group = seg < phos ? Group::segment : Group::phosphene;
      st.auto_assigned = true;
    }
  }
  st.id = random_token();
  st.group = *group;
  st.seed = random_seed();
  st.created_at_ms = now_ms();
  st.sequence = plan_sequence(*manifest_, st.group, st.seed);
  st.practice = practice_;
  if (st.sequence.empty()) throw Unavailable("manifest has no stimuli for group " + to_string(st.group));

  const fs::path path = config_.log_dir / (st.id + ".jsonl");
  slot->fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (slot->fd < 0) throw RuntimeError("cannot create " + path.string());
  json header = {{"type", "session"}, {"id", st.id}, {"group", to_string(st.group)}, {"auto", st.auto_assigned},
                 {"seed", st.seed}, {"created_at_ms", st.created_at_ms}, {"sequence", json::array()},
                 {"practice", json::array()}};
  for (const auto& t : st.sequence) header["sequence"].push_back(planned_json(t));
  for (const auto& p : st.practice) header["practice"].push_back(practice_json(p));
  append(*slot, header);
  fsync_dir(config_.log_dir);

  json out = {{"session_id", st.id}, {"group", to_string(st.group)}, {"cursor", 0},
              {"total_trials", st.sequence.size()}, {"practice_trials", st.practice.size()},
              {"created_at_ms", st.created_at_ms}, {"status", "active"}};
  {
    std::unique_lock lock(map_mutex_);
    sessions_[st.id] = std::move(slot);
  }
  return out;
}

json ExperimentService::next_trial(const std::string& id) {
  Slot& s = slot(id);
  std::lock_guard lock(s.mutex);
  auto& st = s.state;
  const std::string base = "/api/session/" + id;
  json d = {{"session_id", id},
            {"stimulus_duration_ms", config_.stimulus_duration_ms},
            {"mask_duration_ms", config_.mask_duration_ms},
            {"fixation_ms", config_.fixation_ms}};
  if (st.in_practice()) {
    const auto& p = st.practice[st.practice_done];
    d["phase"] = "practice";
    d["trial_index"] = st.practice_done;
    d["total_trials"] = st.practice.size();
    d["stimulus_url"] = "/stimuli/" + p.stimulus;
    d["mask_url"] = base + "/mask/p" + std::to_string(st.practice_done) + ".png";
    d["labels"] = p.labels;
    return d;
  }
  if (st.complete()) return {{"session_id", id}, {"complete", true}, {"trials", st.sequence.size()}};
  const int i = st.cursor();
  const auto& t = st.sequence[i];
  s.presented.try_emplace(i, now_ms());
  d["phase"] = "experiment";
  d["trial_index"] = i;
  d["total_trials"] = st.sequence.size();
  d["stimulus_url"] = "/stimuli/" + t.path;
  d["mask_url"] = base + "/mask/" + std::to_string(i) + ".png";
  d["labels"] = canonical_labels();
  return d;
}

json ExperimentService::record_response(const std::string& id, int trial_index, const std::string& choice,
                                        double rt_ms) {
  Slot& s = slot(id);
  std::lock_guard lock(s.mutex);
  auto& st = s.state;
  if (!std::isfinite(rt_ms) || rt_ms < 0) throw ValidationError("rt_ms must be a non-negative number");

  if (st.in_practice()) {
    if (trial_index != st.practice_done)
      throw Conflict("expected practice trial " + std::to_string(st.practice_done) + ", got " +
                     std::to_string(trial_index));
    const auto& p = st.practice[st.practice_done];
    if (std::find(p.labels.begin(), p.labels.end(), choice) == p.labels.end())
      throw ValidationError("choice '" + choice + "' is not one of the trial labels");
    const bool correct = choice == p.truth;
    append(s, {{"type", "practice"}, {"index", trial_index}, {"choice", choice}, {"correct", correct},
               {"rt_ms", rt_ms}, {"recorded_at_ms", now_ms()}});
    ++st.practice_done;
    return {{"phase", "practice"}, {"trial_index", trial_index}, {"correct", correct}, {"complete", false}};
  }

  if (st.complete()) throw Conflict("session already complete");
  if (trial_index != st.cursor())
    throw Conflict("expected trial " + std::to_string(st.cursor()) + ", got " + std::to_string(trial_index));
  if (!is_category(choice)) throw ValidationError("category not in the 12-label set: " + choice);

  const auto& t = st.sequence[trial_index];
  TrialRecord r{trial_index, t.stimulus, t.condition, t.level, t.truth, choice, choice == t.truth, rt_ms, 0, now_ms()};
  if (const auto it = s.presented.find(trial_index); it != s.presented.end()) r.presented_at_ms = it->second;
  append(s, {{"type", "response"}, {"trial_index", trial_index}, {"stimulus", r.stimulus}, {"choice", choice},
             {"correct", r.correct}, {"rt_ms", rt_ms}, {"presented_at_ms", r.presented_at_ms},
             {"recorded_at_ms", r.recorded_at_ms}});
  st.records.push_back(std::move(r));
  s.presented.erase(trial_index);
  return {{"phase", "experiment"}, {"trial_index", trial_index}, {"correct", st.records.back().correct},
          {"complete", st.complete()}};
}

std::string ExperimentService::export_csv(bool include_partial) const {
  std::vector<SessionState> states;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& [id, s] : sessions_) {
      std::lock_guard slock(s->mutex);
      if (include_partial || s->state.complete()) states.push_back(s->state);
    }
  }
  std::sort(states.begin(), states.end(), [](const SessionState& a, const SessionState& b) {
    return std::tie(a.created_at_ms, a.id) < std::tie(b.created_at_ms, b.id);
  });
  analysis::ResponseTable table;
  for (const auto& st : states)
    for (const auto& r : st.records)
      table.records.push_back({st.id, r.condition, r.level, r.stimulus, r.truth, r.choice, r.correct, r.rt_ms});
  std::ostringstream os;
  analysis::write_responses_csv(os, table);
  return os.str();
}

std::vector<unsigned char> ExperimentService::mask_png(const std::string& id, int index, bool practice) const {
  std::uint64_t seed;
  std::size_t count;
  {
    Slot& s = slot(id);
    std::lock_guard lock(s.mutex);
    seed = s.state.seed;
    count = practice ? s.state.practice.size() : s.state.sequence.size();
  }
  if (index < 0 || static_cast<std::size_t>(index) >= count) throw NotFound("no such trial");
  const std::uint64_t mask_seed = StableHash(seed).add(practice ? "practice-mask" : "mask").add(
      static_cast<std::uint64_t>(index)).value();
  return encode_png(stimulus::generate_noise_mask(config_.mask_size, mask_seed));
}

std::optional<SessionState> ExperimentService::session(const std::string& id) const {
  try {
    Slot& s = slot(id);
    std::lock_guard lock(s.mutex);
    return s.state;
  } catch (const NotFound&) {
    return std::nullopt;
  }
}

std::vector<std::string> ExperimentService::session_ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

}  // namespace cbench::service
